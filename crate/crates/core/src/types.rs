//! Stages of change, the client action vocabulary, and client profiles.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Client readiness for change. The derived order is the stage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StateOfChange {
    Precontemplation,
    Contemplation,
    Preparation,
    Termination,
}

impl StateOfChange {
    pub const ALL: [StateOfChange; 4] = [
        StateOfChange::Precontemplation,
        StateOfChange::Contemplation,
        StateOfChange::Preparation,
        StateOfChange::Termination,
    ];

    /// The three states an annotator may assign; Termination is only ever
    /// entered by the engine.
    pub const ANNOTATABLE: [StateOfChange; 3] = [
        StateOfChange::Precontemplation,
        StateOfChange::Contemplation,
        StateOfChange::Preparation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StateOfChange::Precontemplation => "Precontemplation",
            StateOfChange::Contemplation => "Contemplation",
            StateOfChange::Preparation => "Preparation",
            StateOfChange::Termination => "Termination",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            StateOfChange::Precontemplation => {
                "The client is unaware of or underestimates the need for change."
            }
            StateOfChange::Contemplation => {
                "The client acknowledges the need for change but remains ambivalent."
            }
            StateOfChange::Preparation => {
                "The client is ready to act, planning specific steps toward change."
            }
            StateOfChange::Termination => {
                "In the final stage of counseling, the client gradually ends the conversation."
            }
        }
    }

    /// One step back along the stage order, if there is one to relapse to.
    pub fn previous(self) -> Option<StateOfChange> {
        match self {
            StateOfChange::Precontemplation => None,
            StateOfChange::Contemplation => Some(StateOfChange::Precontemplation),
            StateOfChange::Preparation => Some(StateOfChange::Contemplation),
            StateOfChange::Termination => Some(StateOfChange::Preparation),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for StateOfChange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StateOfChange {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        StateOfChange::ALL
            .into_iter()
            .find(|st| st.name().eq_ignore_ascii_case(t))
            .ok_or_else(|| UnknownLabel(t.to_string()))
    }
}

/// A label that did not name any known state or action.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown label `{0}`")]
pub struct UnknownLabel(pub String);

/// Whether an action draws on profile information when it is voiced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DisclosureClass {
    Type1,
    Type2,
}

/// The profile component a Type-2 action discloses from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum InfoSource {
    Personas,
    Beliefs,
    Motivation,
    Plans,
}

impl InfoSource {
    pub fn key(self) -> &'static str {
        match self {
            InfoSource::Personas => "personas",
            InfoSource::Beliefs => "beliefs",
            InfoSource::Motivation => "motivation",
            InfoSource::Plans => "plans",
        }
    }

    /// Singular noun used in the information-selection prompt.
    pub fn noun(self) -> &'static str {
        match self {
            InfoSource::Personas => "persona",
            InfoSource::Beliefs => "belief",
            InfoSource::Motivation => "motivation",
            InfoSource::Plans => "plan",
        }
    }
}

/// The twelve client dialogue actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ActionKind {
    Deny,
    Downplay,
    Blame,
    Hesitate,
    Doubt,
    Engage,
    Inform,
    Acknowledge,
    Accept,
    Reject,
    Plan,
    Terminate,
}

impl ActionKind {
    pub const ALL: [ActionKind; 12] = [
        ActionKind::Deny,
        ActionKind::Downplay,
        ActionKind::Blame,
        ActionKind::Hesitate,
        ActionKind::Doubt,
        ActionKind::Engage,
        ActionKind::Inform,
        ActionKind::Acknowledge,
        ActionKind::Accept,
        ActionKind::Reject,
        ActionKind::Plan,
        ActionKind::Terminate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ActionKind::Deny => "Deny",
            ActionKind::Downplay => "Downplay",
            ActionKind::Blame => "Blame",
            ActionKind::Hesitate => "Hesitate",
            ActionKind::Doubt => "Doubt",
            ActionKind::Engage => "Engage",
            ActionKind::Inform => "Inform",
            ActionKind::Acknowledge => "Acknowledge",
            ActionKind::Accept => "Accept",
            ActionKind::Reject => "Reject",
            ActionKind::Plan => "Plan",
            ActionKind::Terminate => "Terminate",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ActionKind::Deny => {
                "The client directly refuses to admit their behavior is problematic or needs change."
            }
            ActionKind::Downplay => {
                "The client downplays the importance or impact of their behavior or situation."
            }
            ActionKind::Blame => {
                "The client attributes their issues to external factors, such as stressful life or other people."
            }
            ActionKind::Hesitate => {
                "The client shows uncertainty, indicating ambivalence about change."
            }
            ActionKind::Doubt => {
                "The client expresses skepticism about the practicality or success of proposed changes."
            }
            ActionKind::Engage => {
                "The client interacts politely with the counselor, such as greeting, thanking or ask questions."
            }
            ActionKind::Inform => {
                "The client shares details about their background, experiences, or emotions."
            }
            ActionKind::Acknowledge => {
                "The client highlight the importance, benefit or confidence to change."
            }
            ActionKind::Accept => "The client agrees to adopt the suggested action plan.",
            ActionKind::Reject => "The client declines the proposed plan, deeming it unsuitable.",
            ActionKind::Plan => "The client proposes or details steps for a change plan.",
            ActionKind::Terminate => {
                "The client highlights current state, expresses a desire to end the current session, and suggests further discussion be deferred to a later time."
            }
        }
    }

    pub fn info_source(self) -> Option<InfoSource> {
        match self {
            ActionKind::Inform => Some(InfoSource::Personas),
            ActionKind::Blame | ActionKind::Downplay | ActionKind::Hesitate | ActionKind::Doubt => {
                Some(InfoSource::Beliefs)
            }
            ActionKind::Acknowledge => Some(InfoSource::Motivation),
            ActionKind::Plan => Some(InfoSource::Plans),
            _ => None,
        }
    }

    pub fn disclosure_class(self) -> DisclosureClass {
        if self.info_source().is_some() {
            DisclosureClass::Type2
        } else {
            DisclosureClass::Type1
        }
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActionKind {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s
            .trim()
            .trim_matches(|c: char| c == '"' || c == '\'' || c == '*' || c == '.');
        ActionKind::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(t))
            .ok_or_else(|| UnknownLabel(t.to_string()))
    }
}

/// The fixed candidate actions for a state, in table order.
pub fn candidate_actions(state: StateOfChange) -> &'static [ActionKind] {
    use ActionKind::*;
    match state {
        StateOfChange::Precontemplation => &[Inform, Engage, Deny, Blame, Downplay],
        StateOfChange::Contemplation => &[Inform, Engage, Hesitate, Doubt, Acknowledge],
        StateOfChange::Preparation => &[Inform, Engage, Reject, Accept, Plan],
        StateOfChange::Termination => &[Terminate],
    }
}

/// Lowest state whose candidate set contains `action`.
pub fn lowest_state_for(action: ActionKind) -> StateOfChange {
    StateOfChange::ALL
        .into_iter()
        .find(|s| candidate_actions(*s).contains(&action))
        .unwrap_or(StateOfChange::Termination)
}

/// Session-level receptivity on a 1..=5 scale.
///
/// Deserialization accepts any integer so that out-of-range profiles can be
/// reported by [`validate_profile`] instead of failing to parse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ReceptivityLevel(u8);

impl ReceptivityLevel {
    pub const MIN: u8 = 1;
    pub const MAX: u8 = 5;

    pub fn new(score: u8) -> Option<Self> {
        (Self::MIN..=Self::MAX)
            .contains(&score)
            .then_some(Self(score))
    }

    /// Wraps a raw score without range checking.
    pub fn from_raw(score: u8) -> Self {
        Self(score)
    }

    pub fn score(self) -> u8 {
        self.0
    }

    pub fn is_valid(self) -> bool {
        (Self::MIN..=Self::MAX).contains(&self.0)
    }

    pub fn label(self) -> &'static str {
        match self.0 {
            1 => "Low receptivity",
            2 => "Moderately Low receptivity",
            3 => "Moderate receptivity",
            4 => "Moderately High receptivity",
            5 => "High receptivity",
            _ => "Invalid receptivity",
        }
    }

    pub fn all() -> impl Iterator<Item = ReceptivityLevel> {
        (Self::MIN..=Self::MAX).map(ReceptivityLevel)
    }
}

impl Serialize for ReceptivityLevel {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(self.0)
    }
}

impl<'de> Deserialize<'de> for ReceptivityLevel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        u8::deserialize(d).map(ReceptivityLevel)
    }
}

/// The stipulated client: what they struggle with, who they are, what holds
/// them back, what could move them, and what they would agree to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClientProfile {
    pub id: String,
    pub behavior_problem: String,
    #[serde(default)]
    pub personas: Vec<String>,
    #[serde(default)]
    pub beliefs: Vec<String>,
    #[serde(default)]
    pub motivations: Vec<String>,
    #[serde(default)]
    pub acceptable_plans: Vec<String>,
    pub receptivity: ReceptivityLevel,
    pub initial_state: StateOfChange,
    pub final_state: StateOfChange,
}

impl ClientProfile {
    pub fn items(&self, source: InfoSource) -> &[String] {
        match source {
            InfoSource::Personas => &self.personas,
            InfoSource::Beliefs => &self.beliefs,
            InfoSource::Motivation => &self.motivations,
            InfoSource::Plans => &self.acceptable_plans,
        }
    }

    pub fn item(&self, id: ProfileItemId) -> Option<&str> {
        self.items(id.source).get(id.index).map(String::as_str)
    }
}

/// Checks every profile invariant; returns one message per violation.
pub fn validate_profile(profile: &ClientProfile) -> Vec<String> {
    let mut out = Vec::new();
    if profile.behavior_problem.trim().is_empty() {
        out.push("behavior_problem must be nonempty".to_string());
    }
    if !profile.receptivity.is_valid() {
        out.push("receptivity out of range".to_string());
    }
    if profile.initial_state > profile.final_state {
        out.push("initial_state exceeds final_state".to_string());
    }
    if profile.initial_state == StateOfChange::Termination {
        out.push("initial_state cannot be Termination".to_string());
    }
    for source in [
        InfoSource::Personas,
        InfoSource::Beliefs,
        InfoSource::Motivation,
        InfoSource::Plans,
    ] {
        if profile.items(source).iter().any(|s| s.trim().is_empty()) {
            out.push(format!("{} contains an empty item", source.key()));
        }
    }
    out
}

/// Identifies one profile item, e.g. the second belief. Serialized as
/// `"beliefs:1"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProfileItemId {
    pub source: InfoSource,
    pub index: usize,
}

impl ProfileItemId {
    pub fn new(source: InfoSource, index: usize) -> Self {
        Self { source, index }
    }
}

impl fmt::Display for ProfileItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.source.key(), self.index)
    }
}

impl FromStr for ProfileItemId {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || UnknownLabel(s.to_string());
        let (src, idx) = s.split_once(':').ok_or_else(bad)?;
        let source = match src {
            "personas" => InfoSource::Personas,
            "beliefs" => InfoSource::Beliefs,
            "motivation" => InfoSource::Motivation,
            "plans" => InfoSource::Plans,
            _ => return Err(bad()),
        };
        let index = idx.parse().map_err(|_| bad())?;
        Ok(Self { source, index })
    }
}

impl Serialize for ProfileItemId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ProfileItemId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
