//! Session transcripts and the per-turn client trace.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::SimulationConfig;
use crate::distribution::ActionDistribution;
use crate::types::{candidate_actions, ActionKind, ProfileItemId, StateOfChange, UnknownLabel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Speaker {
    Counselor,
    Client,
}

impl Speaker {
    pub fn label(self) -> &'static str {
        match self {
            Speaker::Counselor => "Counselor",
            Speaker::Client => "Client",
        }
    }
}

/// A profile item disclosed for one Type-2 action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedInfo {
    pub action: ActionKind,
    pub item: ProfileItemId,
    pub text: String,
}

/// What the engine decided before voicing a client turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientTrace {
    pub state: StateOfChange,
    pub actions: Vec<ActionKind>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub selected_info: Vec<SelectedInfo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context_dist: Option<ActionDistribution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub merged_dist: Option<ActionDistribution>,
}

impl ClientTrace {
    pub fn info_for(&self, action: ActionKind) -> Option<&SelectedInfo> {
        self.selected_info.iter().find(|s| s.action == action)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub index: usize,
    pub speaker: Speaker,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<ClientTrace>,
}

impl Turn {
    pub fn counselor(index: usize, text: impl Into<String>) -> Self {
        Self {
            index,
            speaker: Speaker::Counselor,
            text: text.into(),
            trace: None,
        }
    }

    pub fn client(index: usize, text: impl Into<String>, trace: Option<ClientTrace>) -> Self {
        Self {
            index,
            speaker: Speaker::Client,
            text: text.into(),
            trace,
        }
    }

    /// `"Counselor: ..."` / `"Client: ..."`.
    pub fn line(&self) -> String {
        format!("{}: {}", self.speaker.label(), self.text)
    }
}

/// Renders turns as one `Speaker: text` line each.
pub fn render_lines(turns: &[Turn]) -> String {
    let mut out = String::new();
    for (i, t) in turns.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&t.line());
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EndReason {
    PlanAgreed,
    CounselorGaveUp,
    MaxTurns,
    ClientTerminated,
    ManualStop,
    /// Stopped early by a backend failure.
    Aborted,
}

/// Which client simulation method produced a session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClientKind {
    Framework,
    Base,
    #[serde(rename = "example")]
    ExampleBased,
    #[serde(rename = "profile")]
    ProfileBased,
    #[serde(rename = "proact")]
    ProActBased,
}

impl ClientKind {
    pub const ALL: [ClientKind; 5] = [
        ClientKind::Framework,
        ClientKind::Base,
        ClientKind::ExampleBased,
        ClientKind::ProfileBased,
        ClientKind::ProActBased,
    ];

    pub fn flag(self) -> &'static str {
        match self {
            ClientKind::Framework => "framework",
            ClientKind::Base => "base",
            ClientKind::ExampleBased => "example",
            ClientKind::ProfileBased => "profile",
            ClientKind::ProActBased => "proact",
        }
    }
}

impl fmt::Display for ClientKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.flag())
    }
}

impl FromStr for ClientKind {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ClientKind::ALL
            .into_iter()
            .find(|k| k.flag().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| UnknownLabel(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionTranscript {
    pub id: String,
    pub profile_id: String,
    pub client: ClientKind,
    pub session_index: usize,
    pub config_snapshot: SimulationConfig,
    pub turns: Vec<Turn>,
    pub end_reason: EndReason,
}

impl SessionTranscript {
    pub fn client_turns(&self) -> impl Iterator<Item = &Turn> {
        self.turns.iter().filter(|t| t.speaker == Speaker::Client)
    }

    /// `(turn index, state)` for every traced client turn.
    pub fn traced_states(&self) -> Vec<(usize, StateOfChange)> {
        self.turns
            .iter()
            .filter_map(|t| t.trace.as_ref().map(|tr| (t.index, tr.state)))
            .collect()
    }

    /// Lists violated transcript invariants (empty when well-formed).
    pub fn check_invariants(&self) -> Vec<String> {
        check_turns(&self.turns, &self.config_snapshot)
    }
}

/// Structural checks shared by finished and in-progress transcripts.
pub fn check_turns(turns: &[Turn], config: &SimulationConfig) -> Vec<String> {
    let mut out = Vec::new();
    if turns.len() > config.max_turns {
        out.push(format!(
            "{} turns exceeds max_turns {}",
            turns.len(),
            config.max_turns
        ));
    }
    for (i, t) in turns.iter().enumerate() {
        let expected = if i % 2 == 0 {
            Speaker::Counselor
        } else {
            Speaker::Client
        };
        if t.speaker != expected {
            out.push(format!("turn {i} should be spoken by {}", expected.label()));
        }
        if t.index != i {
            out.push(format!("turn {i} carries index {}", t.index));
        }
        if t.text.trim().is_empty() {
            out.push(format!("turn {i} is empty"));
        }
        if let Some(tr) = &t.trace {
            if t.speaker != Speaker::Client {
                out.push(format!("turn {i} is a counselor turn with a trace"));
            }
            if tr.actions.is_empty() || tr.actions.len() > 3 {
                out.push(format!("turn {i} has {} actions", tr.actions.len()));
            }
            let cands = candidate_actions(tr.state);
            if let Some(a) = tr.actions.iter().find(|a| !cands.contains(a)) {
                out.push(format!("turn {i}: {a} is not a {} action", tr.state));
            }
        }
    }
    let states: Vec<StateOfChange> = turns
        .iter()
        .filter_map(|t| t.trace.as_ref())
        .map(|t| t.state)
        .collect();
    for w in states.windows(2) {
        if w[1] < w[0] {
            let one_step = w[0].previous() == Some(w[1]);
            if !config.relapse_enabled {
                out.push(format!("state decreased from {} to {}", w[0], w[1]));
            } else if !one_step {
                out.push(format!("relapse from {} to {} skips a stage", w[0], w[1]));
            }
        }
    }
    out
}
