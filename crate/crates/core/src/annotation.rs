//! LLM-judge annotation of transcripts: profile extraction, per-utterance
//! state and action labels, session receptivity, and entailment.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::gateway::{
    self, extract_json_object, labeled_value, ChatBackend, GatewayError, SamplingParams,
    TemplateError,
};
use crate::prompts;
use crate::transcript::{Speaker, Turn};
use crate::types::{
    candidate_actions, lowest_state_for, ActionKind, ClientProfile, ReceptivityLevel, StateOfChange,
};

/// Number of trailing turns shown when labeling one utterance's action.
pub const ACTION_SNIPPET_TURNS: usize = 6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnnotationError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("malformed JSON from judge: {0}")]
    MalformedJson(String),
    #[error("judge output is missing `{0}`")]
    MissingField(&'static str),
    #[error("no known state label in judge reply `{0}`")]
    UnknownStateLabel(String),
    #[error("unknown action label `{0}`")]
    UnknownActionLabel(String),
    #[error("receptivity score {0} outside 1..=5")]
    ScoreOutOfRange(i64),
    #[error("no receptivity score in judge reply")]
    MissingScore,
    #[error("{0}")]
    Invalid(&'static str),
}

/// A profile as recovered from a transcript (no receptivity or states).
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ExtractedProfile {
    pub behavior_problem: String,
    #[serde(default)]
    pub personas: Vec<String>,
    #[serde(default)]
    pub motivations: Vec<String>,
    #[serde(default)]
    pub beliefs: Vec<String>,
    #[serde(default)]
    pub acceptable_plans: Vec<String>,
}

impl ExtractedProfile {
    pub fn into_profile(
        self,
        id: impl Into<String>,
        receptivity: ReceptivityLevel,
        initial_state: StateOfChange,
        final_state: StateOfChange,
    ) -> ClientProfile {
        ClientProfile {
            id: id.into(),
            behavior_problem: self.behavior_problem,
            personas: self.personas,
            beliefs: self.beliefs,
            motivations: self.motivations,
            acceptable_plans: self.acceptable_plans,
            receptivity,
            initial_state,
            final_state,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedUtterance {
    pub turn_index: usize,
    pub state: StateOfChange,
    pub action: ActionKind,
}

/// A session with every annotation the corpus and evaluation need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedSession {
    pub id: String,
    pub turns: Vec<Turn>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extracted_profile: Option<ExtractedProfile>,
    pub utterances: Vec<AnnotatedUtterance>,
    pub receptivity_rounds: Vec<u8>,
    pub receptivity_final: ReceptivityLevel,
}

/// Judge access shared by every annotation call.
#[derive(Clone, Copy)]
pub struct Judge<'a> {
    pub backend: &'a dyn ChatBackend,
    pub params: SamplingParams,
    pub max_retries: u32,
}

impl<'a> Judge<'a> {
    pub fn new(backend: &'a dyn ChatBackend) -> Self {
        Self {
            backend,
            params: SamplingParams::JUDGE,
            max_retries: 3,
        }
    }

    pub fn ask(&self, prompt: &str) -> Result<String, GatewayError> {
        gateway::ask(self.backend, prompt, self.params, self.max_retries)
    }
}

fn lookup<'v>(obj: &'v serde_json::Map<String, Value>, names: &[&str]) -> Option<&'v Value> {
    obj.iter().find_map(|(k, v)| {
        let key: String = k
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        names.contains(&key.as_str()).then_some(v)
    })
}

fn is_blank(s: &str) -> bool {
    let t = s.trim().trim_end_matches('.');
    t.is_empty() || t.eq_ignore_ascii_case("none") || t.eq_ignore_ascii_case("n/a")
}

fn text_items(v: Option<&Value>) -> Vec<String> {
    match v {
        Some(Value::String(s)) if !is_blank(s) => alloc::vec![s.trim().to_string()],
        Some(Value::Array(xs)) => xs
            .iter()
            .filter_map(|x| x.as_str())
            .filter(|s| !is_blank(s))
            .map(|s| s.trim().to_string())
            .collect(),
        _ => Vec::new(),
    }
}

/// Parses a profile-annotation reply.
pub fn parse_profile_json(reply: &str) -> Result<ExtractedProfile, AnnotationError> {
    let value =
        extract_json_object(reply).map_err(|e| AnnotationError::MalformedJson(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| AnnotationError::MalformedJson("expected an object".into()))?;
    let behavior_problem = match lookup(
        obj,
        &["behavioralproblem", "behaviorproblem", "behavioralproblems"],
    ) {
        Some(Value::String(s)) if !is_blank(s) => s.trim().to_string(),
        _ => return Err(AnnotationError::MissingField("Behavioral Problem")),
    };
    Ok(ExtractedProfile {
        behavior_problem,
        personas: text_items(lookup(obj, &["persona", "personas"])),
        motivations: text_items(lookup(obj, &["motivation", "motivations"])),
        beliefs: text_items(lookup(obj, &["beliefs", "belief"])),
        acceptable_plans: text_items(lookup(
            obj,
            &["acceptableplan", "acceptableplans", "plans", "plan"],
        )),
    })
}

/// Extracts a profile from a conversation, re-asking on malformed JSON.
pub fn annotate_profile(
    turns: &[Turn],
    judge: Judge<'_>,
) -> Result<ExtractedProfile, AnnotationError> {
    if turns.len() < 2 {
        return Err(AnnotationError::Invalid(
            "profile annotation needs at least two turns",
        ));
    }
    let prompt = prompts::render_annotate_profile(&prompts::render_conversation(turns))?;
    let mut attempt = 0;
    loop {
        let reply = judge.ask(&prompt)?;
        match parse_profile_json(&reply) {
            Err(AnnotationError::MalformedJson(_)) if attempt < judge.max_retries => attempt += 1,
            other => return other,
        }
    }
}

fn last_word(hay: &str, needle: &str) -> Option<usize> {
    hay.match_indices(needle)
        .filter(|(i, _)| {
            !hay[..*i]
                .chars()
                .next_back()
                .is_some_and(|c| c.is_alphabetic())
        })
        .map(|(i, _)| i)
        .last()
}

/// The last of the three annotatable state names mentioned in a reply.
pub fn parse_state_label(reply: &str) -> Result<StateOfChange, AnnotationError> {
    let lower = reply.to_ascii_lowercase();
    StateOfChange::ANNOTATABLE
        .into_iter()
        .filter_map(|s| last_word(&lower, &s.name().to_ascii_lowercase()).map(|pos| (pos, s)))
        .max_by_key(|(pos, _)| *pos)
        .map(|(_, s)| s)
        .ok_or_else(|| AnnotationError::UnknownStateLabel(reply.chars().take(80).collect()))
}

/// One state per client turn, each judged on the conversation up to and
/// including that turn.
pub fn annotate_states(
    turns: &[Turn],
    judge: Judge<'_>,
) -> Result<Vec<(usize, StateOfChange)>, AnnotationError> {
    let mut out = Vec::new();
    for (i, t) in turns.iter().enumerate() {
        if t.speaker != Speaker::Client {
            continue;
        }
        let prompt = prompts::render_annotate_state(&prompts::render_conversation(&turns[..=i]))?;
        let reply = judge.ask(&prompt)?;
        out.push((t.index, parse_state_label(&reply)?));
    }
    Ok(out)
}

/// Reads the `Chosen Action:` line of an action-annotation reply.
pub fn parse_chosen_action(reply: &str) -> Result<ActionKind, AnnotationError> {
    let value = labeled_value(reply, "Chosen Action")
        .ok_or_else(|| AnnotationError::UnknownActionLabel(reply.chars().take(80).collect()))?;
    let word = value
        .split(|c: char| c.is_whitespace() || c == ',' || c == '(')
        .find(|w| !w.is_empty())
        .unwrap_or("");
    word.parse::<ActionKind>()
        .map_err(|_| AnnotationError::UnknownActionLabel(word.to_string()))
}

/// Labels the action of `turns.last()` (a client turn) given its state,
/// reconciling labels that fall outside the state's candidate set.
///
/// Returns the (possibly relabeled) state together with the action.
pub fn annotate_action(
    turns: &[Turn],
    state: StateOfChange,
    judge: Judge<'_>,
) -> Result<(StateOfChange, ActionKind), AnnotationError> {
    let last = turns
        .last()
        .filter(|t| t.speaker == Speaker::Client)
        .ok_or(AnnotationError::Invalid(
            "the last turn must be a client turn",
        ))?;
    let start = turns.len().saturating_sub(ACTION_SNIPPET_TURNS);
    let snippet = prompts::render_conversation(&turns[start..]);
    let options = candidate_actions(state);
    let prompt = prompts::render_annotate_action(options, &snippet, &last.line())?;
    let action = parse_chosen_action(&judge.ask(&prompt)?)?;
    if options.contains(&action) {
        return Ok((state, action));
    }
    let names: Vec<&str> = options.iter().map(|a| a.name()).collect();
    let retry = format!(
        "{prompt}\nThe client is in the {} state, so the chosen action must be one of: {}.",
        state.name(),
        names.join(", ")
    );
    let action = parse_chosen_action(&judge.ask(&retry)?)?;
    if options.contains(&action) {
        Ok((state, action))
    } else {
        Ok((lowest_state_for(action), action))
    }
}

/// States, then actions, for every client turn.
pub fn annotate_utterances(
    turns: &[Turn],
    judge: Judge<'_>,
) -> Result<Vec<AnnotatedUtterance>, AnnotationError> {
    let states = annotate_states(turns, judge)?;
    let mut out = Vec::with_capacity(states.len());
    for (turn_index, state) in states {
        let pos = turns
            .iter()
            .position(|t| t.index == turn_index)
            .ok_or(AnnotationError::Invalid("turn index not found"))?;
        let (state, action) = annotate_action(&turns[..=pos], state, judge)?;
        out.push(AnnotatedUtterance {
            turn_index,
            state,
            action,
        });
    }
    Ok(out)
}

/// `⌊Σ rounds / n⌋` in integer arithmetic.
pub fn floor_mean(rounds: &[u8]) -> Option<u8> {
    if rounds.is_empty() {
        return None;
    }
    let sum: u32 = rounds.iter().map(|r| u32::from(*r)).sum();
    Some((sum / rounds.len() as u32) as u8)
}

/// Reads `Receptivity Score: N`.
pub fn parse_receptivity_score(reply: &str) -> Result<u8, AnnotationError> {
    let value = labeled_value(reply, "Receptivity Score").ok_or(AnnotationError::MissingScore)?;
    let digits: String = value
        .trim_start_matches(|c: char| !c.is_ascii_digit() && c != '-')
        .chars()
        .take_while(|c| c.is_ascii_digit() || *c == '-')
        .collect();
    let n: i64 = digits.parse().map_err(|_| AnnotationError::MissingScore)?;
    if !(1..=5).contains(&n) {
        return Err(AnnotationError::ScoreOutOfRange(n));
    }
    Ok(n as u8)
}

/// Conversation with each client line tagged `(State, Action)`, the input
/// for receptivity scoring.
pub fn labeled_conversation(turns: &[Turn], utterances: &[AnnotatedUtterance]) -> String {
    let mut lines = Vec::with_capacity(turns.len());
    for t in turns {
        match utterances.iter().find(|u| u.turn_index == t.index) {
            Some(u) if t.speaker == Speaker::Client => lines.push(format!(
                "Client ({}, {}): {}",
                u.state.name(),
                u.action.name(),
                t.text
            )),
            _ => lines.push(t.line()),
        }
    }
    lines.join("\n")
}

/// Independent judge rounds; the final level is the floor of their mean.
pub fn annotate_receptivity(
    conversation: &str,
    judge: Judge<'_>,
    rounds: usize,
) -> Result<(Vec<u8>, ReceptivityLevel), AnnotationError> {
    if rounds == 0 {
        return Err(AnnotationError::Invalid(
            "at least one receptivity round is required",
        ));
    }
    let prompt = prompts::render_annotate_receptivity(conversation)?;
    let mut scores = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        let mut attempt = 0;
        let score = loop {
            match parse_receptivity_score(&judge.ask(&prompt)?) {
                Err(AnnotationError::MissingScore) if attempt < judge.max_retries => attempt += 1,
                other => break other?,
            }
        };
        scores.push(score);
    }
    let level = ReceptivityLevel::from_raw(floor_mean(&scores).unwrap_or(0));
    Ok((scores, level))
}

/// `true` iff the reply, lowercased with punctuation and whitespace removed,
/// is exactly `entail`.
pub fn normalize_entailment(reply: &str) -> bool {
    let norm: String = reply
        .chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect();
    norm == "entail"
}

pub fn check_entailment(
    premise: &str,
    hypothesis: &str,
    judge: Judge<'_>,
) -> Result<bool, AnnotationError> {
    if premise.trim().is_empty() || hypothesis.trim().is_empty() {
        return Err(AnnotationError::Invalid(
            "entailment needs a nonempty premise and hypothesis",
        ));
    }
    let prompt = prompts::render_entailment(premise, hypothesis)?;
    Ok(normalize_entailment(&judge.ask(&prompt)?))
}

/// Receptivity rounds per session.
pub const RECEPTIVITY_ROUNDS: usize = 5;

/// Runs the whole pipeline on one transcript.
pub fn annotate_session(
    id: &str,
    turns: &[Turn],
    judge: Judge<'_>,
) -> Result<AnnotatedSession, AnnotationError> {
    let extracted_profile = Some(annotate_profile(turns, judge)?);
    let utterances = annotate_utterances(turns, judge)?;
    let labeled = labeled_conversation(turns, &utterances);
    let (receptivity_rounds, receptivity_final) =
        annotate_receptivity(&labeled, judge, RECEPTIVITY_ROUNDS)?;
    Ok(AnnotatedSession {
        id: id.to_string(),
        turns: turns.to_vec(),
        extracted_profile,
        utterances,
        receptivity_rounds,
        receptivity_final,
    })
}

/// Monotonicity violations in a session's state labels, reported rather
/// than repaired.
pub fn state_regressions(
    utterances: &[AnnotatedUtterance],
) -> Vec<(usize, StateOfChange, StateOfChange)> {
    utterances
        .windows(2)
        .filter(|w| w[1].state < w[0].state)
        .map(|w| (w[1].turn_index, w[0].state, w[1].state))
        .collect()
}
