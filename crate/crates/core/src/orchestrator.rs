//! Full sessions: counselor agent, moderator, stop rules.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::annotation::Judge;
use crate::baseline::{make_strategy, ClientStrategy, StrategyError};
use crate::config::SimulationConfig;
use crate::corpus::EmpiricalActionTable;
use crate::engine::JudgeCheck;
use crate::gateway::{self, labeled_value, ChatBackend, ChatSession, GatewayError};
use crate::prompts::{self, ModeratorExample, OPENER_COUNSELOR};
use crate::seed::session_seed;
use crate::transcript::{ClientKind, EndReason, SessionTranscript, Speaker, Turn};
use crate::types::{ActionKind, ClientProfile};

/// The counselor side of a simulated session.
#[derive(Debug, Clone)]
pub struct CounselorAgent {
    chat: ChatSession,
    config: SimulationConfig,
}

impl CounselorAgent {
    pub fn new(config: &SimulationConfig) -> Self {
        Self {
            chat: ChatSession::new(prompts::render_counselor_system()),
            config: config.clone(),
        }
    }

    pub fn chat(&self) -> &ChatSession {
        &self.chat
    }

    /// The fixed first line; no backend call.
    pub fn open(&mut self) -> &'static str {
        self.chat
            .push_assistant(format!("Counselor: {OPENER_COUNSELOR}"));
        OPENER_COUNSELOR
    }

    /// Next counselor line after hearing `client_utterance`.
    pub fn respond(
        &mut self,
        client_utterance: &str,
        gen: &dyn ChatBackend,
    ) -> Result<String, GatewayError> {
        let len = self.chat.messages().len();
        self.chat.push_user(format!("Client: {client_utterance}"));
        let out = gateway::complete(
            gen,
            &self.chat,
            self.config.generation_params(),
            self.config.max_retries,
        )
        .and_then(|r| {
            let text = gateway::strip_speaker_prefix(&r, "Counselor").to_string();
            if text.is_empty() {
                Err(GatewayError::EmptyReply)
            } else {
                Ok(text)
            }
        });
        match out {
            Ok(text) => {
                self.chat.push_assistant(format!("Counselor: {text}"));
                Ok(text)
            }
            Err(e) => {
                self.chat.truncate(len);
                Err(e)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeratorDecision {
    pub should_end: bool,
    /// `PlanAgreed` or `CounselorGaveUp`; present iff `should_end`.
    pub reason: Option<EndReason>,
    pub raw_reply: String,
}

/// Reads a yes/no verdict; `None` when the reply commits to neither.
pub fn parse_yes_no(reply: &str) -> Option<bool> {
    let answer = labeled_value(reply, "Answer").unwrap_or(reply);
    let words: Vec<String> = answer
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(|w| w.to_ascii_lowercase())
        .collect();
    match words.first().map(String::as_str) {
        Some("yes") => return Some(true),
        Some("no") => return Some(false),
        _ => {}
    }
    let yes = words.iter().any(|w| w == "yes");
    let no = words.iter().any(|w| w == "no");
    match (yes, no) {
        (true, false) => Some(true),
        (false, true) => Some(false),
        _ => None,
    }
}

fn plan_agreed(reply: &str, tail: &[Turn]) -> bool {
    if reply.to_ascii_lowercase().contains("plan") {
        return true;
    }
    tail.iter()
        .filter(|t| t.speaker == Speaker::Client)
        .any(|t| match &t.trace {
            Some(tr) => tr.actions.iter().any(|a| {
                matches!(
                    a,
                    ActionKind::Accept | ActionKind::Plan | ActionKind::Terminate
                )
            }),
            None => {
                let l = t.text.to_ascii_lowercase();
                [
                    "plan",
                    "i can do that",
                    "i'll try",
                    "i will try",
                    "i'll start",
                    "i will start",
                ]
                .iter()
                .any(|k| l.contains(k))
            }
        })
}

/// Asks the moderator whether the conversation tail is a natural end.
pub fn moderator_should_end(
    tail: &[Turn],
    judge: Judge<'_>,
    examples: &[ModeratorExample],
) -> Result<ModeratorDecision, GatewayError> {
    let rendered = prompts::render_moderator(
        &prompts::render_moderator_examples(examples),
        &prompts::render_conversation(tail),
    )
    .expect("moderator template binds examples and context");
    let raw_reply = judge.ask(&rendered)?;
    let should_end = parse_yes_no(&raw_reply).unwrap_or(false);
    let reason = should_end.then(|| {
        if plan_agreed(&raw_reply, tail) {
            EndReason::PlanAgreed
        } else {
            EndReason::CounselorGaveUp
        }
    });
    Ok(ModeratorDecision {
        should_end,
        reason,
        raw_reply,
    })
}

/// The chat models a session talks to. One backend may fill every role.
#[derive(Clone, Copy)]
pub struct SessionBackends<'a> {
    pub counselor: &'a dyn ChatBackend,
    pub client: &'a dyn ChatBackend,
    pub judge: &'a dyn ChatBackend,
    pub moderator: &'a dyn ChatBackend,
}

impl<'a> SessionBackends<'a> {
    pub fn shared(backend: &'a dyn ChatBackend) -> Self {
        Self {
            counselor: backend,
            client: backend,
            judge: backend,
            moderator: backend,
        }
    }
}

/// Judge decisions behind one client turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnLog {
    pub turn_index: usize,
    pub checks: Vec<JudgeCheck>,
}

/// A finished (or aborted) session.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionOutcome {
    pub transcript: SessionTranscript,
    pub error: Option<String>,
    pub logs: Vec<TurnLog>,
}

pub fn session_id(profile_id: &str, kind: ClientKind, index: usize) -> String {
    format!("{profile_id}-{}-{index}", kind.flag())
}

/// `base` with the rng seed replaced by this session's derived seed.
pub fn session_config(base: &SimulationConfig, profile_id: &str, index: usize) -> SimulationConfig {
    SimulationConfig {
        rng_seed: session_seed(base.rng_seed, profile_id, index),
        ..base.clone()
    }
}

/// Plays one session between a fresh counselor agent and `strategy`.
pub fn run_session(
    profile: &ClientProfile,
    strategy: &mut dyn ClientStrategy,
    config: &SimulationConfig,
    session_index: usize,
    backends: SessionBackends<'_>,
    examples: &[ModeratorExample],
) -> SessionOutcome {
    let mut counselor = CounselorAgent::new(config);
    let mut turns = Vec::new();
    let mut logs = Vec::new();
    let judge = Judge {
        backend: backends.moderator,
        params: config.judge_params(),
        max_retries: config.max_retries,
    };

    turns.push(Turn::counselor(0, counselor.open()));
    let opener = strategy.open();
    turns.push(Turn::client(1, opener.text.clone(), opener.trace));
    let mut last_client = opener.text;

    let mut error = None;
    let end_reason = loop {
        if turns.len() >= config.max_turns {
            break EndReason::MaxTurns;
        }
        let line = match counselor.respond(&last_client, backends.counselor) {
            Ok(l) => l,
            Err(e) => {
                error = Some(format!("counselor: {e}"));
                break EndReason::Aborted;
            }
        };
        turns.push(Turn::counselor(turns.len(), line.clone()));
        if turns.len() >= config.max_turns {
            break EndReason::MaxTurns;
        }
        let reply = match strategy.reply(&line, backends.client, backends.judge) {
            Ok(r) => r,
            Err(e) => {
                // keep transcripts alternating
                turns.pop();
                error = Some(format!("client: {e}"));
                break EndReason::Aborted;
            }
        };
        let idx = turns.len();
        if !reply.checks.is_empty() {
            logs.push(TurnLog {
                turn_index: idx,
                checks: reply.checks,
            });
        }
        turns.push(Turn::client(idx, reply.text.clone(), reply.trace));
        last_client = reply.text;
        if reply.terminated {
            break EndReason::ClientTerminated;
        }
        let from = turns.len().saturating_sub(config.moderator_window.max(2));
        match moderator_should_end(&turns[from..], judge, examples) {
            Ok(ModeratorDecision {
                should_end: true,
                reason: Some(r),
                ..
            }) => break r,
            Ok(_) => {}
            Err(e) => {
                error = Some(format!("moderator: {e}"));
                break EndReason::Aborted;
            }
        }
    };

    SessionOutcome {
        transcript: SessionTranscript {
            id: session_id(&profile.id, strategy.kind(), session_index),
            profile_id: profile.id.clone(),
            client: strategy.kind(),
            session_index,
            config_snapshot: config.clone(),
            turns,
            end_reason,
        },
        error,
        logs,
    }
}

/// Builds the strategy for `kind` with this session's seed and runs it.
#[allow(clippy::too_many_arguments)]
pub fn simulate_session(
    profile: &ClientProfile,
    kind: ClientKind,
    session_index: usize,
    base_config: &SimulationConfig,
    table: &Arc<EmpiricalActionTable>,
    exemplar: Option<&[Turn]>,
    backends: SessionBackends<'_>,
    examples: &[ModeratorExample],
) -> Result<SessionOutcome, StrategyError> {
    let config = session_config(base_config, &profile.id, session_index);
    let mut strategy = make_strategy(kind, profile, &config, table, exemplar)?;
    Ok(run_session(
        profile,
        strategy.as_mut(),
        &config,
        session_index,
        backends,
        examples,
    ))
}

/// N sessions per profile for one strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSpec {
    pub profiles: Vec<ClientProfile>,
    #[serde(default = "default_sessions")]
    pub sessions_per_profile: usize,
    pub strategy: ClientKind,
    #[serde(default)]
    pub config: SimulationConfig,
    pub output_path: String,
}

fn default_sessions() -> usize {
    3
}

impl BatchSpec {
    pub fn validate(&self) -> Vec<String> {
        let mut out = self.config.validate();
        if self.sessions_per_profile == 0 {
            out.push("sessions_per_profile must be at least 1".into());
        }
        out
    }

    /// `(profile index, session index)` in output order.
    pub fn jobs(&self) -> Vec<(usize, usize)> {
        (0..self.profiles.len())
            .flat_map(|p| (0..self.sessions_per_profile).map(move |s| (p, s)))
            .collect()
    }
}

/// A session that could not be completed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionFailure {
    pub session_id: String,
    pub profile_id: String,
    pub session_index: usize,
    pub turns_completed: usize,
    pub error: String,
}
