//! Motivation rate at turn k and average motivation step.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::transcript::{SessionTranscript, Speaker};
use crate::types::StateOfChange;

/// When (if ever) a session first showed a client state at or past
/// Contemplation, as an overall turn index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MotivationObservation {
    pub first_turn: Option<usize>,
    pub session_len: usize,
}

impl MotivationObservation {
    /// From `(turn index, state)` pairs in turn order.
    pub fn from_states(states: &[(usize, StateOfChange)], session_len: usize) -> Self {
        Self {
            first_turn: states
                .iter()
                .find(|(_, s)| *s >= StateOfChange::Contemplation)
                .map(|(i, _)| *i),
            session_len,
        }
    }

    pub fn from_transcript(t: &SessionTranscript) -> Self {
        let states: Vec<(usize, StateOfChange)> = t
            .turns
            .iter()
            .filter(|x| x.speaker == Speaker::Client)
            .filter_map(|x| x.trace.as_ref().map(|tr| (x.index, tr.state)))
            .collect();
        Self::from_states(&states, t.turns.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotivationMetrics {
    pub k: usize,
    pub mr_at_k: f64,
    /// Mean first-motivation turn over motivated sessions only.
    pub avg_ms: Option<f64>,
    /// Same, counting never-motivated sessions at their full length.
    pub avg_ms_all: Option<f64>,
    pub n_sessions: usize,
    pub n_motivated: usize,
}

pub fn motivation_metrics(obs: &[MotivationObservation], k: usize) -> MotivationMetrics {
    let n = obs.len();
    let by_k = obs
        .iter()
        .filter(|o| o.first_turn.is_some_and(|t| t <= k))
        .count();
    let motivated: Vec<usize> = obs.iter().filter_map(|o| o.first_turn).collect();
    let mean =
        |xs: &[usize]| (!xs.is_empty()).then(|| xs.iter().sum::<usize>() as f64 / xs.len() as f64);
    let all: Vec<usize> = obs
        .iter()
        .map(|o| o.first_turn.unwrap_or(o.session_len))
        .collect();
    MotivationMetrics {
        k,
        mr_at_k: if n == 0 { 0.0 } else { by_k as f64 / n as f64 },
        avg_ms: mean(&motivated),
        avg_ms_all: mean(&all),
        n_sessions: n,
        n_motivated: motivated.len(),
    }
}
