//! Empirical (state, receptivity) action statistics from annotated sessions.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::annotation::AnnotatedSession;
use crate::distribution::ActionDistribution;
use crate::types::{candidate_actions, ActionKind, ReceptivityLevel, StateOfChange};

/// Width of a length-histogram bucket, in turns.
pub const LENGTH_BUCKET: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CorpusError {
    #[error("session {session}: {action} is not a {state} action")]
    InconsistentAnnotation {
        session: String,
        state: StateOfChange,
        action: ActionKind,
    },
}

pub type ActionCounts = BTreeMap<ActionKind, u64>;

/// Serialized form of one table cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Cell {
    state: StateOfChange,
    receptivity: u8,
    counts: ActionCounts,
}

/// Action counts per (state, receptivity) cell plus per-state marginals.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(from = "Vec<Cell>", into = "Vec<Cell>")]
pub struct EmpiricalActionTable {
    counts: BTreeMap<(StateOfChange, u8), ActionCounts>,
    marginals: BTreeMap<StateOfChange, ActionCounts>,
}

impl From<Vec<Cell>> for EmpiricalActionTable {
    fn from(cells: Vec<Cell>) -> Self {
        let mut t = Self::default();
        for c in cells {
            for (a, n) in c.counts {
                t.add(c.state, c.receptivity, a, n);
            }
        }
        t
    }
}

impl From<EmpiricalActionTable> for Vec<Cell> {
    fn from(t: EmpiricalActionTable) -> Self {
        t.counts
            .into_iter()
            .map(|((state, receptivity), counts)| Cell {
                state,
                receptivity,
                counts,
            })
            .collect()
    }
}

fn sum(counts: &ActionCounts) -> u64 {
    counts.values().sum()
}

fn smoothed(counts: Option<&ActionCounts>, cands: &[ActionKind], eps: f64) -> ActionDistribution {
    let w = cands.iter().map(|a| {
        let c = counts.and_then(|m| m.get(a)).copied().unwrap_or(0);
        (*a, c as f64 + eps)
    });
    ActionDistribution::from_weights(w).expect("positive smoothing mass")
}

impl EmpiricalActionTable {
    pub fn new() -> Self {
        Self::default()
    }

    fn add(&mut self, state: StateOfChange, receptivity: u8, action: ActionKind, n: u64) {
        *self
            .counts
            .entry((state, receptivity))
            .or_default()
            .entry(action)
            .or_insert(0) += n;
        *self
            .marginals
            .entry(state)
            .or_default()
            .entry(action)
            .or_insert(0) += n;
    }

    /// Counts one utterance, rejecting actions outside the state's set.
    pub fn record(
        &mut self,
        state: StateOfChange,
        receptivity: ReceptivityLevel,
        action: ActionKind,
    ) -> Result<(), (StateOfChange, ActionKind)> {
        if !candidate_actions(state).contains(&action) {
            return Err((state, action));
        }
        self.add(state, receptivity.score(), action, 1);
        Ok(())
    }

    pub fn cell(
        &self,
        state: StateOfChange,
        receptivity: ReceptivityLevel,
    ) -> Option<&ActionCounts> {
        self.counts.get(&(state, receptivity.score()))
    }

    pub fn marginal(&self, state: StateOfChange) -> Option<&ActionCounts> {
        self.marginals.get(&state)
    }

    pub fn count(
        &self,
        state: StateOfChange,
        receptivity: ReceptivityLevel,
        action: ActionKind,
    ) -> u64 {
        self.cell(state, receptivity)
            .and_then(|c| c.get(&action))
            .copied()
            .unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.values().map(sum).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    /// Smoothed action distribution over `candidate_actions(state)`.
    ///
    /// Uses the cell when it holds at least `min_cell` utterances, else the
    /// state marginal, else uniform. Every candidate gets positive mass.
    pub fn empirical_distribution(
        &self,
        state: StateOfChange,
        receptivity: ReceptivityLevel,
        min_cell: u64,
        epsilon: f64,
    ) -> ActionDistribution {
        let cands = candidate_actions(state);
        if state == StateOfChange::Termination {
            return ActionDistribution::point(ActionKind::Terminate);
        }
        let cell = self
            .cell(state, receptivity)
            .filter(|c| sum(c) >= min_cell && sum(c) > 0);
        let source = cell.or_else(|| self.marginal(state).filter(|m| sum(m) > 0));
        match source {
            Some(c) => smoothed(Some(c), cands, epsilon),
            None => ActionDistribution::uniform(cands).expect("nonempty candidate set"),
        }
    }
}

/// Builds the table from annotated sessions.
pub fn build_table(sessions: &[AnnotatedSession]) -> Result<EmpiricalActionTable, CorpusError> {
    let mut t = EmpiricalActionTable::new();
    for s in sessions {
        for u in &s.utterances {
            t.record(u.state, s.receptivity_final, u.action)
                .map_err(|(state, action)| CorpusError::InconsistentAnnotation {
                    session: s.id.clone(),
                    state,
                    action,
                })?;
        }
    }
    Ok(t)
}

/// Corpus-level reference statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct CorpusStats {
    pub n_sessions: usize,
    pub receptivity_histogram: BTreeMap<u8, usize>,
    /// Raw action counts across every client utterance.
    pub action_counts: ActionCounts,
    /// Normalized `action_counts`; absent for an empty corpus.
    pub global_action_distribution: Option<ActionDistribution>,
    /// Bucket lower bound (turns) → session count.
    pub length_histogram: BTreeMap<usize, usize>,
}

pub fn length_bucket(turns: usize) -> usize {
    (turns / LENGTH_BUCKET) * LENGTH_BUCKET
}

pub fn corpus_stats(sessions: &[AnnotatedSession]) -> CorpusStats {
    let mut stats = CorpusStats {
        n_sessions: sessions.len(),
        ..Default::default()
    };
    for s in sessions {
        *stats
            .receptivity_histogram
            .entry(s.receptivity_final.score())
            .or_insert(0) += 1;
        *stats
            .length_histogram
            .entry(length_bucket(s.turns.len()))
            .or_insert(0) += 1;
        for u in &s.utterances {
            *stats.action_counts.entry(u.action).or_insert(0) += 1;
        }
    }
    if !stats.action_counts.is_empty() {
        let full = ActionKind::ALL
            .iter()
            .map(|a| (*a, stats.action_counts.get(a).copied().unwrap_or(0) as f64));
        stats.global_action_distribution = ActionDistribution::from_weights(full).ok();
    }
    stats
}

/// On-disk bundle written by corpus building.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct CorpusBundle {
    pub table: EmpiricalActionTable,
    pub stats: CorpusStats,
}

impl CorpusBundle {
    pub fn build(sessions: &[AnnotatedSession]) -> Result<Self, CorpusError> {
        Ok(Self {
            table: build_table(sessions)?,
            stats: corpus_stats(sessions),
        })
    }
}
