//! Per-method evaluation report assembled from per-session evidence.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::consistency::{aggregate_consistency, extract_and_score, SessionConsistency};
use super::kl::{action_kl, per_state_kl};
use super::motivation::{motivation_metrics, MotivationObservation};
use super::rouge::RougeScores;
use super::spearman::{spearman_with, DEFAULT_PERMUTATIONS};
use super::EvalError;
use crate::annotation::{
    annotate_receptivity, annotate_utterances, labeled_conversation, AnnotatedUtterance,
    AnnotationError, Judge,
};
use crate::corpus::{length_bucket, ActionCounts, CorpusBundle};
use crate::transcript::{ClientKind, SessionTranscript, Speaker};
use crate::types::{ClientProfile, ReceptivityLevel, StateOfChange};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Population mean and standard deviation.
    pub fn of(xs: &[f64]) -> Option<Self> {
        if xs.is_empty() {
            return None;
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        Some(Self {
            mean,
            std: libm::sqrt(var),
        })
    }
}

/// Everything the report needs about one generated session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvidence {
    pub session_id: String,
    pub profile_id: String,
    pub truth_receptivity: ReceptivityLevel,
    pub n_turns: usize,
    /// Client `(state, action)` labels; multi-action turns contribute one
    /// entry per action.
    pub utterances: Vec<AnnotatedUtterance>,
    pub annotated_receptivity: Option<ReceptivityLevel>,
    pub consistency: Option<SessionConsistency>,
}

/// Labels read from engine traces; `None` if any client turn is untraced.
pub fn utterances_from_traces(t: &SessionTranscript) -> Option<Vec<AnnotatedUtterance>> {
    let mut out = Vec::new();
    for turn in t.turns.iter().filter(|x| x.speaker == Speaker::Client) {
        let tr = turn.trace.as_ref()?;
        for a in &tr.actions {
            out.push(AnnotatedUtterance {
                turn_index: turn.index,
                state: tr.state,
                action: *a,
            });
        }
    }
    Some(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvidenceOptions {
    pub consistency: bool,
    pub receptivity_rounds: usize,
}

impl Default for EvidenceOptions {
    fn default() -> Self {
        Self {
            consistency: true,
            receptivity_rounds: crate::annotation::RECEPTIVITY_ROUNDS,
        }
    }
}

/// Labels, receptivity and consistency for one session. Traced sessions
/// reuse their traces; the rest go through the judge.
pub fn gather_evidence(
    t: &SessionTranscript,
    truth: &ClientProfile,
    judge: Judge<'_>,
    opts: EvidenceOptions,
) -> Result<SessionEvidence, AnnotationError> {
    let utterances = match utterances_from_traces(t) {
        Some(u) => u,
        None => annotate_utterances(&t.turns, judge)?,
    };
    let annotated_receptivity = if opts.receptivity_rounds == 0 {
        None
    } else {
        let conv = labeled_conversation(&t.turns, &utterances);
        match annotate_receptivity(&conv, judge, opts.receptivity_rounds) {
            Ok((_, level)) if level.is_valid() => Some(level),
            Ok(_) => None,
            Err(e @ AnnotationError::Gateway(_)) => return Err(e),
            Err(_) => None,
        }
    };
    let consistency = if opts.consistency {
        Some(extract_and_score(&t.id, &t.turns, truth, judge)?)
    } else {
        None
    };
    Ok(SessionEvidence {
        session_id: t.id.clone(),
        profile_id: t.profile_id.clone(),
        truth_receptivity: truth.receptivity,
        n_turns: t.turns.len(),
        utterances,
        annotated_receptivity,
        consistency,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportOptions {
    pub k: usize,
    pub epsilon: f64,
    pub permutations: usize,
    pub seed: u64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            k: 20,
            epsilon: 1e-6,
            permutations: DEFAULT_PERMUTATIONS,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub client: ClientKind,
    pub n_sessions: usize,
    pub n_profiles: usize,
    pub pe: Option<f64>,
    pub mo: Option<f64>,
    pub be: Option<f64>,
    pub cp: Option<f64>,
    pub receptivity_rho: Option<f64>,
    pub receptivity_p: Option<f64>,
    #[serde(default)]
    pub receptivity_degenerate: bool,
    pub avg_receptivity: Option<MeanStd>,
    pub k: usize,
    pub mr_at_k: f64,
    pub avg_ms: Option<f64>,
    pub avg_ms_all: Option<f64>,
    pub act_kl: Option<f64>,
    #[serde(default)]
    pub act_kl_per_state: BTreeMap<StateOfChange, f64>,
    pub length_histogram: BTreeMap<usize, usize>,
    pub avg_length: Option<MeanStd>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rouge: Option<RougeScores>,
}

impl EvaluationReport {
    /// Violated range invariants (empty when sound).
    pub fn check(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.act_kl.is_some_and(|d| d.is_nan() || d < 0.0) {
            out.push("act_kl must be nonnegative".into());
        }
        if self
            .receptivity_rho
            .is_some_and(|r| !(-1.0..=1.0).contains(&r))
        {
            out.push("receptivity_rho must lie in [-1,1]".into());
        }
        if !(0.0..=1.0).contains(&self.mr_at_k) {
            out.push("mr_at_k must lie in [0,1]".into());
        }
        for v in [self.pe, self.mo, self.be, self.cp].into_iter().flatten() {
            if !(0.0..=100.0).contains(&v) {
                out.push("consistency percentages must lie in [0,100]".into());
            }
        }
        out
    }
}

pub fn build_report(
    client: ClientKind,
    evidence: &[SessionEvidence],
    reference: &CorpusBundle,
    opts: ReportOptions,
) -> Result<EvaluationReport, EvalError> {
    if evidence.is_empty() {
        return Err(EvalError::EmptyInput("sessions"));
    }
    let rows: Vec<SessionConsistency> = evidence
        .iter()
        .filter_map(|e| e.consistency.clone())
        .collect();
    let cons = aggregate_consistency(&rows);

    let pairs: Vec<(f64, f64)> = evidence
        .iter()
        .filter_map(|e| {
            e.annotated_receptivity
                .map(|a| (f64::from(e.truth_receptivity.score()), f64::from(a.score())))
        })
        .collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    let sp = if pairs.len() >= 3 {
        Some(spearman_with(&xs, &ys, opts.permutations, opts.seed)?)
    } else {
        None
    };

    let obs: Vec<MotivationObservation> = evidence
        .iter()
        .map(|e| {
            let mut states: Vec<(usize, StateOfChange)> = e
                .utterances
                .iter()
                .map(|u| (u.turn_index, u.state))
                .collect();
            states.sort_by_key(|(i, _)| *i);
            MotivationObservation::from_states(&states, e.n_turns)
        })
        .collect();
    let mm = motivation_metrics(&obs, opts.k);

    let mut counts = ActionCounts::new();
    let mut per_state: BTreeMap<StateOfChange, ActionCounts> = BTreeMap::new();
    for u in evidence.iter().flat_map(|e| &e.utterances) {
        *counts.entry(u.action).or_insert(0) += 1;
        *per_state
            .entry(u.state)
            .or_default()
            .entry(u.action)
            .or_insert(0) += 1;
    }
    let act_kl = match action_kl(&counts, &reference.stats.action_counts, opts.epsilon) {
        Ok(d) => Some(d),
        Err(EvalError::EmptyInput(_)) => None,
        Err(e) => return Err(e),
    };

    let mut length_histogram = BTreeMap::new();
    for e in evidence {
        *length_histogram
            .entry(length_bucket(e.n_turns))
            .or_insert(0) += 1;
    }
    let lengths: Vec<f64> = evidence.iter().map(|e| e.n_turns as f64).collect();
    let recs: Vec<f64> = ys.clone();
    let n_profiles = evidence
        .iter()
        .map(|e| e.profile_id.as_str())
        .collect::<alloc::collections::BTreeSet<_>>()
        .len();

    Ok(EvaluationReport {
        client,
        n_sessions: evidence.len(),
        n_profiles,
        pe: cons.map(|c| c.pe),
        mo: cons.map(|c| c.mo),
        be: cons.map(|c| c.be),
        cp: cons.map(|c| c.cp),
        receptivity_rho: sp.map(|s| s.rho),
        receptivity_p: sp.map(|s| s.p_value),
        receptivity_degenerate: sp.is_some_and(|s| s.degenerate),
        avg_receptivity: MeanStd::of(&recs),
        k: mm.k,
        mr_at_k: mm.mr_at_k,
        avg_ms: mm.avg_ms,
        avg_ms_all: mm.avg_ms_all,
        act_kl,
        act_kl_per_state: per_state_kl(&per_state, &reference.table, opts.epsilon),
        length_histogram,
        avg_length: MeanStd::of(&lengths),
        rouge: None,
    })
}
