//! Automated metrics: profile consistency, receptivity correlation, action
//! divergence, motivation timing, length statistics and ROUGE.

pub mod consistency;
pub mod kl;
pub mod motivation;
pub mod report;
pub mod rouge;
pub mod spearman;
pub mod turn_level;

pub use consistency::{aggregate_consistency, ComponentScores, SessionConsistency};
pub use kl::{action_kl, kl_divergence, per_state_kl, smoothed_over};
pub use motivation::{motivation_metrics, MotivationMetrics, MotivationObservation};
pub use report::{
    build_report, gather_evidence, EvaluationReport, EvidenceOptions, MeanStd, ReportOptions,
    SessionEvidence,
};
pub use rouge::{rouge_scores, RougeScores};
pub use spearman::{spearman, spearman_with, SpearmanResult};
pub use turn_level::{turn_level_eval, TurnLevelCase, TurnLevelReport};

use crate::annotation::AnnotationError;
use crate::baseline::StrategyError;
use crate::engine::EngineError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least 3 observations, got {0}")]
    TooFew(usize),
    #[error("no {0} to evaluate")]
    EmptyInput(&'static str),
    #[error(transparent)]
    Annotation(#[from] AnnotationError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}
