//! Profile-component entailment consistency (PE, MO, BE, CP).

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::annotation::{
    annotate_profile, check_entailment, AnnotationError, ExtractedProfile, Judge,
};
use crate::prompts::{component_title, render_component};
use crate::transcript::Turn;
use crate::types::{ClientProfile, InfoSource};

/// Components in report order: PE, MO, BE, CP.
pub const COMPONENTS: [InfoSource; 4] = [
    InfoSource::Personas,
    InfoSource::Motivation,
    InfoSource::Beliefs,
    InfoSource::Plans,
];

fn extracted_items(p: &ExtractedProfile, source: InfoSource) -> &[String] {
    match source {
        InfoSource::Personas => &p.personas,
        InfoSource::Beliefs => &p.beliefs,
        InfoSource::Motivation => &p.motivations,
        InfoSource::Plans => &p.acceptable_plans,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionConsistency {
    pub session_id: String,
    pub profile_id: String,
    /// Entailment per component, in [`COMPONENTS`] order.
    pub entailed: [bool; 4],
}

/// Whether the extracted component is entailed by the ground truth. An
/// empty side on either end is a negative outcome.
pub fn component_consistency(
    source: InfoSource,
    truth: &[String],
    extracted: &[String],
    judge: Judge<'_>,
) -> Result<bool, AnnotationError> {
    let title = component_title(source);
    match (
        render_component(title, truth),
        render_component(title, extracted),
    ) {
        (Some(premise), Some(hypothesis)) => check_entailment(&premise, &hypothesis, judge),
        _ => Ok(false),
    }
}

/// Scores an already-extracted profile; `None` (failed extraction) is
/// negative everywhere.
pub fn session_consistency(
    session_id: &str,
    truth: &ClientProfile,
    extracted: Option<&ExtractedProfile>,
    judge: Judge<'_>,
) -> Result<SessionConsistency, AnnotationError> {
    let mut entailed = [false; 4];
    if let Some(ex) = extracted {
        for (slot, source) in entailed.iter_mut().zip(COMPONENTS) {
            *slot = component_consistency(
                source,
                truth.items(source),
                extracted_items(ex, source),
                judge,
            )?;
        }
    }
    Ok(SessionConsistency {
        session_id: session_id.into(),
        profile_id: truth.id.clone(),
        entailed,
    })
}

/// Extracts a profile from the transcript and scores it. Only backend
/// failures are errors; unusable judge output counts as failed extraction.
pub fn extract_and_score(
    session_id: &str,
    turns: &[Turn],
    truth: &ClientProfile,
    judge: Judge<'_>,
) -> Result<SessionConsistency, AnnotationError> {
    let extracted = match annotate_profile(turns, judge) {
        Ok(p) => Some(p),
        Err(e @ AnnotationError::Gateway(_)) => return Err(e),
        Err(_) => None,
    };
    session_consistency(session_id, truth, extracted.as_ref(), judge)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentScores {
    pub pe: f64,
    pub mo: f64,
    pub be: f64,
    pub cp: f64,
}

/// Per-profile means, then the mean over profiles, as percentages.
pub fn aggregate_consistency(rows: &[SessionConsistency]) -> Option<ComponentScores> {
    let mut by_profile: BTreeMap<&str, Vec<&SessionConsistency>> = BTreeMap::new();
    for r in rows {
        by_profile.entry(r.profile_id.as_str()).or_default().push(r);
    }
    if by_profile.is_empty() {
        return None;
    }
    let mut acc = [0.0f64; 4];
    for sessions in by_profile.values() {
        for (c, slot) in acc.iter_mut().enumerate() {
            let hits = sessions.iter().filter(|s| s.entailed[c]).count();
            *slot += hits as f64 / sessions.len() as f64;
        }
    }
    let n = by_profile.len() as f64;
    let pct = |x: f64| 100.0 * x / n;
    Some(ComponentScores {
        pe: pct(acc[0]),
        mo: pct(acc[1]),
        be: pct(acc[2]),
        cp: pct(acc[3]),
    })
}
