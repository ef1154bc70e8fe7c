//! Annotation, corpus building and evaluation over files.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use clientsim_core::annotation::{annotate_session, AnnotatedSession, Judge};
use clientsim_core::corpus::CorpusBundle;
use clientsim_core::eval::{
    build_report, gather_evidence, turn_level_eval, EvaluationReport, EvidenceOptions,
    ReportOptions, SessionEvidence, TurnLevelCase, TurnLevelReport,
};
use clientsim_core::transcript::ClientKind;
use clientsim_core::{ClientProfile, SessionTranscript, SimulationConfig, StateOfChange, Turn};
use serde::{Deserialize, Serialize};

use crate::backend::BackendFactory;
use crate::batch::ordered_map;

/// A transcript awaiting annotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSession {
    pub id: String,
    pub turns: Vec<Turn>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationFailure {
    pub id: String,
    pub error: String,
}

fn judge<'a>(
    backend: &'a dyn clientsim_core::gateway::ChatBackend,
    config: &SimulationConfig,
) -> Judge<'a> {
    Judge {
        backend,
        params: config.judge_params(),
        max_retries: config.max_retries,
    }
}

pub fn annotate_all(
    sessions: &[RawSession],
    factory: &BackendFactory,
    config: &SimulationConfig,
    workers: usize,
) -> (Vec<AnnotatedSession>, Vec<AnnotationFailure>) {
    let results = ordered_map(sessions, workers, |_, s| {
        let backend = factory.create();
        annotate_session(&s.id, &s.turns, judge(backend.as_ref(), config)).map_err(|e| {
            AnnotationFailure {
                id: s.id.clone(),
                error: e.to_string(),
            }
        })
    });
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for r in results {
        match r {
            Ok(a) => ok.push(a),
            Err(f) => failed.push(f),
        }
    }
    (ok, failed)
}

/// Reports for one evaluation run, keyed for the service by `batch_id`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationBatch {
    pub batch_id: String,
    pub reports: Vec<EvaluationReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub turn_level: Vec<TurnLevelReport>,
}

#[derive(Debug, Clone, Default)]
pub struct EvaluateOptions {
    pub evidence: EvidenceOptions,
    pub report: ReportOptions,
    pub workers: usize,
    /// Real annotated sessions for turn-level ROUGE.
    pub turn_level: Option<Vec<AnnotatedSession>>,
    /// Also score the framework with ground-truth labels injected.
    pub oracle: bool,
}

/// Scores every client kind present in `runs`.
pub fn evaluate(
    batch_id: &str,
    runs: &[SessionTranscript],
    profiles: &[ClientProfile],
    corpus: &CorpusBundle,
    factory: &BackendFactory,
    config: &SimulationConfig,
    opts: &EvaluateOptions,
) -> anyhow::Result<(EvaluationBatch, BTreeMap<ClientKind, Vec<SessionEvidence>>)> {
    let by_id: BTreeMap<&str, &ClientProfile> =
        profiles.iter().map(|p| (p.id.as_str(), p)).collect();
    for r in runs {
        if !by_id.contains_key(r.profile_id.as_str()) {
            return Err(anyhow!(
                "session {} refers to unknown profile {}",
                r.id,
                r.profile_id
            ));
        }
    }
    let evidence: Vec<anyhow::Result<SessionEvidence>> =
        ordered_map(runs, opts.workers.max(1), |_, r| {
            let backend = factory.create();
            let truth = by_id[r.profile_id.as_str()];
            gather_evidence(r, truth, judge(backend.as_ref(), config), opts.evidence)
                .with_context(|| format!("evaluating {}", r.id))
        });
    let mut grouped: BTreeMap<ClientKind, Vec<SessionEvidence>> = BTreeMap::new();
    for (r, e) in runs.iter().zip(evidence) {
        grouped.entry(r.client).or_default().push(e?);
    }

    let table = Arc::new(corpus.table.clone());
    let cases = opts
        .turn_level
        .as_deref()
        .map(turn_level_cases)
        .unwrap_or_default();
    let mut reports = Vec::new();
    let mut turn_level = Vec::new();
    for (kind, ev) in &grouped {
        let mut report = build_report(*kind, ev, corpus, opts.report)?;
        if !cases.is_empty() {
            let backend = factory.create();
            let t = turn_level_eval(
                &cases,
                *kind,
                false,
                config,
                &table,
                backend.as_ref(),
                backend.as_ref(),
            )?;
            report.rouge = t.mean;
            turn_level.push(t);
            if opts.oracle && *kind == ClientKind::Framework {
                let backend = factory.create();
                turn_level.push(turn_level_eval(
                    &cases,
                    *kind,
                    true,
                    config,
                    &table,
                    backend.as_ref(),
                    backend.as_ref(),
                )?);
            }
        }
        reports.push(report);
    }
    Ok((
        EvaluationBatch {
            batch_id: batch_id.to_string(),
            reports,
            turn_level,
        },
        grouped,
    ))
}

/// Real sessions with an extracted profile, each paired with the next
/// session as its exemplar.
pub fn turn_level_cases(sessions: &[AnnotatedSession]) -> Vec<TurnLevelCase> {
    let usable: Vec<&AnnotatedSession> = sessions
        .iter()
        .filter(|s| s.extracted_profile.is_some())
        .collect();
    usable
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let states: Vec<StateOfChange> = s.utterances.iter().map(|u| u.state).collect();
            let initial = states
                .first()
                .copied()
                .unwrap_or(StateOfChange::Precontemplation);
            let last = states.iter().copied().max().unwrap_or(initial);
            let profile = s.extracted_profile.clone().expect("filtered").into_profile(
                s.id.clone(),
                s.receptivity_final,
                initial,
                last,
            );
            let exemplar = (usable.len() > 1).then(|| usable[(i + 1) % usable.len()].turns.clone());
            TurnLevelCase {
                id: s.id.clone(),
                profile,
                turns: s.turns.clone(),
                utterances: s.utterances.clone(),
                exemplar,
            }
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct ProfileRow<'a> {
    client: &'a str,
    profile_id: &'a str,
    sessions: usize,
    pe: f64,
    mo: f64,
    be: f64,
    cp: f64,
    avg_turns: f64,
    motivated_sessions: usize,
}

/// One CSV row per (client, profile).
pub fn write_profile_csv(
    path: &Path,
    evidence: &BTreeMap<ClientKind, Vec<SessionEvidence>>,
) -> anyhow::Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for (kind, ev) in evidence {
        let mut by_profile: BTreeMap<&str, Vec<&SessionEvidence>> = BTreeMap::new();
        for e in ev {
            by_profile.entry(e.profile_id.as_str()).or_default().push(e);
        }
        for (pid, rows) in by_profile {
            let n = rows.len() as f64;
            let pct = |c: usize| {
                100.0
                    * rows
                        .iter()
                        .filter(|r| r.consistency.as_ref().is_some_and(|x| x.entailed[c]))
                        .count() as f64
                    / n
            };
            w.serialize(ProfileRow {
                client: kind.flag(),
                profile_id: pid,
                sessions: rows.len(),
                pe: pct(0),
                mo: pct(1),
                be: pct(2),
                cp: pct(3),
                avg_turns: rows.iter().map(|r| r.n_turns as f64).sum::<f64>() / n,
                motivated_sessions: rows
                    .iter()
                    .filter(|r| {
                        r.utterances
                            .iter()
                            .any(|u| u.state >= StateOfChange::Contemplation)
                    })
                    .count(),
            })?;
        }
    }
    w.flush()?;
    Ok(())
}
