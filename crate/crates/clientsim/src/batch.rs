//! Bounded worker pool and the batch session runner.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use anyhow::bail;
use clientsim_core::corpus::EmpiricalActionTable;
use clientsim_core::orchestrator::{
    session_id, simulate_session, BatchSpec, SessionBackends, SessionFailure, SessionOutcome,
    TurnLog,
};
use clientsim_core::prompts::ModeratorExample;
use clientsim_core::{SessionTranscript, Turn};
use serde::{Deserialize, Serialize};

use crate::backend::BackendFactory;
use crate::io::write_jsonl;

/// Applies `f` to every item on up to `workers` threads; results keep the
/// input order.
pub fn ordered_map<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync,
{
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers.clamp(1, items.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= items.len() {
                    break;
                }
                let r = f(i, &items[i]);
                slots.lock().expect("result slots")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("result slots")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct BatchOptions {
    pub workers: usize,
    /// Exemplar transcripts for the example-based client, by profile id.
    pub exemplars: BTreeMap<String, Vec<Turn>>,
    /// Used when a profile has no exemplar of its own.
    pub default_exemplar: Option<Vec<Turn>>,
    pub moderator_examples: Vec<ModeratorExample>,
    /// Judge decisions per client turn, one JSON line each.
    pub trace_log: Option<PathBuf>,
    pub quiet: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub output_path: PathBuf,
    pub sessions_written: usize,
    pub failures_path: Option<PathBuf>,
    pub failures: Vec<SessionFailure>,
}

#[derive(Serialize)]
struct TraceLine<'a> {
    session_id: &'a str,
    #[serde(flatten)]
    log: &'a TurnLog,
}

pub fn failures_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".failures.jsonl");
    PathBuf::from(s)
}

/// Runs every session of `spec`, writing completed transcripts to
/// `spec.output_path` in (profile, session index) order.
pub fn run_batch(
    spec: &BatchSpec,
    factory: &BackendFactory,
    table: Arc<EmpiricalActionTable>,
    opts: &BatchOptions,
) -> anyhow::Result<BatchSummary> {
    let problems = spec.validate();
    if !problems.is_empty() {
        bail!("invalid batch: {}", problems.join("; "));
    }
    let jobs = spec.jobs();
    let total = jobs.len();
    let done = AtomicUsize::new(0);
    let outcomes: Vec<Result<SessionOutcome, SessionFailure>> =
        ordered_map(&jobs, opts.workers.max(1), |_, (p, s)| {
            let profile = &spec.profiles[*p];
            let backend = factory.create();
            let exemplar = opts
                .exemplars
                .get(&profile.id)
                .or(opts.default_exemplar.as_ref())
                .map(Vec::as_slice);
            let result = simulate_session(
                profile,
                spec.strategy,
                *s,
                &spec.config,
                &table,
                exemplar,
                SessionBackends::shared(backend.as_ref()),
                &opts.moderator_examples,
            );
            let n = done.fetch_add(1, Ordering::SeqCst) + 1;
            let id = session_id(&profile.id, spec.strategy, *s);
            match result {
                Ok(o) => {
                    if !opts.quiet {
                        eprintln!(
                            "[{n}/{total}] {id}: {} turns, {:?}",
                            o.transcript.turns.len(),
                            o.transcript.end_reason
                        );
                    }
                    match &o.error {
                        None => Ok(o),
                        Some(err) => Err(SessionFailure {
                            session_id: id,
                            profile_id: profile.id.clone(),
                            session_index: *s,
                            turns_completed: o.transcript.turns.len(),
                            error: err.clone(),
                        }),
                    }
                }
                Err(e) => {
                    if !opts.quiet {
                        eprintln!("[{n}/{total}] {id}: failed: {e}");
                    }
                    Err(SessionFailure {
                        session_id: id,
                        profile_id: profile.id.clone(),
                        session_index: *s,
                        turns_completed: 0,
                        error: e.to_string(),
                    })
                }
            }
        });

    let out = PathBuf::from(&spec.output_path);
    let transcripts: Vec<&SessionTranscript> = outcomes
        .iter()
        .filter_map(|r| r.as_ref().ok())
        .map(|o| &o.transcript)
        .collect();
    let sessions_written = write_jsonl(&out, transcripts)?;
    let failures: Vec<SessionFailure> = outcomes
        .iter()
        .filter_map(|r| r.as_ref().err().cloned())
        .collect();
    let fpath = failures_path(&out);
    let failures_path = if failures.is_empty() {
        let _ = std::fs::remove_file(&fpath);
        None
    } else {
        write_jsonl(&fpath, &failures)?;
        Some(fpath)
    };
    if let Some(path) = &opts.trace_log {
        let lines: Vec<TraceLine> = outcomes
            .iter()
            .filter_map(|r| r.as_ref().ok())
            .flat_map(|o| {
                o.logs.iter().map(|log| TraceLine {
                    session_id: &o.transcript.id,
                    log,
                })
            })
            .collect();
        write_jsonl(path, &lines)?;
    }
    Ok(BatchSummary {
        output_path: out,
        sessions_written,
        failures_path,
        failures,
    })
}
