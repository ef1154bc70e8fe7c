use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use clientsim::annomi::load_annomi;
use clientsim::backend::BackendFactory;
use clientsim::batch::{run_batch, BatchOptions};
use clientsim::io::{read_json, read_jsonl, read_profiles, write_json, write_jsonl};
use clientsim::pipeline::{annotate_all, evaluate, write_profile_csv, EvaluateOptions, RawSession};
use clientsim::service::{serve, AppState, ServiceOptions};
use clientsim_core::annotation::AnnotatedSession;
use clientsim_core::corpus::CorpusBundle;
use clientsim_core::eval::{EvidenceOptions, ReportOptions};
use clientsim_core::orchestrator::BatchSpec;
use clientsim_core::prompts::default_moderator_examples;
use clientsim_core::transcript::ClientKind;
use clientsim_core::{SessionTranscript, SimulationConfig};

#[derive(Parser)]
#[command(
    name = "clientsim",
    version,
    about = "Simulated counseling clients: run, annotate, evaluate, serve"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct BackendArgs {
    /// `scripted:<fixture.json>` or an OpenAI-compatible base URL.
    #[arg(long, env = "CLIENTSIM_BACKEND")]
    backend: String,
    #[arg(long, env = "CLIENTSIM_MODEL")]
    model: Option<String>,
    /// Per-request timeout in seconds.
    #[arg(long, default_value_t = 120)]
    timeout: u64,
    /// Shared request budget per second.
    #[arg(long, default_value_t = 5.0)]
    rps: f64,
}

impl BackendArgs {
    fn factory(&self) -> anyhow::Result<BackendFactory> {
        BackendFactory::from_spec(&self.backend, self.model.as_deref(), self.timeout, self.rps)
    }
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// JSON file with simulation settings; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    max_turns: Option<usize>,
    #[arg(long)]
    relapse: bool,
    #[arg(long)]
    multi_action: bool,
}

impl ConfigArgs {
    fn load(&self) -> anyhow::Result<SimulationConfig> {
        let mut c: SimulationConfig = match &self.config {
            Some(p) => read_json(p)?,
            None => SimulationConfig::default(),
        };
        if let Some(n) = self.max_turns {
            c.max_turns = n;
        }
        c.relapse_enabled |= self.relapse;
        c.multi_action_enabled |= self.multi_action;
        let problems = c.validate();
        if !problems.is_empty() {
            bail!("invalid config: {}", problems.join("; "));
        }
        Ok(c)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a batch of simulated sessions.
    Simulate {
        #[arg(long)]
        profiles: PathBuf,
        /// framework, base, example, profile or proact
        #[arg(long, default_value = "framework")]
        client: ClientKind,
        #[arg(long, default_value_t = 3)]
        per_profile: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Corpus bundle from `corpus build`; required for the framework client.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Real sessions (JSONL) used as exemplars, matched by profile id.
        #[arg(long)]
        exemplars: Option<PathBuf>,
        #[arg(long)]
        trace_log: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        workers: usize,
        #[arg(long)]
        quiet: bool,
        #[command(flatten)]
        backend: BackendArgs,
        #[command(flatten)]
        settings: ConfigArgs,
    },
    /// Label real sessions with states, actions, receptivity and profiles.
    Annotate {
        /// JSONL of `{id, turns}` records, or an AnnoMI CSV with --annomi.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        annomi: bool,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 4)]
        workers: usize,
        #[command(flatten)]
        backend: BackendArgs,
        #[command(flatten)]
        settings: ConfigArgs,
    },
    /// Corpus operations.
    Corpus {
        #[command(subcommand)]
        action: CorpusCommand,
    },
    /// Score simulated sessions against profiles and a reference corpus.
    Evaluate {
        /// One or more simulate outputs.
        #[arg(long, required = true, num_args = 1..)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        profiles: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "batch")]
        batch_id: String,
        /// Per-profile consistency table.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Annotated real sessions for turn-level ROUGE.
        #[arg(long)]
        turn_level: Option<PathBuf>,
        #[arg(long)]
        oracle: bool,
        #[arg(long)]
        no_consistency: bool,
        #[arg(long, default_value_t = 5)]
        receptivity_rounds: usize,
        #[arg(long, default_value_t = 20)]
        k: usize,
        #[arg(long, default_value_t = 10_000)]
        permutations: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        workers: usize,
        #[command(flatten)]
        backend: BackendArgs,
        #[command(flatten)]
        settings: ConfigArgs,
    },
    /// Run the live-practice HTTP service.
    Serve {
        #[arg(long, env = "CLIENTSIM_PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Holds profiles.json, corpus.json, reports/ and the session store.
        #[arg(long, env = "CLIENTSIM_DATA_DIR", default_value = "data")]
        data_dir: PathBuf,
        #[command(flatten)]
        backend: BackendArgs,
        #[command(flatten)]
        settings: ConfigArgs,
    },
}

#[derive(Subcommand)]
enum CorpusCommand {
    /// Build the empirical action table and corpus statistics.
    Build {
        #[arg(long)]
        annotated: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_corpus(path: Option<&Path>) -> anyhow::Result<CorpusBundle> {
    match path {
        Some(p) => read_json(p),
        None => Ok(CorpusBundle::default()),
    }
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Simulate {
            profiles,
            client,
            per_profile,
            out,
            seed,
            corpus,
            exemplars,
            trace_log,
            workers,
            quiet,
            backend,
            settings,
        } => {
            if client == ClientKind::Framework && corpus.is_none() {
                bail!("the framework client needs --corpus");
            }
            let mut config = settings.load()?;
            config.rng_seed = seed;
            let bundle = load_corpus(corpus.as_deref())?;
            let mut opts = BatchOptions {
                workers,
                moderator_examples: default_moderator_examples(),
                trace_log,
                quiet,
                ..BatchOptions::default()
            };
            if let Some(path) = exemplars {
                let sessions: Vec<RawSession> = read_jsonl(&path)?;
                opts.default_exemplar = sessions.first().map(|s| s.turns.clone());
                opts.exemplars = sessions
                    .into_iter()
                    .map(|s| (s.id, s.turns))
                    .collect::<BTreeMap<_, _>>();
            }
            let spec = BatchSpec {
                profiles: read_profiles(&profiles)?,
                sessions_per_profile: per_profile,
                strategy: client,
                config,
                output_path: out.display().to_string(),
            };
            let summary = run_batch(&spec, &backend.factory()?, Arc::new(bundle.table), &opts)?;
            println!(
                "wrote {} sessions to {}",
                summary.sessions_written,
                summary.output_path.display()
            );
            if let Some(p) = &summary.failures_path {
                println!(
                    "{} sessions failed; see {}",
                    summary.failures.len(),
                    p.display()
                );
            }
        }
        Command::Annotate {
            input,
            annomi,
            out,
            workers,
            backend,
            settings,
        } => {
            let sessions: Vec<RawSession> = if annomi {
                load_annomi(&input)?
                    .into_iter()
                    .map(|s| RawSession {
                        id: s.id,
                        turns: s.turns,
                    })
                    .collect()
            } else {
                read_jsonl(&input)?
            };
            let (ok, failed) =
                annotate_all(&sessions, &backend.factory()?, &settings.load()?, workers);
            write_jsonl(&out, &ok)?;
            for f in &failed {
                log::warn!("skipped {}: {}", f.id, f.error);
            }
            println!(
                "annotated {} sessions ({} skipped) into {}",
                ok.len(),
                failed.len(),
                out.display()
            );
        }
        Command::Corpus {
            action: CorpusCommand::Build { annotated, out },
        } => {
            let sessions: Vec<AnnotatedSession> = read_jsonl(&annotated)?;
            let bundle = CorpusBundle::build(&sessions).context("building corpus")?;
            write_json(&out, &bundle)?;
            println!(
                "corpus of {} sessions, {} labeled utterances written to {}",
                sessions.len(),
                bundle.table.total(),
                out.display()
            );
        }
        Command::Evaluate {
            runs,
            profiles,
            corpus,
            out,
            batch_id,
            csv,
            turn_level,
            oracle,
            no_consistency,
            receptivity_rounds,
            k,
            permutations,
            seed,
            workers,
            backend,
            settings,
        } => {
            let mut transcripts: Vec<SessionTranscript> = Vec::new();
            for r in &runs {
                transcripts.extend(read_jsonl::<SessionTranscript>(r)?);
            }
            let opts = EvaluateOptions {
                evidence: EvidenceOptions {
                    consistency: !no_consistency,
                    receptivity_rounds,
                },
                report: ReportOptions {
                    k,
                    permutations,
                    seed,
                    ..ReportOptions::default()
                },
                workers,
                turn_level: turn_level.as_deref().map(read_jsonl).transpose()?,
                oracle,
            };
            let (batch, evidence) = evaluate(
                &batch_id,
                &transcripts,
                &read_profiles(&profiles)?,
                &read_json(&corpus)?,
                &backend.factory()?,
                &settings.load()?,
                &opts,
            )?;
            write_json(&out, &batch)?;
            if let Some(path) = csv {
                write_profile_csv(&path, &evidence)?;
            }
            println!(
                "{} reports written to {}",
                batch.reports.len(),
                out.display()
            );
        }
        Command::Serve {
            port,
            host,
            data_dir,
            backend,
            settings,
        } => {
            let profiles_path = ["profiles.json", "profiles.jsonl"]
                .iter()
                .map(|f| data_dir.join(f))
                .find(|p| p.exists())
                .with_context(|| format!("no profiles.json in {}", data_dir.display()))?;
            let corpus_path = data_dir.join("corpus.json");
            let state = AppState::new(ServiceOptions {
                profiles: read_profiles(&profiles_path)?,
                table: load_corpus(corpus_path.exists().then_some(corpus_path.as_path()))?.table,
                factory: backend.factory()?,
                base_config: settings.load()?,
                reports_dir: Some(data_dir.join("reports")),
                store_dir: Some(data_dir.join("live")),
            })?;
            let addr = format!("{host}:{port}")
                .parse()
                .context("bad --host/--port")?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(serve(Arc::new(state), addr))?;
        }
    }
    Ok(())
}
