//! One PASS/FAIL line per acceptance criterion. Exits nonzero if any fail.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use clientsim::io::read_jsonl;
use clientsim_core::annotation::floor_mean;
use clientsim_core::baseline::BaselineInput;
use clientsim_core::corpus::EmpiricalActionTable;
use clientsim_core::distribution::sample_action_count;
use clientsim_core::engine::{ClientEngine, JudgeCheck, StepOverride};
use clientsim_core::eval::spearman::spearman_with;
use clientsim_core::eval::{
    action_kl, kl_divergence, motivation_metrics, rouge_scores, MotivationObservation,
};
use clientsim_core::gateway::{Role, ScriptedBackend, ScriptedFixture, SyntheticBackend};
use clientsim_core::prompts::{self, default_moderator_examples, render_moderator_examples};
use clientsim_core::{
    candidate_actions, ActionDistribution, ActionKind, ClientProfile, ClientTrace,
    ReceptivityLevel, SessionTranscript, SimulationConfig, StateOfChange, Turn,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ROOT: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../..");
const STATES: [StateOfChange; 4] = StateOfChange::ALL;
const ACTIVE: [StateOfChange; 3] = [
    StateOfChange::Precontemplation,
    StateOfChange::Contemplation,
    StateOfChange::Preparation,
];

type Outcome = Result<String, String>;
type Check = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let t = start.elapsed();
    ensure(t < limit, format!("took {t:.2?}, limit {limit:?}"))
}

fn random_distribution(state: StateOfChange, rng: &mut ChaCha8Rng) -> ActionDistribution {
    let cands = candidate_actions(state);
    ActionDistribution::from_weights(cands.iter().map(|a| (*a, rng.random_range(1e-3..1.0))))
        .unwrap()
}

fn merge_law() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_mean = 0.0f64;
    let mut worst_sum = 0.0f64;
    for state in ACTIVE {
        for _ in 0..1000 {
            let p = random_distribution(state, &mut rng);
            let q = random_distribution(state, &mut rng);
            let m = p.merge(&q).map_err(|e| e.to_string())?;
            for a in candidate_actions(state) {
                worst_mean = worst_mean.max((m.prob(*a) - (p.prob(*a) + q.prob(*a)) / 2.0).abs());
            }
            worst_sum = worst_sum.max((m.total() - 1.0).abs());
        }
    }
    ensure(worst_mean <= 1e-12, format!("mean error {worst_mean:e}"))?;
    ensure(worst_sum <= 1e-9, format!("sum error {worst_sum:e}"))?;
    within(start, Duration::from_secs(1))?;
    Ok(format!(
        "3x1000 pairs, max |merged - mean| = {worst_mean:.1e}, max |sum - 1| = {worst_sum:.1e}"
    ))
}

fn sampling_law() -> Outcome {
    let start = Instant::now();
    let n = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let dist = ActionDistribution::from_weights([
        (ActionKind::Inform, 0.35),
        (ActionKind::Engage, 0.25),
        (ActionKind::Hesitate, 0.2),
        (ActionKind::Doubt, 0.12),
        (ActionKind::Acknowledge, 0.08),
    ])
    .unwrap();
    let mut counts: BTreeMap<ActionKind, usize> = BTreeMap::new();
    for _ in 0..n {
        *counts.entry(dist.sample(&mut rng)).or_default() += 1;
    }
    let l1: f64 = dist
        .iter()
        .map(|(a, p)| (counts.get(&a).copied().unwrap_or(0) as f64 / n as f64 - p).abs())
        .sum();
    ensure(l1 < 0.02, format!("L1 = {l1:.4}"))?;
    let weights = SimulationConfig::default().multi_action_weights;
    let mut k = [0usize; 3];
    for _ in 0..n {
        k[sample_action_count(&weights, &mut rng) - 1] += 1;
    }
    let freq: Vec<f64> = k.iter().map(|c| *c as f64 / n as f64).collect();
    for (f, w) in freq.iter().zip([0.89, 0.10, 0.01]) {
        ensure((f - w).abs() <= 0.01, format!("count frequencies {freq:?}"))?;
    }
    within(start, Duration::from_secs(10))?;
    Ok(format!(
        "L1 = {l1:.4}, k-frequencies = ({:.4}, {:.4}, {:.4})",
        freq[0], freq[1], freq[2]
    ))
}

/// A random but valid profile; some have no plans and some no beliefs.
fn random_profile(i: usize, rng: &mut ChaCha8Rng) -> ClientProfile {
    let mut items = |label: &str, lo: usize, hi: usize| -> Vec<String> {
        let n = rng.random_range(lo..=hi);
        (0..n)
            .map(|j| format!("{label} {j} of profile {i}."))
            .collect()
    };
    let personas = items("Persona", 1, 4);
    let beliefs = items("Belief", 0, 3);
    let motivations = items("Motivation", 1, 2);
    let acceptable_plans = items("Plan", 0, 2);
    let init = rng.random_range(0..3);
    let fin = rng.random_range(init..4);
    ClientProfile {
        id: format!("acc-{i}"),
        behavior_problem: "Smoking".into(),
        personas,
        beliefs,
        motivations,
        acceptable_plans,
        receptivity: ReceptivityLevel::new(rng.random_range(1..=5)).unwrap(),
        initial_state: STATES[init],
        final_state: STATES[fin],
    }
}

struct Session {
    profile: ClientProfile,
    /// Client traces in order, each with the judge log of the step that produced it.
    turns: Vec<(ClientTrace, Vec<JudgeCheck>)>,
}

fn run_sessions(n: usize, relapse: bool, seed: u64) -> Result<Vec<Session>, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let table = Arc::new(EmpiricalActionTable::new());
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let profile = random_profile(i, &mut rng);
        let config = SimulationConfig {
            rng_seed: rng.random(),
            relapse_enabled: relapse,
            multi_action_enabled: i % 2 == 1,
            ..SimulationConfig::default()
        };
        let backend = SyntheticBackend::new(rng.random());
        let mut engine = ClientEngine::new(profile.clone(), config.clone(), table.clone())
            .map_err(|e| e.to_string())?;
        let mut turns = vec![(engine.open_session().trace, Vec::new())];
        for t in 0..(config.max_turns / 2 - 1) {
            if engine.is_terminated() {
                break;
            }
            let step = engine
                .client_step(&format!("Counselor turn {t}."), &backend, &backend)
                .map_err(|e| format!("session {i}: {e}"))?;
            turns.push((step.trace, step.checks));
        }
        out.push(Session { profile, turns });
    }
    Ok(out)
}

fn monotonicity() -> Outcome {
    let plain = run_sessions(500, false, 7)?;
    for (i, s) in plain.iter().enumerate() {
        ensure(
            s.turns.windows(2).all(|w| w[0].0.state <= w[1].0.state),
            format!("session {i} decreases without relapse"),
        )?;
    }
    let mut eligible = 0usize;
    let mut relapses = 0usize;
    let mut sessions = 0;
    let mut seed = 8;
    while eligible < 10_000 || sessions < 500 {
        let batch = run_sessions(500, true, seed)?;
        seed += 1;
        sessions += batch.len();
        for s in &batch {
            for w in s.turns.windows(2) {
                let (prev, cur) = (w[0].0.state, w[1].0.state);
                let relapsed = w[1]
                    .1
                    .iter()
                    .any(|c| matches!(c, JudgeCheck::Relapse { .. }));
                if cur < prev {
                    ensure(relapsed, "decrease without a relapse draw")?;
                    ensure(
                        cur.index() + 1 == prev.index(),
                        format!("{prev:?} -> {cur:?} skips a state"),
                    )?;
                }
                if matches!(
                    prev,
                    StateOfChange::Contemplation | StateOfChange::Preparation
                ) {
                    eligible += 1;
                    relapses += relapsed as usize;
                } else {
                    ensure(!relapsed, format!("relapse from {prev:?}"))?;
                }
            }
        }
    }
    let rate = relapses as f64 / eligible as f64;
    ensure(
        (rate - 0.30).abs() <= 0.02,
        format!("relapse rate {rate:.4} over {eligible} eligible turns"),
    )?;
    Ok(format!(
        "500 sessions nondecreasing; relapse rate {rate:.4} over {eligible} eligible turns in {sessions} sessions"
    ))
}

fn gating() -> Outcome {
    let mut counts = [0usize; 3];
    for relapse in [false, true] {
        for (i, s) in run_sessions(500, relapse, 11 + relapse as u64)?
            .iter()
            .enumerate()
        {
            let threshold = SimulationConfig::default().motivation_threshold;
            let mut latched = vec![false; s.profile.beliefs.len()];
            let mut entailed = false;
            let mut seen_motivation = false;
            for w in s.turns.windows(2) {
                let (prev, (cur, checks)) = (w[0].0.state, &w[1]);
                let hit = checks.iter().any(
                    |c| matches!(c, JudgeCheck::Motivation { score, .. } if *score >= threshold),
                );
                for c in checks {
                    match c {
                        JudgeCheck::Belief { index, score } if *score >= 0.5 => {
                            latched[*index] = true
                        }
                        JudgeCheck::Plan { entailed: true, .. } => entailed = true,
                        _ => {}
                    }
                }
                if prev == StateOfChange::Precontemplation {
                    // the first hit moves the client on, and only a hit does
                    if !seen_motivation {
                        ensure(
                            hit == (cur.state == StateOfChange::Contemplation),
                            format!("session {i}: motivation gate"),
                        )?;
                    }
                    if cur.state == StateOfChange::Contemplation {
                        ensure(
                            hit,
                            format!("session {i}: Contemplation without a motivation hit"),
                        )?;
                        counts[0] += 1;
                    }
                }
                seen_motivation |= hit;
                if prev < StateOfChange::Preparation && cur.state == StateOfChange::Preparation {
                    ensure(
                        latched.iter().all(|b| *b),
                        format!("session {i}: Preparation with a belief open"),
                    )?;
                    counts[1] += 1;
                }
                if prev < StateOfChange::Termination && cur.state == StateOfChange::Termination {
                    ensure(
                        entailed,
                        format!("session {i}: Termination without an entailed plan"),
                    )?;
                    ensure(
                        !s.profile.acceptable_plans.is_empty(),
                        format!("session {i}: terminated without plans"),
                    )?;
                    counts[2] += 1;
                }
            }
        }
    }
    ensure(
        counts.iter().all(|c| *c > 0),
        format!("some gate never exercised: {counts:?}"),
    )?;
    Ok(format!(
        "1000 sessions; gates exercised: {} to Contemplation, {} to Preparation, {} to Termination",
        counts[0], counts[1], counts[2]
    ))
}

fn disclosure() -> Outcome {
    let sessions = run_sessions(500, true, 21)?;
    let mut disclosed = 0;
    for (i, s) in sessions.iter().enumerate() {
        let mut seen = BTreeSet::new();
        for (trace, _) in &s.turns {
            for info in &trace.selected_info {
                ensure(
                    seen.insert(info.item),
                    format!("session {i}: {} disclosed twice", info.item),
                )?;
                ensure(
                    s.profile.item(info.item) == Some(info.text.as_str()),
                    format!("session {i}: {} text is not verbatim", info.item),
                )?;
                disclosed += 1;
            }
        }
    }
    Ok(format!(
        "500 sessions, {disclosed} disclosures, no repeats, all verbatim"
    ))
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|a, b| xs[*a].total_cmp(&xs[*b]));
    let mut r = vec![0.0; xs.len()];
    for (rank, i) in idx.into_iter().enumerate() {
        r[i] = rank as f64 + 1.0;
    }
    r
}

fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_rho = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(3..40);
        let xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let (rx, ry) = (ranks(&xs), ranks(&ys));
        let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b).powi(2)).sum();
        let nf = n as f64;
        let closed = 1.0 - 6.0 * d2 / (nf * (nf * nf - 1.0));
        let got = spearman_with(&xs, &ys, 0, 0)
            .map_err(|e| e.to_string())?
            .rho;
        worst_rho = worst_rho.max((got - closed).abs());
    }
    ensure(worst_rho <= 1e-12, format!("spearman error {worst_rho:e}"))?;

    let mut worst_self = 0.0f64;
    let mut min_kl = f64::INFINITY;
    for _ in 0..1000 {
        let mut counts = || -> BTreeMap<ActionKind, u64> {
            ActionKind::ALL
                .iter()
                .map(|a| (*a, rng.random_range(0..30u64) + 1))
                .collect()
        };
        let (p, q) = (counts(), counts());
        worst_self = worst_self.max(action_kl(&p, &p, 1e-6).map_err(|e| e.to_string())?.abs());
        min_kl = min_kl.min(action_kl(&p, &q, 1e-6).map_err(|e| e.to_string())?);
    }
    ensure(worst_self == 0.0, format!("KL(P,P) = {worst_self:e}"))?;
    ensure(min_kl >= 0.0, format!("negative KL {min_kl}"))?;

    let p =
        ActionDistribution::from_weights([(ActionKind::Inform, 0.5), (ActionKind::Engage, 0.5)])
            .unwrap();
    let q =
        ActionDistribution::from_weights([(ActionKind::Inform, 0.25), (ActionKind::Engage, 0.75)])
            .unwrap();
    let worked = kl_divergence(&p, &q);
    ensure(
        (worked - 0.1438).abs() <= 1e-4,
        format!("worked example {worked}"),
    )?;

    let obs: Vec<MotivationObservation> = [Some(6), Some(12), Some(30), None]
        .into_iter()
        .map(|first_turn| MotivationObservation {
            first_turn,
            session_len: 40,
        })
        .collect();
    let m = motivation_metrics(&obs, 20);
    ensure(
        m.mr_at_k == 0.5 && m.avg_ms == Some(16.0),
        format!("motivation fixture gave {m:?}"),
    )?;

    let id = rouge_scores("the cat sat on the mat", "the cat sat on the mat");
    ensure(
        (id.r1, id.r2, id.rl) == (1.0, 1.0, 1.0),
        format!("identity case {id:?}"),
    )?;
    let r = rouge_scores("the cat sat", "the cat ran");
    let want = (2.0 / 3.0, 0.5, 2.0 / 3.0);
    ensure(
        (r.r1 - want.0).abs() < 1e-9
            && (r.r2 - want.1).abs() < 1e-9
            && (r.rl - want.2).abs() < 1e-9,
        format!("hand case {r:?}"),
    )?;
    Ok(format!(
        "spearman err {worst_rho:.1e}; KL(P,P) = 0, min KL {min_kl:.3e}; worked KL {worked:.4}; MR@20 = {}, Avg MS = {}; ROUGE ({:.4}, {:.4}, {:.4})",
        m.mr_at_k,
        m.avg_ms.unwrap(),
        r.r1,
        r.r2,
        r.rl
    ))
}

fn receptivity_floor() -> Outcome {
    let start = Instant::now();
    let mut n = 0;
    for code in 0..3125usize {
        let t: Vec<u8> = (0..5u32)
            .map(|i| (code / 5usize.pow(i) % 5) as u8 + 1)
            .collect();
        let sum: usize = t.iter().map(|x| *x as usize).sum();
        let got = floor_mean(&t).ok_or("no mean")?;
        ensure(
            got as usize == sum / 5 && (1..=5).contains(&got),
            format!("{t:?} -> {got}"),
        )?;
        n += 1;
    }
    within(start, Duration::from_secs(1))?;
    Ok(format!("{n} tuples"))
}

fn simulate(out: &Path, profiles: &Path, per_profile: usize) -> Result<String, String> {
    let data = Path::new(ROOT).join("data");
    let status = Command::new(env!("CARGO_BIN_EXE_clientsim"))
        .args(["simulate", "--quiet", "--seed", "42", "--workers", "4"])
        .arg("--profiles")
        .arg(profiles)
        .arg("--per-profile")
        .arg(per_profile.to_string())
        .arg("--corpus")
        .arg(data.join("corpus.json"))
        .arg("--out")
        .arg(out)
        .arg("--backend")
        .arg(format!(
            "scripted:{}",
            data.join("scripted_backend.json").display()
        ))
        .output()
        .map_err(|e| e.to_string())?;
    ensure(
        status.status.success(),
        String::from_utf8_lossy(&status.stderr).into_owned(),
    )?;
    std::fs::read_to_string(out).map_err(|e| e.to_string())
}

fn orchestration() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let all = Path::new(ROOT).join("data/profiles.json");
    let a = simulate(&dir.path().join("a.jsonl"), &all, 3)?;
    let b = simulate(&dir.path().join("b.jsonl"), &all, 3)?;
    ensure(a == b, "two seed-42 runs differ")?;
    let runs: Vec<SessionTranscript> =
        read_jsonl(&dir.path().join("a.jsonl")).map_err(|e| e.to_string())?;
    let longest = runs.iter().map(|t| t.turns.len()).max().unwrap_or(0);
    ensure(longest <= 100, format!("a transcript has {longest} turns"))?;
    for t in &runs {
        let v = t.check_invariants();
        ensure(v.is_empty(), format!("{}: {v:?}", t.id))?;
    }
    let two: PathBuf = dir.path().join("two.json");
    let profiles: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&all).unwrap()).unwrap();
    std::fs::write(
        &two,
        serde_json::to_string(&profiles.as_array().unwrap()[..2]).unwrap(),
    )
    .unwrap();
    let small = simulate(&dir.path().join("small.jsonl"), &two, 3)?;
    let lines = small.lines().count();
    ensure(lines == 6, format!("2x3 batch wrote {lines} lines"))?;
    Ok(format!(
        "{} sessions byte-identical across runs ({} bytes), longest {longest} turns; 2x3 batch = {lines} lines",
        runs.len(),
        a.len()
    ))
}

fn golden_fixture() -> (ClientProfile, Vec<Turn>) {
    let dir = Path::new(ROOT).join("crates/core/tests/golden");
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("fixture.json")).unwrap()).unwrap();
    let p = &v["profile"];
    let list = |k: &str| -> Vec<String> { serde_json::from_value(p[k].clone()).unwrap() };
    let profile = ClientProfile {
        id: "golden".into(),
        behavior_problem: p["behavior_problem"].as_str().unwrap().into(),
        personas: list("personas"),
        beliefs: list("beliefs"),
        motivations: list("motivations"),
        acceptable_plans: list("acceptable_plans"),
        receptivity: ReceptivityLevel::new(p["receptivity"].as_u64().unwrap() as u8).unwrap(),
        initial_state: StateOfChange::Precontemplation,
        final_state: StateOfChange::Contemplation,
    };
    let turns = v["conversation"]
        .as_str()
        .unwrap()
        .lines()
        .enumerate()
        .map(|(i, line)| match line.split_once(": ").unwrap() {
            ("Counselor", t) => Turn::counselor(i, t),
            (_, t) => Turn::client(i, t, None),
        })
        .collect();
    (profile, turns)
}

fn golden_prompts() -> Outcome {
    let dir = Path::new(ROOT).join("crates/core/tests/golden");
    let (profile, turns) = golden_fixture();
    let conv = prompts::render_conversation(&turns);
    let last = turns.last().unwrap().line();
    let hyp = prompts::render_component("Motivation", &profile.motivations).unwrap();
    let ex = render_moderator_examples(&default_moderator_examples());
    let pre = candidate_actions(StateOfChange::Precontemplation);
    let rendered: Vec<(&str, String)> = vec![
        ("counselor_system", prompts::render_counselor_system()),
        ("moderator", prompts::render_moderator(&ex, &conv).unwrap()),
        (
            "annotate_profile",
            prompts::render_annotate_profile(&conv).unwrap(),
        ),
        (
            "annotate_state",
            prompts::render_annotate_state(&conv).unwrap(),
        ),
        (
            "annotate_action",
            prompts::render_annotate_action(pre, &conv, &last).unwrap(),
        ),
        (
            "annotate_receptivity",
            prompts::render_annotate_receptivity(&conv).unwrap(),
        ),
        (
            "entailment",
            prompts::render_entailment(&prompts::render_profile(&profile), &hyp).unwrap(),
        ),
        (
            "baseline_base",
            BaselineInput::BehaviorProblem(profile.behavior_problem.clone())
                .system_prompt()
                .unwrap(),
        ),
        (
            "baseline_example",
            BaselineInput::Exemplar(turns.clone())
                .system_prompt()
                .unwrap(),
        ),
        (
            "baseline_profile",
            BaselineInput::Profile(profile.clone())
                .system_prompt()
                .unwrap(),
        ),
        (
            "baseline_proact",
            BaselineInput::ProfileWithActions(profile.clone())
                .system_prompt()
                .unwrap(),
        ),
    ];
    let mismatched: Vec<&str> = rendered
        .iter()
        .filter(|(name, text)| {
            std::fs::read_to_string(dir.join(format!("{name}.txt")))
                .ok()
                .as_deref()
                != Some(text.as_str())
        })
        .map(|(name, _)| *name)
        .collect();
    ensure(mismatched.is_empty(), format!("mismatched: {mismatched:?}"))?;
    Ok(format!("{} prompts byte-identical", rendered.len()))
}

#[derive(serde::Deserialize)]
struct Case {
    profile: ClientProfile,
    counselor: Vec<String>,
    actions: Vec<Vec<ActionKind>>,
    backend: ScriptedFixture,
    expected_instructions: Vec<String>,
}

fn case_replay() -> Outcome {
    let text = std::fs::read_to_string(Path::new(ROOT).join("data/case_replay.json"))
        .map_err(|e| e.to_string())?;
    let case: Case = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let backend = ScriptedBackend::new(case.backend.clone());
    let mut engine = ClientEngine::new(
        case.profile.clone(),
        SimulationConfig::default(),
        Arc::new(EmpiricalActionTable::new()),
    )
    .map_err(|e| e.to_string())?;
    engine.open_session();
    for (utt, actions) in case.counselor.iter().zip(&case.actions) {
        let ov = StepOverride {
            actions: Some(actions.clone()),
            ..StepOverride::default()
        };
        engine
            .client_step_with(utt, &backend, &backend, &ov)
            .map_err(|e| e.to_string())?;
    }
    let got: Vec<&str> = engine
        .chat()
        .messages()
        .iter()
        .filter(|m| m.role == Role::User)
        .filter_map(|m| m.content.rfind("[State: ").map(|i| &m.content[i..]))
        .collect();
    ensure(
        got.len() == case.expected_instructions.len(),
        format!(
            "{} instructions, want {}",
            got.len(),
            case.expected_instructions.len()
        ),
    )?;
    for (i, (g, w)) in got.iter().zip(&case.expected_instructions).enumerate() {
        ensure(g == w, format!("client turn {i}: got {g}"))?;
    }
    Ok(format!("{} instructions match turn for turn", got.len()))
}

fn main() {
    let checks: [Check; 10] = [
        ("distribution merge", merge_law),
        ("sampling law", sampling_law),
        ("state-machine monotonicity", monotonicity),
        ("transition gating", gating),
        ("disclosure ledger", disclosure),
        ("metric oracles", metric_oracles),
        ("receptivity flooring", receptivity_floor),
        ("orchestration determinism", orchestration),
        ("golden prompts", golden_prompts),
        ("case replay", case_replay),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let start = Instant::now();
        match check() {
            Ok(detail) => println!("PASS {name}: {detail} [{:.2?}]", start.elapsed()),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why} [{:.2?}]", start.elapsed());
            }
        }
    }
    println!(
        "{} of {} acceptance criteria passed",
        checks.len() - failed,
        checks.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
