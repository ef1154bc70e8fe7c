//! The profile-driven client: state transition, merged action sampling,
//! information disclosure, and instruction-guided generation.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::annotation::{check_entailment, AnnotationError, Judge};
use crate::config::SimulationConfig;
use crate::corpus::EmpiricalActionTable;
use crate::distribution::{sample_action_count, ActionDistribution};
use crate::gateway::{
    self, parse_percentage, parse_probability_json, ChatBackend, ChatSession, GatewayError,
    TemplateError,
};
use crate::prompts::{self, OPENER_CLIENT, OPENER_COUNSELOR};
use crate::transcript::{ClientTrace, SelectedInfo, Speaker, Turn};
use crate::types::{
    candidate_actions, ActionKind, ClientProfile, InfoSource, ProfileItemId, StateOfChange,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("the session has already terminated")]
    SessionTerminated,
    #[error("counselor utterance is empty")]
    EmptyUtterance,
    #[error("invalid override: {0}")]
    InvalidOverride(String),
}

impl From<AnnotationError> for EngineError {
    fn from(e: AnnotationError) -> Self {
        match e {
            AnnotationError::Gateway(g) => EngineError::Gateway(g),
            AnnotationError::Template(t) => EngineError::Template(t),
            other => EngineError::Gateway(GatewayError::BackendUnavailable {
                attempts: 1,
                detail: other.to_string(),
            }),
        }
    }
}

/// A judge decision taken while computing the next state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case")]
pub enum JudgeCheck {
    Motivation {
        index: usize,
        score: f64,
    },
    Belief {
        index: usize,
        score: f64,
    },
    Plan {
        index: usize,
        entailed: bool,
    },
    Relapse {
        from: StateOfChange,
        to: StateOfChange,
    },
}

/// One generated client utterance with its trace and transition log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientTurn {
    pub text: String,
    pub trace: ClientTrace,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<JudgeCheck>,
}

/// Ground-truth values injected into a step instead of being computed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepOverride {
    pub state: Option<StateOfChange>,
    pub actions: Option<Vec<ActionKind>>,
    /// Disclosed text per action, aligned with `actions`.
    pub info: Option<Vec<Option<String>>>,
}

/// End-of-session debrief of the hidden client state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineSummary {
    pub final_state: StateOfChange,
    pub beliefs_addressed: usize,
    pub beliefs_total: usize,
    pub motivation_matched: bool,
    pub plan_matched: Option<usize>,
    pub disclosed: Vec<ProfileItemId>,
}

fn percentage_or_zero(judge: Judge<'_>, prompt: &str) -> Result<f64, EngineError> {
    for _ in 0..=judge.max_retries {
        if let Ok(p) = parse_percentage(&judge.ask(prompt)?) {
            return Ok(p);
        }
    }
    Ok(0.0)
}

/// Per-motivation alignment scores; the caller takes the maximum. Empty
/// input makes no judge call.
pub fn check_motivation(
    topic: &str,
    context: &str,
    motivations: &[String],
    judge: Judge<'_>,
) -> Result<Vec<f64>, EngineError> {
    motivations
        .iter()
        .map(|m| percentage_or_zero(judge, &prompts::render_motivation_check(topic, context, m)?))
        .collect()
}

pub fn max_score(scores: &[f64]) -> f64 {
    scores.iter().copied().fold(0.0, f64::max)
}

/// How far the context relieves one belief, in `[0, 1]`.
pub fn check_belief(
    topic: &str,
    context: &str,
    belief: &str,
    judge: Judge<'_>,
) -> Result<f64, EngineError> {
    percentage_or_zero(
        judge,
        &prompts::render_belief_check(topic, context, belief)?,
    )
}

/// Index of the first plan entailed by the context, if any.
pub fn check_plan(
    context: &str,
    plans: &[String],
    judge: Judge<'_>,
) -> Result<(Option<usize>, Vec<bool>), EngineError> {
    let mut verdicts = Vec::new();
    for (i, plan) in plans.iter().enumerate() {
        let ok = check_entailment(context, plan, judge)?;
        verdicts.push(ok);
        if ok {
            return Ok((Some(i), verdicts));
        }
    }
    Ok((None, verdicts))
}

fn normalize(s: &str) -> String {
    s.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

/// Matches an information-selection reply against candidate items: the
/// longest item quoted in the reply wins.
pub fn match_selected_item(
    reply: &str,
    candidates: &[(ProfileItemId, &str)],
) -> Option<ProfileItemId> {
    let exact = candidates
        .iter()
        .filter(|(_, text)| reply.contains(text.trim()))
        .max_by_key(|(_, text)| text.len());
    if let Some((id, _)) = exact {
        return Some(*id);
    }
    let norm_reply = normalize(reply);
    candidates
        .iter()
        .filter(|(_, text)| {
            let n = normalize(text);
            !n.is_empty() && norm_reply.contains(&n)
        })
        .max_by_key(|(_, text)| text.len())
        .map(|(id, _)| *id)
}

#[derive(Clone)]
struct Snapshot {
    state: StateOfChange,
    ledger: BTreeSet<ProfileItemId>,
    beliefs: Vec<bool>,
    motivation: bool,
    plan: Option<usize>,
    rng: ChaCha8Rng,
    chat_len: usize,
    history_len: usize,
}

/// Per-session client simulator.
pub struct ClientEngine {
    profile: ClientProfile,
    config: SimulationConfig,
    table: Arc<EmpiricalActionTable>,
    current_state: StateOfChange,
    ledger: BTreeSet<ProfileItemId>,
    beliefs_addressed: Vec<bool>,
    motivation_matched: bool,
    plan_matched: Option<usize>,
    chat: ChatSession,
    rng: ChaCha8Rng,
    history: Vec<Turn>,
    terminated: bool,
}

impl ClientEngine {
    pub fn new(
        profile: ClientProfile,
        config: SimulationConfig,
        table: Arc<EmpiricalActionTable>,
    ) -> Result<Self, EngineError> {
        let system = prompts::render_generation_system(&profile)?;
        Ok(Self {
            current_state: profile.initial_state,
            beliefs_addressed: alloc::vec![false; profile.beliefs.len()],
            rng: ChaCha8Rng::seed_from_u64(config.rng_seed),
            profile,
            config,
            table,
            ledger: BTreeSet::new(),
            motivation_matched: false,
            plan_matched: None,
            chat: ChatSession::new(system),
            history: Vec::new(),
            terminated: false,
        })
    }

    /// An engine positioned after an existing conversation. Client turns
    /// with traces restore the state and ledger; their instructions are
    /// replayed into the generation history.
    pub fn with_history(
        profile: ClientProfile,
        config: SimulationConfig,
        table: Arc<EmpiricalActionTable>,
        turns: &[Turn],
    ) -> Result<Self, EngineError> {
        let mut e = Self::new(profile, config, table)?;
        let mut pending: Option<&Turn> = None;
        for t in turns {
            match t.speaker {
                Speaker::Counselor => pending = Some(t),
                Speaker::Client => {
                    let counselor = pending.take().map(|c| c.text.as_str()).unwrap_or("");
                    let mut user = format!("Counselor: {counselor}");
                    if let Some(tr) = &t.trace {
                        let infos: Vec<Option<&str>> = tr
                            .actions
                            .iter()
                            .map(|a| tr.info_for(*a).map(|s| s.text.as_str()))
                            .collect();
                        user.push(' ');
                        user.push_str(&prompts::build_instruction(tr.state, &tr.actions, &infos));
                        e.current_state = tr.state;
                        e.ledger.extend(tr.selected_info.iter().map(|s| s.item));
                    }
                    e.chat.push_user(user);
                    e.chat.push_assistant(format!("Client: {}", t.text));
                }
            }
            e.history.push(t.clone());
        }
        Ok(e)
    }

    pub fn profile(&self) -> &ClientProfile {
        &self.profile
    }

    pub fn config(&self) -> &SimulationConfig {
        &self.config
    }

    pub fn current_state(&self) -> StateOfChange {
        self.current_state
    }

    pub fn disclosure_ledger(&self) -> &BTreeSet<ProfileItemId> {
        &self.ledger
    }

    pub fn beliefs_addressed(&self) -> &[bool] {
        &self.beliefs_addressed
    }

    pub fn motivation_matched(&self) -> bool {
        self.motivation_matched
    }

    pub fn plan_matched(&self) -> Option<usize> {
        self.plan_matched
    }

    pub fn is_terminated(&self) -> bool {
        self.terminated
    }

    pub fn chat(&self) -> &ChatSession {
        &self.chat
    }

    /// The plain conversation so far.
    pub fn history(&self) -> &[Turn] {
        &self.history
    }

    pub fn summary(&self) -> EngineSummary {
        EngineSummary {
            final_state: self.current_state,
            beliefs_addressed: self.beliefs_addressed.iter().filter(|b| **b).count(),
            beliefs_total: self.beliefs_addressed.len(),
            motivation_matched: self.motivation_matched,
            plan_matched: self.plan_matched,
            disclosed: self.ledger.iter().copied().collect(),
        }
    }

    /// Records the fixed opening exchange and returns the client's half.
    pub fn open_session(&mut self) -> ClientTurn {
        let state = self.current_state;
        let instruction = prompts::build_instruction(state, &[ActionKind::Engage], &[None]);
        self.chat
            .push_user(format!("Counselor: {OPENER_COUNSELOR} {instruction}"));
        self.chat.push_assistant(format!("Client: {OPENER_CLIENT}"));
        let trace = ClientTrace {
            state,
            actions: alloc::vec![ActionKind::Engage],
            selected_info: Vec::new(),
            context_dist: None,
            merged_dist: None,
        };
        let base = self.history.len();
        self.history.push(Turn::counselor(base, OPENER_COUNSELOR));
        self.history
            .push(Turn::client(base + 1, OPENER_CLIENT, Some(trace.clone())));
        ClientTurn {
            text: OPENER_CLIENT.to_string(),
            trace,
            checks: Vec::new(),
        }
    }

    /// Produces the client's reply to one counselor utterance.
    pub fn client_step(
        &mut self,
        counselor_utterance: &str,
        gen: &dyn ChatBackend,
        judge: &dyn ChatBackend,
    ) -> Result<ClientTurn, EngineError> {
        self.client_step_with(counselor_utterance, gen, judge, &StepOverride::default())
    }

    /// Like [`client_step`](Self::client_step), with ground-truth values
    /// injected wherever `ov` provides them.
    pub fn client_step_with(
        &mut self,
        counselor_utterance: &str,
        gen: &dyn ChatBackend,
        judge: &dyn ChatBackend,
        ov: &StepOverride,
    ) -> Result<ClientTurn, EngineError> {
        if self.terminated {
            return Err(EngineError::SessionTerminated);
        }
        let utterance = counselor_utterance.trim();
        if utterance.is_empty() {
            return Err(EngineError::EmptyUtterance);
        }
        let snap = self.snapshot();
        let out = self.step_inner(utterance, gen, judge, ov);
        if out.is_err() {
            self.restore(snap);
        }
        out
    }

    fn snapshot(&self) -> Snapshot {
        Snapshot {
            state: self.current_state,
            ledger: self.ledger.clone(),
            beliefs: self.beliefs_addressed.clone(),
            motivation: self.motivation_matched,
            plan: self.plan_matched,
            rng: self.rng.clone(),
            chat_len: self.chat.messages().len(),
            history_len: self.history.len(),
        }
    }

    fn restore(&mut self, s: Snapshot) {
        self.current_state = s.state;
        self.ledger = s.ledger;
        self.beliefs_addressed = s.beliefs;
        self.motivation_matched = s.motivation;
        self.plan_matched = s.plan;
        self.rng = s.rng;
        self.chat.truncate(s.chat_len);
        self.history.truncate(s.history_len);
    }

    fn judge<'a>(&self, backend: &'a dyn ChatBackend) -> Judge<'a> {
        Judge {
            backend,
            params: self.config.judge_params(),
            max_retries: self.config.max_retries,
        }
    }

    /// The previous client line (if any) followed by the new counselor line.
    fn last_exchange(&self, counselor_utterance: &str) -> String {
        let prev = self
            .history
            .iter()
            .rev()
            .find(|t| t.speaker == Speaker::Client);
        match prev {
            Some(t) => format!("{}\nCounselor: {counselor_utterance}", t.line()),
            None => format!("Counselor: {counselor_utterance}"),
        }
    }

    fn full_context(&self, counselor_utterance: &str) -> String {
        let mut s = prompts::render_conversation(&self.history);
        if !s.is_empty() {
            s.push('\n');
        }
        s.push_str("Counselor: ");
        s.push_str(counselor_utterance);
        s
    }

    fn may_advance_from(&self, state: StateOfChange) -> bool {
        match state {
            StateOfChange::Precontemplation => {
                self.profile.final_state >= StateOfChange::Contemplation
            }
            StateOfChange::Contemplation => self.profile.final_state >= StateOfChange::Preparation,
            StateOfChange::Preparation => self.profile.final_state >= StateOfChange::Preparation,
            StateOfChange::Termination => false,
        }
    }

    /// Computes and commits the state for the client turn answering
    /// `counselor_utterance`.
    pub fn next_state(
        &mut self,
        counselor_utterance: &str,
        judge: &dyn ChatBackend,
    ) -> Result<(StateOfChange, Vec<JudgeCheck>), EngineError> {
        let context = self.last_exchange(counselor_utterance);
        let mut checks = Vec::new();
        let state = self.current_state;
        let judge = self.judge(judge);
        if self.config.relapse_enabled
            && matches!(
                state,
                StateOfChange::Contemplation | StateOfChange::Preparation
            )
        {
            let u: f64 = self.rng.random();
            if u < self.config.relapse_prob {
                let to = state
                    .previous()
                    .expect("eligible states have a predecessor");
                match to {
                    StateOfChange::Precontemplation => self.motivation_matched = false,
                    StateOfChange::Contemplation => self.plan_matched = None,
                    _ => {}
                }
                checks.push(JudgeCheck::Relapse { from: state, to });
                self.current_state = to;
                return Ok((to, checks));
            }
        }
        if !self.may_advance_from(state) {
            return Ok((state, checks));
        }
        let topic = self.profile.behavior_problem.clone();
        let next = match state {
            StateOfChange::Precontemplation => {
                let scores = check_motivation(&topic, &context, &self.profile.motivations, judge)?;
                for (index, score) in scores.iter().enumerate() {
                    checks.push(JudgeCheck::Motivation {
                        index,
                        score: *score,
                    });
                }
                if !scores.is_empty() && max_score(&scores) >= self.config.motivation_threshold {
                    self.motivation_matched = true;
                    StateOfChange::Contemplation
                } else {
                    state
                }
            }
            StateOfChange::Contemplation => {
                // only the newest counselor line, to bound judge calls
                let latest = format!("Counselor: {counselor_utterance}");
                for index in 0..self.profile.beliefs.len() {
                    if self.beliefs_addressed[index] {
                        continue;
                    }
                    let score = check_belief(&topic, &latest, &self.profile.beliefs[index], judge)?;
                    checks.push(JudgeCheck::Belief { index, score });
                    if score >= self.config.belief_threshold {
                        self.beliefs_addressed[index] = true;
                    }
                }
                if self.beliefs_addressed.iter().all(|b| *b) {
                    StateOfChange::Preparation
                } else {
                    state
                }
            }
            StateOfChange::Preparation => {
                let (hit, verdicts) = check_plan(&context, &self.profile.acceptable_plans, judge)?;
                for (index, entailed) in verdicts.into_iter().enumerate() {
                    checks.push(JudgeCheck::Plan { index, entailed });
                }
                match hit {
                    Some(i) => {
                        self.plan_matched = Some(i);
                        StateOfChange::Termination
                    }
                    None => state,
                }
            }
            StateOfChange::Termination => state,
        };
        self.current_state = next;
        Ok((next, checks))
    }

    fn context_distribution(
        &self,
        context: &str,
        state: StateOfChange,
        judge: Judge<'_>,
    ) -> Result<Option<ActionDistribution>, EngineError> {
        let cands = candidate_actions(state);
        let prompt = prompts::render_action_distribution(context, cands)?;
        for _ in 0..=judge.max_retries {
            if let Ok(d) = parse_probability_json(&judge.ask(&prompt)?, cands) {
                return Ok(Some(d));
            }
        }
        Ok(None)
    }

    /// Picks an undisclosed item for a Type-2 action and records it.
    pub fn select_information(
        &mut self,
        action: ActionKind,
        context: &str,
        judge: &dyn ChatBackend,
    ) -> Result<Option<SelectedInfo>, EngineError> {
        let Some(source) = action.info_source() else {
            return Ok(None);
        };
        let candidates: Vec<(ProfileItemId, &str)> = self
            .profile
            .items(source)
            .iter()
            .enumerate()
            .map(|(i, s)| (ProfileItemId::new(source, i), s.as_str()))
            .filter(|(id, _)| !self.ledger.contains(id))
            .collect();
        let chosen = match candidates.len() {
            0 => return Ok(None),
            1 => candidates[0].0,
            _ => {
                let texts: Vec<&str> = candidates.iter().map(|(_, t)| *t).collect();
                let prompt =
                    prompts::render_info_selection(self.current_state, context, &texts, action)?;
                let judge = self.judge(judge);
                let mut pick = None;
                for _ in 0..2 {
                    pick = match_selected_item(&judge.ask(&prompt)?, &candidates);
                    if pick.is_some() {
                        break;
                    }
                }
                pick.unwrap_or(candidates[0].0)
            }
        };
        self.ledger.insert(chosen);
        let text = self.profile.item(chosen).unwrap_or_default().to_string();
        Ok(Some(SelectedInfo {
            action,
            item: chosen,
            text,
        }))
    }

    fn step_inner(
        &mut self,
        utterance: &str,
        gen: &dyn ChatBackend,
        judge: &dyn ChatBackend,
        ov: &StepOverride,
    ) -> Result<ClientTurn, EngineError> {
        let context = self.full_context(utterance);

        let (state, checks) = match ov.state {
            Some(s) => {
                self.current_state = s;
                (s, Vec::new())
            }
            None => self.next_state(utterance, judge)?,
        };

        let mut context_dist = None;
        let mut merged_dist = None;
        let mut actions = match &ov.actions {
            Some(a) => {
                let cands = candidate_actions(state);
                if a.is_empty() || a.len() > 3 || a.iter().any(|x| !cands.contains(x)) {
                    return Err(EngineError::InvalidOverride(format!(
                        "actions {a:?} do not fit {state}"
                    )));
                }
                a.clone()
            }
            None if state == StateOfChange::Termination => alloc::vec![ActionKind::Terminate],
            None => {
                let emp = self.table.empirical_distribution(
                    state,
                    self.profile.receptivity,
                    self.config.empirical_min_cell,
                    self.config.smoothing_epsilon,
                );
                let ctx = self.context_distribution(&context, state, self.judge(judge))?;
                let merged = match &ctx {
                    Some(c) => c.merge(&emp).unwrap_or_else(|_| emp.clone()),
                    None => emp,
                };
                let k = if self.config.multi_action_enabled {
                    sample_action_count(&self.config.multi_action_weights, &mut self.rng)
                } else {
                    1
                };
                let drawn = merged.sample_distinct(k, &mut self.rng);
                context_dist = ctx;
                merged_dist = Some(merged);
                drawn
            }
        };

        let mut selected = Vec::new();
        let mut final_actions: Vec<ActionKind> = Vec::with_capacity(actions.len());
        for (i, action) in actions.drain(..).enumerate() {
            let injected = ov.info.as_ref().and_then(|v| v.get(i).cloned().flatten());
            let info = match (injected, action.info_source()) {
                (Some(text), Some(source)) => {
                    let item = self
                        .profile
                        .items(source)
                        .iter()
                        .position(|s| *s == text)
                        .map(|idx| ProfileItemId::new(source, idx));
                    match item {
                        Some(id) => {
                            self.ledger.insert(id);
                            Some(SelectedInfo {
                                action,
                                item: id,
                                text,
                            })
                        }
                        None => {
                            return Err(EngineError::InvalidOverride(format!(
                                "`{text}` is not a {} item",
                                source.key()
                            )))
                        }
                    }
                }
                (_, Some(_)) => match self.select_information(action, &context, judge)? {
                    Some(info) => Some(info),
                    None => {
                        if !final_actions.contains(&ActionKind::Engage) {
                            final_actions.push(ActionKind::Engage);
                        }
                        continue;
                    }
                },
                (_, None) => None,
            };
            if final_actions.contains(&action) {
                continue;
            }
            final_actions.push(action);
            selected.extend(info);
        }
        if final_actions.is_empty() {
            final_actions.push(ActionKind::Engage);
        }

        let infos: Vec<Option<&str>> = final_actions
            .iter()
            .map(|a| {
                selected
                    .iter()
                    .find(|s| s.action == *a)
                    .map(|s| s.text.as_str())
            })
            .collect();
        let instruction = prompts::build_instruction(state, &final_actions, &infos);
        self.chat
            .push_user(format!("Counselor: {utterance} {instruction}"));
        let reply = gateway::complete(
            gen,
            &self.chat,
            self.config.generation_params(),
            self.config.max_retries,
        )?;
        let text = gateway::strip_speaker_prefix(&reply, "Client").to_string();
        if text.is_empty() {
            return Err(GatewayError::EmptyReply.into());
        }
        self.chat.push_assistant(format!("Client: {text}"));

        let trace = ClientTrace {
            state,
            actions: final_actions,
            selected_info: selected,
            context_dist,
            merged_dist,
        };
        let base = self.history.len();
        self.history.push(Turn::counselor(base, utterance));
        self.history
            .push(Turn::client(base + 1, text.clone(), Some(trace.clone())));
        if trace.actions.contains(&ActionKind::Terminate) {
            self.terminated = true;
        }
        Ok(ClientTurn {
            text,
            trace,
            checks,
        })
    }
}

/// Items of `source` not yet disclosed.
pub fn undisclosed(
    profile: &ClientProfile,
    ledger: &BTreeSet<ProfileItemId>,
    source: InfoSource,
) -> Vec<ProfileItemId> {
    (0..profile.items(source).len())
        .map(|i| ProfileItemId::new(source, i))
        .filter(|id| !ledger.contains(id))
        .collect()
}
