//! The common client-strategy contract and the four prompt-only baselines.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::config::SimulationConfig;
use crate::corpus::EmpiricalActionTable;
use crate::engine::{ClientEngine, EngineError, JudgeCheck, StepOverride};
use crate::gateway::{self, ChatBackend, ChatSession, GatewayError};
use crate::prompts::{self, OPENER_CLIENT, OPENER_COUNSELOR};
use crate::transcript::{ClientKind, ClientTrace, Speaker, Turn};
use crate::types::ClientProfile;

/// One client utterance as seen by the orchestrator.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientReply {
    pub text: String,
    pub trace: Option<ClientTrace>,
    pub checks: Vec<JudgeCheck>,
    pub terminated: bool,
}

impl ClientReply {
    fn plain(text: String) -> Self {
        Self {
            text,
            trace: None,
            checks: Vec::new(),
            terminated: false,
        }
    }
}

/// Anything that can play the client in a session.
pub trait ClientStrategy: Send {
    fn kind(&self) -> ClientKind;

    /// Records the fixed opening exchange and returns the client's half.
    fn open(&mut self) -> ClientReply;

    fn reply(
        &mut self,
        counselor_utterance: &str,
        gen: &dyn ChatBackend,
        judge: &dyn ChatBackend,
    ) -> Result<ClientReply, EngineError>;

    fn is_finished(&self) -> bool;

    /// Ground-truth injection for turn-level evaluation; strategies without
    /// hidden state ignore it.
    fn reply_with(
        &mut self,
        counselor_utterance: &str,
        gen: &dyn ChatBackend,
        judge: &dyn ChatBackend,
        _ov: &StepOverride,
    ) -> Result<ClientReply, EngineError> {
        self.reply(counselor_utterance, gen, judge)
    }
}

impl ClientStrategy for ClientEngine {
    fn kind(&self) -> ClientKind {
        ClientKind::Framework
    }

    fn open(&mut self) -> ClientReply {
        let t = self.open_session();
        ClientReply {
            text: t.text,
            trace: Some(t.trace),
            checks: t.checks,
            terminated: false,
        }
    }

    fn reply(
        &mut self,
        counselor_utterance: &str,
        gen: &dyn ChatBackend,
        judge: &dyn ChatBackend,
    ) -> Result<ClientReply, EngineError> {
        self.reply_with(counselor_utterance, gen, judge, &StepOverride::default())
    }

    fn reply_with(
        &mut self,
        counselor_utterance: &str,
        gen: &dyn ChatBackend,
        judge: &dyn ChatBackend,
        ov: &StepOverride,
    ) -> Result<ClientReply, EngineError> {
        let t = self.client_step_with(counselor_utterance, gen, judge, ov)?;
        Ok(ClientReply {
            text: t.text,
            trace: Some(t.trace),
            checks: t.checks,
            terminated: self.is_terminated(),
        })
    }

    fn is_finished(&self) -> bool {
        self.is_terminated()
    }
}

/// What a baseline is conditioned on.
#[derive(Debug, Clone, PartialEq)]
pub enum BaselineInput {
    BehaviorProblem(String),
    Exemplar(Vec<Turn>),
    Profile(ClientProfile),
    ProfileWithActions(ClientProfile),
}

impl BaselineInput {
    pub fn kind(&self) -> ClientKind {
        match self {
            BaselineInput::BehaviorProblem(_) => ClientKind::Base,
            BaselineInput::Exemplar(_) => ClientKind::ExampleBased,
            BaselineInput::Profile(_) => ClientKind::ProfileBased,
            BaselineInput::ProfileWithActions(_) => ClientKind::ProActBased,
        }
    }

    pub fn system_prompt(&self) -> Result<String, gateway::TemplateError> {
        match self {
            BaselineInput::BehaviorProblem(b) => prompts::render_baseline_base(b),
            BaselineInput::Exemplar(turns) => {
                prompts::render_baseline_example(&prompts::render_conversation(turns))
            }
            BaselineInput::Profile(p) => prompts::render_baseline_profile(p),
            BaselineInput::ProfileWithActions(p) => prompts::render_baseline_proact(p),
        }
    }
}

/// A prompt-only client: a system prompt plus the running conversation.
#[derive(Debug, Clone)]
pub struct BaselineClient {
    input: BaselineInput,
    chat: ChatSession,
    config: SimulationConfig,
}

impl BaselineClient {
    pub fn new(input: BaselineInput, config: SimulationConfig) -> Result<Self, EngineError> {
        let chat = ChatSession::new(input.system_prompt()?);
        Ok(Self {
            input,
            chat,
            config,
        })
    }

    /// A baseline positioned after an existing conversation.
    pub fn with_history(
        input: BaselineInput,
        config: SimulationConfig,
        turns: &[Turn],
    ) -> Result<Self, EngineError> {
        let mut b = Self::new(input, config)?;
        for t in turns {
            match t.speaker {
                Speaker::Counselor => b.chat.push_user(format!("Counselor: {}", t.text)),
                Speaker::Client => b.chat.push_assistant(format!("Client: {}", t.text)),
            }
        }
        Ok(b)
    }

    pub fn input(&self) -> &BaselineInput {
        &self.input
    }

    pub fn chat(&self) -> &ChatSession {
        &self.chat
    }
}

impl ClientStrategy for BaselineClient {
    fn kind(&self) -> ClientKind {
        self.input.kind()
    }

    fn open(&mut self) -> ClientReply {
        self.chat
            .push_user(format!("Counselor: {OPENER_COUNSELOR}"));
        self.chat.push_assistant(format!("Client: {OPENER_CLIENT}"));
        ClientReply::plain(OPENER_CLIENT.to_string())
    }

    fn reply(
        &mut self,
        counselor_utterance: &str,
        gen: &dyn ChatBackend,
        _judge: &dyn ChatBackend,
    ) -> Result<ClientReply, EngineError> {
        let utterance = counselor_utterance.trim();
        if utterance.is_empty() {
            return Err(EngineError::EmptyUtterance);
        }
        let len = self.chat.messages().len();
        self.chat.push_user(format!("Counselor: {utterance}"));
        let out = gateway::complete(
            gen,
            &self.chat,
            self.config.generation_params(),
            self.config.max_retries,
        )
        .and_then(|r| {
            let text = gateway::strip_speaker_prefix(&r, "Client").to_string();
            if text.is_empty() {
                Err(GatewayError::EmptyReply)
            } else {
                Ok(text)
            }
        });
        match out {
            Ok(text) => {
                self.chat.push_assistant(format!("Client: {text}"));
                Ok(ClientReply::plain(text))
            }
            Err(e) => {
                self.chat.truncate(len);
                Err(e.into())
            }
        }
    }

    fn is_finished(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StrategyError {
    #[error("the example-based client needs an exemplar transcript")]
    MissingExemplar,
    #[error(transparent)]
    Engine(#[from] EngineError),
}

fn baseline_input(
    kind: ClientKind,
    profile: &ClientProfile,
    exemplar: Option<&[Turn]>,
) -> Result<BaselineInput, StrategyError> {
    Ok(match kind {
        ClientKind::Framework | ClientKind::ProfileBased => BaselineInput::Profile(profile.clone()),
        ClientKind::Base => BaselineInput::BehaviorProblem(profile.behavior_problem.clone()),
        ClientKind::ExampleBased => {
            BaselineInput::Exemplar(exemplar.ok_or(StrategyError::MissingExemplar)?.to_vec())
        }
        ClientKind::ProActBased => BaselineInput::ProfileWithActions(profile.clone()),
    })
}

/// Builds the client for `kind`. `exemplar` is only read by the
/// example-based baseline.
pub fn make_strategy(
    kind: ClientKind,
    profile: &ClientProfile,
    config: &SimulationConfig,
    table: &Arc<EmpiricalActionTable>,
    exemplar: Option<&[Turn]>,
) -> Result<Box<dyn ClientStrategy>, StrategyError> {
    if kind == ClientKind::Framework {
        return Ok(Box::new(ClientEngine::new(
            profile.clone(),
            config.clone(),
            table.clone(),
        )?));
    }
    Ok(Box::new(BaselineClient::new(
        baseline_input(kind, profile, exemplar)?,
        config.clone(),
    )?))
}

/// Like [`make_strategy`], positioned after `history` (no opener added).
pub fn strategy_with_history(
    kind: ClientKind,
    profile: &ClientProfile,
    config: &SimulationConfig,
    table: &Arc<EmpiricalActionTable>,
    exemplar: Option<&[Turn]>,
    history: &[Turn],
) -> Result<Box<dyn ClientStrategy>, StrategyError> {
    if kind == ClientKind::Framework {
        let e =
            ClientEngine::with_history(profile.clone(), config.clone(), table.clone(), history)?;
        return Ok(Box::new(e));
    }
    let input = baseline_input(kind, profile, exemplar)?;
    Ok(Box::new(BaselineClient::with_history(
        input,
        config.clone(),
        history,
    )?))
}
