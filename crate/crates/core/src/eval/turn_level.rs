//! Turn-level evaluation: regenerate each real client turn from the true
//! history and score it with ROUGE.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::rouge::{mean_rouge, rouge_scores, RougeScores};
use super::EvalError;
use crate::annotation::AnnotatedUtterance;
use crate::baseline::strategy_with_history;
use crate::config::SimulationConfig;
use crate::corpus::EmpiricalActionTable;
use crate::engine::StepOverride;
use crate::gateway::ChatBackend;
use crate::seed::session_seed;
use crate::transcript::{ClientKind, Speaker, Turn};
use crate::types::{candidate_actions, ClientProfile};

/// One real session to replay.
#[derive(Debug, Clone, PartialEq)]
pub struct TurnLevelCase {
    pub id: String,
    pub profile: ClientProfile,
    pub turns: Vec<Turn>,
    /// Ground-truth labels for the oracle variant.
    pub utterances: Vec<AnnotatedUtterance>,
    pub exemplar: Option<Vec<Turn>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnLevelReport {
    pub client: ClientKind,
    pub oracle: bool,
    pub n_turns: usize,
    pub mean: Option<RougeScores>,
}

/// Ground truth for client turn `i`: its trace if it has one, else the
/// annotated labels (information left to the engine).
pub fn oracle_override(case: &TurnLevelCase, i: usize) -> StepOverride {
    if let Some(tr) = &case.turns[i].trace {
        return StepOverride {
            state: Some(tr.state),
            actions: Some(tr.actions.clone()),
            info: Some(
                tr.actions
                    .iter()
                    .map(|a| tr.info_for(*a).map(|s| s.text.clone()))
                    .collect(),
            ),
        };
    }
    let labels: Vec<&AnnotatedUtterance> = case
        .utterances
        .iter()
        .filter(|u| u.turn_index == i)
        .collect();
    let Some(first) = labels.first() else {
        return StepOverride::default();
    };
    let cands = candidate_actions(first.state);
    let mut actions = Vec::new();
    for u in &labels {
        if u.state == first.state && cands.contains(&u.action) && !actions.contains(&u.action) {
            actions.push(u.action);
        }
    }
    StepOverride {
        state: Some(first.state),
        actions: (!actions.is_empty()).then_some(actions),
        info: None,
    }
}

#[allow(clippy::too_many_arguments)]
pub fn turn_level_eval(
    cases: &[TurnLevelCase],
    kind: ClientKind,
    oracle: bool,
    config: &SimulationConfig,
    table: &Arc<EmpiricalActionTable>,
    gen: &dyn ChatBackend,
    judge: &dyn ChatBackend,
) -> Result<TurnLevelReport, EvalError> {
    let mut scores = Vec::new();
    for case in cases {
        for i in 1..case.turns.len() {
            let (prev, cur) = (&case.turns[i - 1], &case.turns[i]);
            if cur.speaker != Speaker::Client || prev.speaker != Speaker::Counselor {
                continue;
            }
            let cfg = SimulationConfig {
                rng_seed: session_seed(config.rng_seed, &case.id, i),
                ..config.clone()
            };
            let mut strategy = strategy_with_history(
                kind,
                &case.profile,
                &cfg,
                table,
                case.exemplar.as_deref(),
                &case.turns[..i - 1],
            )?;
            let ov = if oracle {
                oracle_override(case, i)
            } else {
                StepOverride::default()
            };
            let reply = strategy.reply_with(&prev.text, gen, judge, &ov)?;
            scores.push(rouge_scores(&reply.text, &cur.text));
        }
    }
    Ok(TurnLevelReport {
        client: kind,
        oracle,
        n_turns: scores.len(),
        mean: mean_rouge(&scores),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{BackendError, ChatSession, SamplingParams, ScriptedBackend};
    use crate::types::tests::drinking_profile;
    use alloc::vec;

    /// Answers with whatever the test pinned as the true next line.
    struct Replay(Vec<(String, String)>);

    impl ChatBackend for Replay {
        fn chat(&self, s: &ChatSession, _: SamplingParams) -> Result<String, BackendError> {
            let last = &s.last_message().unwrap().content;
            self.0
                .iter()
                .find(|(k, _)| last.contains(k.as_str()))
                .map(|(_, v)| v.clone())
                .ok_or_else(|| BackendError::Unavailable(last.clone()))
        }
    }

    fn case() -> TurnLevelCase {
        TurnLevelCase {
            id: "real-1".into(),
            profile: drinking_profile(),
            turns: vec![
                Turn::counselor(0, "What brings you in?"),
                Turn::client(1, "My mom made me come.", None),
                Turn::counselor(2, "How do you feel about that?"),
                Turn::client(3, "Annoyed, honestly.", None),
            ],
            utterances: vec![],
            exemplar: None,
        }
    }

    #[test]
    fn replay_scores_perfectly() {
        let gen = Replay(vec![
            (
                "What brings you in?".into(),
                "Client: My mom made me come.".into(),
            ),
            ("How do you feel".into(), "Annoyed, honestly.".into()),
        ]);
        let r = turn_level_eval(
            &[case()],
            ClientKind::ProfileBased,
            false,
            &SimulationConfig::default(),
            &Arc::new(EmpiricalActionTable::new()),
            &gen,
            &gen,
        )
        .unwrap();
        assert_eq!(r.n_turns, 2);
        assert_eq!(
            r.mean,
            Some(RougeScores {
                r1: 1.0,
                r2: 1.0,
                rl: 1.0
            })
        );
    }

    #[test]
    fn no_cases_no_scores() {
        let b = ScriptedBackend::queue(Vec::<String>::new());
        let r = turn_level_eval(
            &[],
            ClientKind::Base,
            false,
            &SimulationConfig::default(),
            &Arc::new(EmpiricalActionTable::new()),
            &b,
            &b,
        )
        .unwrap();
        assert_eq!((r.n_turns, r.mean), (0, None));
    }

    #[test]
    fn oracle_uses_labels() {
        use crate::types::{ActionKind, StateOfChange};
        let mut c = case();
        c.utterances = vec![AnnotatedUtterance {
            turn_index: 3,
            state: StateOfChange::Precontemplation,
            action: ActionKind::Deny,
        }];
        let ov = oracle_override(&c, 3);
        assert_eq!(ov.state, Some(StateOfChange::Precontemplation));
        assert_eq!(ov.actions, Some(vec![ActionKind::Deny]));
        assert_eq!(oracle_override(&c, 1), StepOverride::default());
    }
}
