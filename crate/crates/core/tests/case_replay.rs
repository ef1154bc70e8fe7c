use std::sync::Arc;

use clientsim_core::corpus::EmpiricalActionTable;
use clientsim_core::engine::{ClientEngine, StepOverride};
use clientsim_core::gateway::{Role, ScriptedBackend, ScriptedFixture};
use clientsim_core::{ActionKind, ClientProfile, InfoSource, SimulationConfig, StateOfChange};
use serde::Deserialize;

#[derive(Deserialize)]
struct Case {
    profile: ClientProfile,
    counselor: Vec<String>,
    actions: Vec<Vec<ActionKind>>,
    backend: ScriptedFixture,
    expected_instructions: Vec<String>,
}

fn load() -> Case {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/case_replay.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn replay(case: &Case) -> (ClientEngine, Vec<String>) {
    let backend = ScriptedBackend::new(case.backend.clone());
    let mut engine = ClientEngine::new(
        case.profile.clone(),
        SimulationConfig::default(),
        Arc::new(EmpiricalActionTable::new()),
    )
    .unwrap();
    engine.open_session();
    for (utt, actions) in case.counselor.iter().zip(&case.actions) {
        let ov = StepOverride {
            actions: Some(actions.clone()),
            ..StepOverride::default()
        };
        engine
            .client_step_with(utt, &backend, &backend, &ov)
            .unwrap();
    }
    let instructions = engine
        .chat()
        .messages()
        .iter()
        .filter(|m| m.role == Role::User)
        .map(|m| m.content[m.content.rfind("[State: ").unwrap()..].to_string())
        .collect();
    (engine, instructions)
}

#[test]
fn reproduces_instruction_sequence() {
    let case = load();
    let (_, got) = replay(&case);
    assert_eq!(got.len(), case.expected_instructions.len());
    for (i, (g, want)) in got.iter().zip(&case.expected_instructions).enumerate() {
        assert_eq!(g, want, "client turn {i}");
    }
}

#[test]
fn replay_ends_in_contemplation_with_all_beliefs_voiced() {
    let case = load();
    let (engine, _) = replay(&case);
    assert_eq!(engine.current_state(), StateOfChange::Contemplation);
    assert!(engine.motivation_matched());
    assert_eq!(engine.plan_matched(), None);
    let s = engine.summary();
    assert_eq!(s.beliefs_addressed, 0);
    let beliefs = s
        .disclosed
        .iter()
        .filter(|d| d.source == InfoSource::Beliefs)
        .count();
    assert_eq!(beliefs, 3);
    let states: Vec<StateOfChange> = engine
        .history()
        .iter()
        .filter_map(|t| t.trace.as_ref().map(|tr| tr.state))
        .collect();
    assert_eq!(
        states
            .iter()
            .filter(|s| **s == StateOfChange::Precontemplation)
            .count(),
        9
    );
    assert!(states.windows(2).all(|w| w[0] <= w[1]));
}
