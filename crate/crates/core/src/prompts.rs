//! Prompt templates and the text renderers that fill them.
//!
//! Template bodies live in `prompts/*.txt` next to the crate manifest and are
//! embedded at compile time.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::gateway::{PromptTemplate, TemplateError};
use crate::transcript::Turn;
use crate::types::{ActionKind, ClientProfile, InfoSource, StateOfChange};

/// The counselor's fixed first line in every session.
pub const OPENER_COUNSELOR: &str = "Hello. How are you?";
/// The client's fixed reply to [`OPENER_COUNSELOR`].
pub const OPENER_CLIENT: &str = "I am good. What about you?";

macro_rules! templates {
    ($($fn_name:ident => $file:literal),* $(,)?) => {
        $(
            pub fn $fn_name() -> PromptTemplate {
                PromptTemplate::new($file, include_str!(concat!("../prompts/", $file)).trim_end())
            }
        )*

        /// Every embedded template, for audits and golden tests.
        pub fn all_templates() -> Vec<PromptTemplate> {
            alloc::vec![$($fn_name()),*]
        }
    };
}

templates! {
    counselor_system => "counselor_system.txt",
    moderator => "moderator.txt",
    generation_system => "generation_system.txt",
    motivation_check => "motivation_check.txt",
    belief_check => "belief_check.txt",
    action_distribution => "action_distribution.txt",
    info_selection => "info_selection.txt",
    annotate_profile => "annotate_profile.txt",
    annotate_state => "annotate_state.txt",
    annotate_action => "annotate_action.txt",
    annotate_receptivity => "annotate_receptivity.txt",
    entailment => "entailment.txt",
    baseline_base => "baseline_base.txt",
    baseline_example => "baseline_example.txt",
    baseline_profile => "baseline_profile.txt",
    baseline_proact => "baseline_proact.txt",
}

pub const PROFILE_EXAMPLE_JSON: &str = include_str!("../prompts/profile_example.json");
pub const MOTIVATION_EXAMPLES: &str = include_str!("../prompts/motivation_examples.txt");
pub const BELIEF_EXAMPLES: &str = include_str!("../prompts/belief_examples.txt");
pub const MODERATOR_EXAMPLES_JSON: &str = include_str!("../prompts/moderator_examples.json");

/// One labeled few-shot snippet for the moderator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeratorExample {
    pub snippet: String,
    pub conclude: bool,
}

pub fn default_moderator_examples() -> Vec<ModeratorExample> {
    serde_json::from_str(MODERATOR_EXAMPLES_JSON)
        .expect("embedded moderator examples are valid JSON")
}

pub fn render_moderator_examples(examples: &[ModeratorExample]) -> String {
    let mut out = String::new();
    for (i, ex) in examples.iter().enumerate() {
        if i > 0 {
            out.push_str("\n\n");
        }
        out.push_str(&format!(
            "Example {}:\n{}\nQuestion: Should the conversation be concluded?\nAnswer: {}",
            i + 1,
            ex.snippet.trim_end(),
            if ex.conclude { "Yes" } else { "No" }
        ));
    }
    out
}

fn bullet_block(out: &mut String, title: &str, items: &[String]) {
    if items.is_empty() {
        out.push_str(&format!("{title}: None\n"));
        return;
    }
    out.push_str(&format!("{title}:\n"));
    for item in items {
        out.push_str(&format!("- {item}\n"));
    }
}

/// Human-readable profile used wherever a prompt asks for `[profile]`.
pub fn render_profile(profile: &ClientProfile) -> String {
    let mut out = format!(
        "Behavioral Problem: {}\nReceptivity: {}\n",
        profile.behavior_problem,
        profile.receptivity.score()
    );
    bullet_block(&mut out, "Personas", &profile.personas);
    bullet_block(&mut out, "Motivation", &profile.motivations);
    bullet_block(&mut out, "Beliefs", &profile.beliefs);
    bullet_block(&mut out, "Acceptable Plans", &profile.acceptable_plans);
    out.truncate(out.trim_end().len());
    out
}

/// One profile component as entailment text; `None` when the component is
/// empty.
pub fn render_component(title: &str, items: &[String]) -> Option<String> {
    if items.iter().all(|s| s.trim().is_empty()) {
        return None;
    }
    let mut out = String::new();
    bullet_block(&mut out, title, items);
    out.truncate(out.trim_end().len());
    Some(out)
}

pub fn component_title(source: InfoSource) -> &'static str {
    match source {
        InfoSource::Personas => "Personas",
        InfoSource::Beliefs => "Beliefs",
        InfoSource::Motivation => "Motivation",
        InfoSource::Plans => "Acceptable Plans",
    }
}

/// `- Name: description` per line.
pub fn render_action_options(actions: &[ActionKind]) -> String {
    let lines: Vec<String> = actions
        .iter()
        .map(|a| format!("- {}: {}", a.name(), a.description()))
        .collect();
    lines.join("\n")
}

/// `Speaker: text` lines.
pub fn render_conversation(turns: &[Turn]) -> String {
    crate::transcript::render_lines(turns)
}

/// The bracketed per-turn instruction appended to the counselor line.
///
/// Each action description is followed by the information it discloses, if
/// any: `[State: s, Action: a1, Information: i1, Action: a2]`.
pub fn build_instruction(
    state: StateOfChange,
    actions: &[ActionKind],
    infos: &[Option<&str>],
) -> String {
    let mut out = format!("[State: {}", state.description());
    for (i, a) in actions.iter().enumerate() {
        out.push_str(", Action: ");
        out.push_str(a.description());
        if let Some(Some(info)) = infos.get(i) {
            out.push_str(", Information: ");
            out.push_str(info);
        }
    }
    out.push(']');
    out
}

pub fn render_counselor_system() -> String {
    counselor_system().body
}

pub fn render_generation_system(profile: &ClientProfile) -> Result<String, TemplateError> {
    generation_system().render(&[
        ("topic", &profile.behavior_problem),
        ("profile", &render_profile(profile)),
    ])
}

pub fn render_moderator(examples: &str, context: &str) -> Result<String, TemplateError> {
    moderator().render(&[("examples", examples), ("context", context)])
}

pub fn render_motivation_check(
    topic: &str,
    context: &str,
    motivation: &str,
) -> Result<String, TemplateError> {
    motivation_check().render(&[
        ("examples", MOTIVATION_EXAMPLES.trim_end()),
        ("topic", topic),
        ("context", context),
        ("motivation", motivation),
    ])
}

pub fn render_belief_check(
    topic: &str,
    context: &str,
    belief: &str,
) -> Result<String, TemplateError> {
    belief_check().render(&[
        ("examples", BELIEF_EXAMPLES.trim_end()),
        ("topic", topic),
        ("context", context),
        ("beliefs", belief),
    ])
}

pub fn render_action_distribution(
    context: &str,
    actions: &[ActionKind],
) -> Result<String, TemplateError> {
    action_distribution().render(&[
        ("context", context),
        ("optional actions", &render_action_options(actions)),
    ])
}

pub fn render_info_selection(
    state: StateOfChange,
    context: &str,
    items: &[&str],
    action: ActionKind,
) -> Result<String, TemplateError> {
    let listed: Vec<String> = items.iter().map(|s| format!("- {s}")).collect();
    let action_text = format!("{}: {}", action.name(), action.description());
    info_selection().render(&[
        ("state", state.name()),
        ("context", context),
        ("profile", &listed.join("\n")),
        ("action", &action_text),
    ])
}

pub fn render_annotate_profile(conversation: &str) -> Result<String, TemplateError> {
    annotate_profile().render(&[
        ("example", PROFILE_EXAMPLE_JSON.trim_end()),
        ("conversation", conversation),
    ])
}

pub fn render_annotate_state(conversation: &str) -> Result<String, TemplateError> {
    annotate_state().render(&[("conversation", conversation)])
}

pub fn render_annotate_action(
    options: &[ActionKind],
    conversation: &str,
    last_utterance: &str,
) -> Result<String, TemplateError> {
    annotate_action().render(&[
        ("options", &render_action_options(options)),
        ("conversation", conversation),
        ("last utterance", last_utterance),
    ])
}

pub fn render_annotate_receptivity(conversation: &str) -> Result<String, TemplateError> {
    annotate_receptivity().render(&[("conversation", conversation)])
}

pub fn render_entailment(premise: &str, hypothesis: &str) -> Result<String, TemplateError> {
    entailment().render(&[("profile", premise), ("component", hypothesis)])
}

pub fn render_baseline_base(behavior_problem: &str) -> Result<String, TemplateError> {
    baseline_base().render(&[("behavioral problem", behavior_problem)])
}

pub fn render_baseline_example(conversation: &str) -> Result<String, TemplateError> {
    baseline_example().render(&[("conversation", conversation)])
}

pub fn render_baseline_profile(profile: &ClientProfile) -> Result<String, TemplateError> {
    baseline_profile().render(&[("profile", &render_profile(profile))])
}

pub fn render_baseline_proact(profile: &ClientProfile) -> Result<String, TemplateError> {
    baseline_proact().render(&[("profile", &render_profile(profile))])
}
