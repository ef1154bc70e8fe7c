//! Profile-consistent client simulation for motivational-interviewing
//! counseling sessions.
//!
//! The crate is `no_std` (with `alloc`). Everything that touches the outside
//! world goes through the [`gateway::ChatBackend`] trait, so the engine,
//! annotation pipeline, orchestrator and metrics are all pure functions of
//! their inputs plus whatever backends the caller plugs in. File formats,
//! HTTP transport, the CLI and the live-practice service live in the
//! `clientsim` companion crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod annotation;
pub mod baseline;
pub mod config;
pub mod corpus;
pub mod distribution;
pub mod engine;
pub mod eval;
pub mod gateway;
pub mod orchestrator;
pub mod prompts;
pub mod seed;
pub mod transcript;
pub mod types;

pub use config::SimulationConfig;
pub use distribution::ActionDistribution;
pub use transcript::{ClientTrace, EndReason, SelectedInfo, SessionTranscript, Speaker, Turn};
pub use types::{
    candidate_actions, validate_profile, ActionKind, ClientProfile, DisclosureClass, InfoSource,
    ProfileItemId, ReceptivityLevel, StateOfChange,
};
