//! File formats, backends, batch running, evaluation pipelines and the
//! live-practice service around `clientsim-core`.

pub mod annomi;
pub mod backend;
pub mod batch;
pub mod io;
pub mod pipeline;
pub mod service;
