use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::gateway::SamplingParams;

/// Knobs for one simulated session. Every field has a default so partial
/// JSON overrides deserialize cleanly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    pub max_turns: usize,
    pub motivation_threshold: f64,
    pub belief_threshold: f64,
    pub relapse_enabled: bool,
    pub relapse_prob: f64,
    pub multi_action_enabled: bool,
    pub multi_action_weights: [f64; 3],
    pub gen_top_p: f64,
    pub gen_temperature: f64,
    pub judge_top_p: f64,
    pub judge_temperature: f64,
    pub rng_seed: u64,
    pub empirical_min_cell: u64,
    pub smoothing_epsilon: f64,
    pub max_retries: u32,
    /// Number of trailing turns the moderator sees.
    pub moderator_window: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            max_turns: 100,
            motivation_threshold: 0.5,
            belief_threshold: 0.5,
            relapse_enabled: false,
            relapse_prob: 0.3,
            multi_action_enabled: false,
            multi_action_weights: [0.89, 0.10, 0.01],
            gen_top_p: 0.7,
            gen_temperature: 0.8,
            judge_top_p: 0.2,
            judge_temperature: 0.3,
            rng_seed: 0,
            empirical_min_cell: 10,
            smoothing_epsilon: 1e-6,
            max_retries: 3,
            moderator_window: 6,
        }
    }
}

impl SimulationConfig {
    pub fn generation_params(&self) -> SamplingParams {
        SamplingParams {
            top_p: self.gen_top_p,
            temperature: self.gen_temperature,
        }
    }

    pub fn judge_params(&self) -> SamplingParams {
        SamplingParams {
            top_p: self.judge_top_p,
            temperature: self.judge_temperature,
        }
    }

    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if self.max_turns < 4 {
            out.push("max_turns must be at least 4".to_string());
        }
        if !unit(self.motivation_threshold) {
            out.push("motivation_threshold must lie in [0,1]".to_string());
        }
        if !unit(self.belief_threshold) {
            out.push("belief_threshold must lie in [0,1]".to_string());
        }
        if !unit(self.relapse_prob) {
            out.push("relapse_prob must lie in [0,1]".to_string());
        }
        let w = self.multi_action_weights;
        if w.iter().any(|x| !unit(*x)) || ((w[0] + w[1] + w[2]) - 1.0).abs() > 1e-9 {
            out.push("multi_action_weights must be fractions summing to 1".to_string());
        }
        if self.smoothing_epsilon.is_nan() || self.smoothing_epsilon <= 0.0 {
            out.push("smoothing_epsilon must be positive".to_string());
        }
        for (name, v) in [
            ("gen_top_p", self.gen_top_p),
            ("gen_temperature", self.gen_temperature),
            ("judge_top_p", self.judge_top_p),
            ("judge_temperature", self.judge_temperature),
        ] {
            if !(0.0..=2.0).contains(&v) {
                out.push(alloc::format!("{name} must lie in [0,2]"));
            }
        }
        out
    }
}
