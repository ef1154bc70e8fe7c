use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cell::RefCell;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{BackendError, ChatBackend, ChatSession, SamplingParams};
use crate::types::ActionKind;

/// Hit rates for the randomized judge decisions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticRates {
    /// Chance a motivation check scores at least 50%.
    pub motivation: f64,
    /// Chance a belief check scores at least 50%.
    pub belief: f64,
    pub entail: f64,
    pub conclude: f64,
}

impl Default for SyntheticRates {
    fn default() -> Self {
        Self {
            motivation: 0.3,
            belief: 0.4,
            entail: 0.3,
            conclude: 0.1,
        }
    }
}

/// Seeded backend that answers every engine, judge, counselor and moderator
/// prompt with a random but well-formed reply. Meant for stress tests.
#[derive(Debug)]
pub struct SyntheticBackend {
    rng: RefCell<ChaCha8Rng>,
    rates: SyntheticRates,
}

impl SyntheticBackend {
    pub fn new(seed: u64) -> Self {
        Self::with_rates(seed, SyntheticRates::default())
    }

    pub fn with_rates(seed: u64, rates: SyntheticRates) -> Self {
        Self {
            rng: RefCell::new(ChaCha8Rng::seed_from_u64(seed)),
            rates,
        }
    }

    fn score(&self, hit_rate: f64) -> String {
        let mut rng = self.rng.borrow_mut();
        let s: u32 = if rng.random_bool(hit_rate) {
            rng.random_range(50..=100)
        } else {
            rng.random_range(0..50)
        };
        format!("Analysis: synthetic.\nScore: {s}%")
    }

    fn distribution(&self, prompt: &str) -> String {
        let mut rng = self.rng.borrow_mut();
        let parts: Vec<String> = prompt
            .lines()
            .filter_map(|l| l.strip_prefix("- ")?.split_once(": "))
            .filter(|(name, _)| name.parse::<ActionKind>().is_ok())
            .map(|(name, _)| format!("\"{name}\": {}", rng.random_range(1..100u32)))
            .collect();
        format!("{{{}}}", parts.join(", "))
    }

    fn pick_item(&self, prompt: &str) -> String {
        let items: Vec<&str> = prompt
            .split_once("Personas/Beliefs/Plans:\n")
            .map(|(_, rest)| rest.split("\nAction:").next().unwrap_or(""))
            .unwrap_or("")
            .lines()
            .filter_map(|l| l.strip_prefix("- "))
            .collect();
        if items.is_empty() {
            return "None of them.".to_string();
        }
        let i = self.rng.borrow_mut().random_range(0..items.len());
        items[i].to_string()
    }

    fn coin(&self, p: f64) -> bool {
        self.rng.borrow_mut().random_bool(p)
    }
}

impl ChatBackend for SyntheticBackend {
    fn chat(&self, session: &ChatSession, _params: SamplingParams) -> Result<String, BackendError> {
        let last = session
            .last_message()
            .map(|m| m.content.as_str())
            .unwrap_or("");
        let system = session.system_prompt().unwrap_or("");
        let reply = if last.contains("mention the Client's motivation?") {
            self.score(self.rates.motivation)
        } else if last.contains("relieve the Client's concern?") {
            self.score(self.rates.belief)
        } else if last.contains("premise entails the hypothesis") {
            if self.coin(self.rates.entail) {
                "entail"
            } else {
                "not entail"
            }
            .to_string()
        } else if last.contains("allocate probabilities") {
            self.distribution(last)
        } else if last.contains("select the most appropriate") {
            self.pick_item(last)
        } else if last.contains("Should the conversation be concluded?") {
            if self.coin(self.rates.conclude) {
                "Answer: Yes"
            } else {
                "Answer: No"
            }
            .to_string()
        } else if system.contains("play as a Counselor") {
            let n = self.rng.borrow_mut().random_range(0..1000u32);
            format!("Counselor: Tell me more about that ({n}).")
        } else {
            let n = self.rng.borrow_mut().random_range(0..1000u32);
            format!("Client: I see what you mean ({n}).")
        };
        Ok(reply)
    }
}
