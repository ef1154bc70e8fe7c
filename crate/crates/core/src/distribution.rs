//! Categorical distributions over client actions: merging and sampling.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::types::ActionKind;

/// Tolerance for "sums to one".
pub const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DistributionError {
    #[error("distribution has no actions")]
    Empty,
    #[error("negative or non-finite mass for {0}")]
    InvalidMass(ActionKind),
    #[error("every action has zero mass")]
    AllZero,
    #[error("distributions are defined over different action sets")]
    SupportMismatch,
}

/// A normalized distribution over a fixed action domain.
///
/// The domain (the map's keys) may include zero-mass actions; two
/// distributions are comparable only when their domains agree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionDistribution {
    probs: BTreeMap<ActionKind, f64>,
}

impl ActionDistribution {
    /// Normalizes nonnegative weights into a distribution.
    pub fn from_weights<I>(weights: I) -> Result<Self, DistributionError>
    where
        I: IntoIterator<Item = (ActionKind, f64)>,
    {
        let mut probs = BTreeMap::new();
        for (a, w) in weights {
            if !w.is_finite() || w < 0.0 {
                return Err(DistributionError::InvalidMass(a));
            }
            *probs.entry(a).or_insert(0.0) += w;
        }
        if probs.is_empty() {
            return Err(DistributionError::Empty);
        }
        let total: f64 = probs.values().sum();
        if total <= 0.0 {
            return Err(DistributionError::AllZero);
        }
        for v in probs.values_mut() {
            *v /= total;
        }
        Ok(Self { probs })
    }

    pub fn uniform(actions: &[ActionKind]) -> Result<Self, DistributionError> {
        Self::from_weights(actions.iter().map(|a| (*a, 1.0)))
    }

    /// A distribution with all mass on one action.
    pub fn point(action: ActionKind) -> Self {
        let mut probs = BTreeMap::new();
        probs.insert(action, 1.0);
        Self { probs }
    }

    pub fn prob(&self, action: ActionKind) -> f64 {
        self.probs.get(&action).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ActionKind, f64)> + '_ {
        self.probs.iter().map(|(a, p)| (*a, *p))
    }

    pub fn domain(&self) -> impl Iterator<Item = ActionKind> + '_ {
        self.probs.keys().copied()
    }

    /// Actions with strictly positive mass.
    pub fn support(&self) -> impl Iterator<Item = ActionKind> + '_ {
        self.probs
            .iter()
            .filter(|(_, p)| **p > 0.0)
            .map(|(a, _)| *a)
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.probs.values().sum()
    }

    pub fn same_domain(&self, other: &Self) -> bool {
        self.probs.keys().eq(other.probs.keys())
    }

    /// Elementwise mean of two distributions over the same domain.
    pub fn merge(&self, other: &Self) -> Result<Self, DistributionError> {
        if !self.same_domain(other) {
            return Err(DistributionError::SupportMismatch);
        }
        let probs = self
            .probs
            .iter()
            .map(|(a, p)| (*a, 0.5 * p + 0.5 * other.probs[a]))
            .collect();
        Ok(Self { probs })
    }

    /// Draws one action proportionally to its mass.
    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> ActionKind {
        let entries: Vec<(ActionKind, f64)> = self.iter().collect();
        entries[weighted_index(&entries, rng)].0
    }

    /// Draws up to `k` distinct actions without replacement, each draw
    /// proportional to the remaining mass. `k` is capped at the support size.
    pub fn sample_distinct<R: RngCore + ?Sized>(&self, k: usize, rng: &mut R) -> Vec<ActionKind> {
        let mut remaining: Vec<(ActionKind, f64)> = self.iter().filter(|(_, p)| *p > 0.0).collect();
        let k = k.min(remaining.len());
        let mut out = Vec::with_capacity(k);
        for _ in 0..k {
            let i = weighted_index(&remaining, rng);
            out.push(remaining.remove(i).0);
        }
        out
    }
}

fn weighted_index<R: RngCore + ?Sized>(entries: &[(ActionKind, f64)], rng: &mut R) -> usize {
    let total: f64 = entries.iter().map(|(_, p)| p).sum();
    let mut u = rng.random::<f64>() * total;
    let mut last_positive = 0;
    for (i, (_, p)) in entries.iter().enumerate() {
        if *p <= 0.0 {
            continue;
        }
        last_positive = i;
        if u < *p {
            return i;
        }
        u -= p;
    }
    last_positive
}

/// Draws how many actions one utterance should carry: 1, 2 or 3 with the
/// given weights.
pub fn sample_action_count<R: RngCore + ?Sized>(weights: &[f64; 3], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i + 1;
        }
        u -= w;
    }
    3
}
