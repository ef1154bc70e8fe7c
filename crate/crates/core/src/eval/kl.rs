//! Action-distribution divergence between simulated and real clients.

use alloc::collections::BTreeMap;

use crate::corpus::{ActionCounts, EmpiricalActionTable};
use crate::distribution::ActionDistribution;
use crate::types::{candidate_actions, ActionKind, StateOfChange};

use super::EvalError;

/// `(c + ε) / (N + kε)` over `domain`; `None` when nothing was counted.
pub fn smoothed_over(
    counts: &ActionCounts,
    domain: &[ActionKind],
    epsilon: f64,
) -> Option<ActionDistribution> {
    let total: u64 = domain
        .iter()
        .map(|a| counts.get(a).copied().unwrap_or(0))
        .sum();
    if total == 0 {
        return None;
    }
    ActionDistribution::from_weights(
        domain
            .iter()
            .map(|a| (*a, counts.get(a).copied().unwrap_or(0) as f64 + epsilon)),
    )
    .ok()
}

/// `Σ p(a) ln(p(a)/q(a))` in nats, over the support of `p`.
pub fn kl_divergence(p: &ActionDistribution, q: &ActionDistribution) -> f64 {
    let mut d = 0.0;
    for (a, pa) in p.iter() {
        if pa <= 0.0 {
            continue;
        }
        let qa = q.prob(a);
        if qa <= 0.0 {
            return f64::INFINITY;
        }
        d += pa * libm::log(pa / qa);
    }
    d.max(0.0)
}

/// D(simulated ‖ reference), both smoothed over all twelve actions.
pub fn action_kl(
    simulated: &ActionCounts,
    reference: &ActionCounts,
    epsilon: f64,
) -> Result<f64, EvalError> {
    let p = smoothed_over(simulated, &ActionKind::ALL, epsilon)
        .ok_or(EvalError::EmptyInput("simulated actions"))?;
    let q = smoothed_over(reference, &ActionKind::ALL, epsilon)
        .ok_or(EvalError::EmptyInput("reference actions"))?;
    Ok(kl_divergence(&p, &q))
}

/// Divergence per state, each over that state's candidate set, against the
/// corpus state marginals. States missing on either side are skipped.
pub fn per_state_kl(
    simulated: &BTreeMap<StateOfChange, ActionCounts>,
    reference: &EmpiricalActionTable,
    epsilon: f64,
) -> BTreeMap<StateOfChange, f64> {
    let mut out = BTreeMap::new();
    for state in StateOfChange::ANNOTATABLE {
        let cands = candidate_actions(state);
        let p = simulated
            .get(&state)
            .and_then(|c| smoothed_over(c, cands, epsilon));
        let q = reference
            .marginal(state)
            .and_then(|c| smoothed_over(c, cands, epsilon));
        if let (Some(p), Some(q)) = (p, q) {
            out.insert(state, kl_divergence(&p, &q));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ActionKind::*;

    #[test]
    fn worked_example() {
        let p = ActionDistribution::from_weights([(Deny, 0.5), (Engage, 0.5)]).unwrap();
        let q = ActionDistribution::from_weights([(Deny, 0.25), (Engage, 0.75)]).unwrap();
        assert!((kl_divergence(&p, &q) - 0.143841).abs() < 1e-6);
        assert_eq!(kl_divergence(&p, &p), 0.0);
    }

    #[test]
    fn smoothing_keeps_it_finite() {
        let sim: ActionCounts = [(Deny, 5)].into_iter().collect();
        let real: ActionCounts = [(Engage, 5)].into_iter().collect();
        let d = action_kl(&sim, &real, 1e-6).unwrap();
        assert!(d.is_finite() && d > 0.0);
        assert_eq!(action_kl(&sim, &sim, 1e-6).unwrap(), 0.0);
        assert!(matches!(
            action_kl(&ActionCounts::new(), &real, 1e-6),
            Err(EvalError::EmptyInput(_))
        ));
    }
}
