use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::instance::PersuasionInstance;
use crate::model::policy::{PlatformPolicy, Posterior, SenderPolicy};
use crate::tol;

/// Sender, platform and per-type user utilities.
///
/// For a single posterior `per_type[j]` is `U_R^{theta_j}(p; x)`; for a whole
/// policy it is the expected utility of a type-`j` user, so in both cases
/// `platform = sum_j x_j * per_type[j]` with `x` the posterior (resp. prior).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UtilityReport {
    pub sender: f64,
    pub platform: f64,
    pub per_type: Vec<f64>,
}

/// Greedy sender choice on one posterior: targeted type and lying probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreedyChoice {
    pub index: usize,
    pub lie: f64,
}

/// A type follows a buy recommendation iff `p <= tau`.
pub(crate) fn follows(p: f64, tau: f64) -> bool {
    p <= tau + tol::TIE
}

/// `sum_j x_j 1{p <= tau_j} (mu + (1 - mu) p)`.
pub fn sender_utility(inst: &PersuasionInstance, x: &Posterior, p: f64) -> f64 {
    let buyers: f64 = x
        .weights()
        .iter()
        .zip(inst.thresholds())
        .filter(|(_, &tau)| follows(p, tau))
        .map(|(w, _)| w)
        .sum();
    buyers * inst.sale_value(p)
}

/// Per-type utilities `mu theta_j - (1 - mu) p` for followers, zero otherwise.
pub fn platform_utility(inst: &PersuasionInstance, x: &Posterior, p: f64) -> UtilityReport {
    let mu = inst.mu();
    let per_type: Vec<f64> = inst
        .theta()
        .iter()
        .zip(inst.thresholds())
        .map(|(&theta, &tau)| {
            if follows(p, tau) {
                mu * theta - (1.0 - mu) * p
            } else {
                0.0
            }
        })
        .collect();
    let platform = x.weights().iter().zip(&per_type).map(|(w, u)| w * u).sum();
    UtilityReport {
        sender: sender_utility(inst, x, p),
        platform,
        per_type,
    }
}

pub(crate) fn greedy_index(inst: &PersuasionInstance, x: &[f64]) -> usize {
    let scores: Vec<f64> = (0..x.len())
        .map(|k| x[k..].iter().sum::<f64>() * inst.sale_value(inst.threshold(k)))
        .collect();
    let best = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    scores
        .iter()
        .position(|s| *s >= best - tol::TIE)
        .unwrap_or(0)
}

/// Greedy sender response: maximizes `F_k(x) (mu + (1 - mu) tau_k)` over `k`,
/// breaking ties toward the lowest type.
pub fn greedy_best_response(inst: &PersuasionInstance, x: &Posterior) -> GreedyChoice {
    let index = greedy_index(inst, x.weights());
    GreedyChoice {
        index,
        lie: inst.threshold(index),
    }
}

/// Weight-averaged utilities of a platform policy against a sender policy.
/// The lying probability on a designated truthful segment is taken as zero.
pub fn policy_utilities(
    inst: &PersuasionInstance,
    policy: &PlatformPolicy,
    sender: &SenderPolicy,
) -> Result<UtilityReport> {
    if sender.len() != policy.len() {
        return Err(Error::SegmentCountMismatch {
            got: sender.len(),
            expected: policy.len(),
        });
    }
    let n = inst.n();
    let mut total = UtilityReport {
        sender: 0.0,
        platform: 0.0,
        per_type: vec![0.0; n],
    };
    for (i, seg) in policy.segments().iter().enumerate() {
        let p = if policy.is_truthful(i) { 0.0 } else { sender.lie(i) };
        let r = platform_utility(inst, &seg.posterior, p);
        total.sender += seg.weight * r.sender;
        total.platform += seg.weight * r.platform;
        for (j, u) in r.per_type.iter().enumerate() {
            total.per_type[j] += seg.weight * seg.posterior.weights()[j] * u;
        }
    }
    for (u, &prior) in total.per_type.iter_mut().zip(inst.prior()) {
        *u = if prior > 0.0 { *u / prior } else { 0.0 };
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(theta: Vec<f64>, prior: Vec<f64>) -> PersuasionInstance {
        PersuasionInstance::new(theta, prior, 0.5).unwrap()
    }

    fn post(w: &[f64]) -> Posterior {
        Posterior::new(w.to_vec()).unwrap()
    }

    #[test]
    fn sender_utility_examples() {
        let a = inst(vec![0.2, 0.8], vec![0.2, 0.8]);
        assert!((sender_utility(&a, &post(&[0.2, 0.8]), 0.8) - 0.72).abs() < 1e-12);
        assert!((sender_utility(&a, &post(&[0.2, 0.8]), 0.0) - 0.5).abs() < 1e-15);
        assert_eq!(sender_utility(&a, &post(&[1.0, 0.0]), 1.0), 0.0);
    }

    #[test]
    fn platform_utility_examples() {
        let a = inst(vec![0.2, 0.8], vec![0.2, 0.8]);
        let r = platform_utility(&a, &post(&[0.2, 0.8]), 0.8);
        assert!(r.platform.abs() < 1e-12);
        assert_eq!(r.per_type[0], 0.0);

        let b = inst(vec![0.2, 0.6], vec![0.5, 0.5]);
        let r = platform_utility(&b, &post(&[0.5, 0.5]), 0.2);
        assert!((r.platform - 0.1).abs() < 1e-12);
        assert!(r.per_type[0].abs() < 1e-12);
        assert!((r.per_type[1] - 0.2).abs() < 1e-12);

        let r = platform_utility(&b, &post(&[1.0, 0.0]), b.threshold(0));
        assert!(r.platform.abs() < 1e-12);
    }

    #[test]
    fn greedy_examples() {
        let a = inst(vec![0.2, 0.8], vec![0.2, 0.8]);
        let g = greedy_best_response(&a, &post(&[0.2, 0.8]));
        assert_eq!(g.index, 1);
        assert!((g.lie - 0.8).abs() < 1e-15);
        assert_eq!(greedy_best_response(&a, &post(&[1.0, 0.0])).index, 0);
        // exact indifference between both types resolves to the lower one
        assert_eq!(greedy_best_response(&a, &post(&[1.0 / 3.0, 2.0 / 3.0])).index, 0);

        let b = inst(vec![0.2, 0.6], vec![0.5, 0.5]);
        let g = greedy_best_response(&b, &post(&[0.5, 0.5]));
        assert_eq!(g.index, 0);
        assert!((g.lie - 0.2).abs() < 1e-15);
    }

    #[test]
    fn policy_utility_examples() {
        let a = inst(vec![0.2, 0.8], vec![0.2, 0.8]);
        let single = PlatformPolicy::uninformative(&a);
        let r = policy_utilities(&a, &single, &SenderPolicy::greedy(&a, &single)).unwrap();
        assert!((r.sender - 0.72).abs() < 1e-12);
        assert!(r.platform.abs() < 1e-12);

        let split = PlatformPolicy::new(
            &a,
            vec![(0.6, post(&[1.0 / 3.0, 2.0 / 3.0])), (0.4, post(&[0.0, 1.0]))],
            None,
        )
        .unwrap();
        let p = SenderPolicy::new(vec![0.2, 0.8]).unwrap();
        let r = policy_utilities(&a, &split, &p).unwrap();
        assert!((r.sender - 0.72).abs() < 1e-12);
        assert!((r.platform - 0.12).abs() < 1e-12);
        let weighted: f64 = r.per_type.iter().zip(a.prior()).map(|(u, x)| u * x).sum();
        assert!((weighted - r.platform).abs() < 1e-12);

        let full = PlatformPolicy::full_revelation(&a);
        let r = policy_utilities(&a, &full, &SenderPolicy::greedy(&a, &full)).unwrap();
        assert!(r.platform.abs() < 1e-12);
        assert!((r.sender - 0.84).abs() < 1e-12);

        let short = SenderPolicy::new(vec![0.2]).unwrap();
        assert!(matches!(
            policy_utilities(&a, &split, &short),
            Err(Error::SegmentCountMismatch { .. })
        ));
    }
}
