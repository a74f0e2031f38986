//! Probabilities to valuations: the persuasion problem as a market.
//!
//! Type `theta_j` becomes the valuation `mu (1 + theta_j)`, posteriors become
//! markets and a lying probability `p` becomes the price `mu + (1 - mu) p`.
//! Sender utility is producer surplus and user utility is consumer surplus.

use crate::error::{Error, Result};
use crate::model::{
    platform_utility, policy_utilities, PersuasionInstance, PlatformPolicy, Posterior, SenderPolicy,
    UtilityReport,
};
use crate::segmentation::{bbm_segmentation, Market, Segmentation};

#[derive(Debug, Clone, PartialEq)]
pub struct ReductionMap {
    mu: f64,
    market: Market,
}

impl ReductionMap {
    pub fn market(&self) -> &Market {
        &self.market
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Valuation-grid market with masses `x`.
    pub fn market_of(&self, x: &Posterior) -> Result<Market> {
        Market::new(self.market.values().to_vec(), x.weights().to_vec())
    }
}

pub fn to_market(inst: &PersuasionInstance) -> ReductionMap {
    let mu = inst.mu();
    let values = inst.theta().iter().map(|t| mu * (1.0 + t)).collect();
    let market = Market::new(values, inst.prior().to_vec())
        .expect("validated instance maps to a valid market");
    ReductionMap { mu, market }
}

pub fn lie_to_price(p: f64, mu: f64) -> f64 {
    mu + (1.0 - mu) * p
}

pub fn price_to_lie(price: f64, mu: f64) -> Result<f64> {
    if price < mu {
        return Err(Error::PriceBelowMu { price, mu });
    }
    Ok((price - mu) / (1.0 - mu))
}

/// Turns a priced segmentation of the mapped market into a platform policy
/// and the matching sender policy, segment by segment.
pub fn pull_back(
    inst: &PersuasionInstance,
    seg: &Segmentation,
) -> Result<(PlatformPolicy, SenderPolicy)> {
    if seg.values().len() != inst.n() {
        return Err(Error::LengthMismatch {
            what: "segmentation grid",
            got: seg.values().len(),
            expected: inst.n(),
        });
    }
    let mut segments = Vec::with_capacity(seg.len());
    let mut lies = Vec::with_capacity(seg.len());
    for s in seg.segments() {
        segments.push((s.weight, Posterior::new(s.masses.clone())?));
        // the threshold of the priced type, i.e. price_to_lie(v_k) without rounding
        lies.push(inst.threshold(s.price));
    }
    let policy = PlatformPolicy::new(inst, segments, None)?;
    let sender = SenderPolicy::new(lies)?;
    if sender.len() != policy.len() {
        return Err(Error::SegmentCountMismatch {
            got: sender.len(),
            expected: policy.len(),
        });
    }
    Ok((policy, sender))
}

#[derive(Debug, Clone)]
pub struct OneShotSolution {
    pub policy: PlatformPolicy,
    pub sender: SenderPolicy,
    pub utilities: UtilityReport,
}

/// User-optimal one-shot policy: segment the mapped market and pull back.
pub fn solve_one_shot(inst: &PersuasionInstance) -> Result<OneShotSolution> {
    let map = to_market(inst);
    let seg = bbm_segmentation(map.market())?;
    let (policy, sender) = pull_back(inst, &seg)?;
    let utilities = policy_utilities(inst, &policy, &sender)?;
    Ok(OneShotSolution {
        policy,
        sender,
        utilities,
    })
}

/// Checks `U_S(p; x) = W_S(phi; pi)` and `U_R^j(p; x) = W_j(phi)` for every
/// type, both within 1e-12, evaluating the market side from scratch.
pub fn reduction_identity_holds(inst: &PersuasionInstance, map: &ReductionMap, x: &Posterior, p: f64) -> bool {
    const EPS: f64 = 1e-12;
    let persuasion = platform_utility(inst, x, p);
    let price = lie_to_price(p, map.mu);
    let values = map.market.values();
    let producer: f64 = values
        .iter()
        .zip(x.weights())
        .filter(|(v, _)| price <= **v + EPS)
        .map(|(_, w)| w * price)
        .sum();
    if (producer - persuasion.sender).abs() > EPS {
        return false;
    }
    values.iter().zip(&persuasion.per_type).all(|(&v, &u)| {
        let consumer = if price <= v + EPS { v - price } else { 0.0 };
        (consumer - u).abs() <= EPS
    })
}
