use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{
    dot, is_lowest_type_targeting, sender_utility, PersuasionInstance, PlatformPolicy, Posterior,
    RepeatedParams, SenderPolicy,
};
use crate::tol;

/// A platform policy with at most one segment on which the sender must not
/// lie. No truthful segment (`alpha^T = 0`) is the plain one-shot policy.
#[derive(Debug, Clone, PartialEq)]
pub struct RepeatedPolicy {
    base: PlatformPolicy,
}

impl RepeatedPolicy {
    pub fn new(base: PlatformPolicy) -> Self {
        Self { base }
    }

    /// Two-segment policy `alpha x^T + (1 - alpha) x^F = x*`. Either segment is
    /// omitted when its weight is zero.
    pub fn from_split(
        inst: &PersuasionInstance,
        alpha: f64,
        truthful: Posterior,
        rest: Posterior,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::WeightsNotNormalized(alpha));
        }
        let truthful_index = (alpha > 0.0).then_some(0);
        let base = PlatformPolicy::new(
            inst,
            vec![(alpha, truthful), (1.0 - alpha, rest)],
            truthful_index,
        )?;
        Ok(Self { base })
    }

    pub fn policy(&self) -> &PlatformPolicy {
        &self.base
    }

    pub fn into_policy(self) -> PlatformPolicy {
        self.base
    }

    pub fn alpha(&self) -> f64 {
        self.base.truthful_weight()
    }

    pub fn truthful_posterior(&self) -> Option<&Posterior> {
        self.base.truthful_posterior()
    }

    /// `x^F`, the mean of the non-truthful part.
    pub fn rest_mean(&self) -> Option<Posterior> {
        self.base.non_truthful_mean()
    }
}

/// `V(sigma) = alpha^T mu + (1 - alpha^T) U_S(sigma_F, p)` with `p` the
/// sender's lying probabilities on the non-truthful segments.
pub fn truthful_value(
    inst: &PersuasionInstance,
    policy: &RepeatedPolicy,
    sender_on_rest: &SenderPolicy,
) -> Result<f64> {
    let base = policy.policy();
    if sender_on_rest.len() != base.len() {
        return Err(Error::SegmentCountMismatch {
            got: sender_on_rest.len(),
            expected: base.len(),
        });
    }
    let mut value = policy.alpha() * inst.mu();
    for (i, seg) in base.segments().iter().enumerate() {
        if !base.is_truthful(i) {
            value += seg.weight * sender_utility(inst, &seg.posterior, sender_on_rest.lie(i));
        }
    }
    Ok(value)
}

/// `V(sigma)` against the greedy sender on non-truthful segments.
pub fn sender_value(inst: &PersuasionInstance, policy: &RepeatedPolicy) -> f64 {
    let sender = SenderPolicy::truthful(inst, policy.policy());
    truthful_value(inst, policy, &sender).expect("sender built from the same policy")
}

pub(crate) fn rhs_from_tail(
    inst: &PersuasionInstance,
    params: RepeatedParams,
    tail: f64,
    k: usize,
) -> Result<f64> {
    if !(tail > 0.0) {
        return Err(Error::ZeroTail(k));
    }
    let RepeatedParams { delta, u_bar } = params;
    let mu = inst.mu();
    let p_k = inst.threshold(k);
    let odds = mu / (1.0 - mu);
    Ok((1.0 - delta) / delta * (odds * (tail - 1.0) / (tail * p_k) + 1.0) + u_bar)
}

/// Right-hand side of the incentive constraint against deviating to the
/// threshold of type `k` on the truthful posterior:
/// `(1-d)/d * (mu/(1-mu) * (F_k - 1)/(F_k p_k) + 1) + u_bar`.
pub fn ic_rhs(
    inst: &PersuasionInstance,
    params: RepeatedParams,
    truthful: &Posterior,
    k: usize,
) -> Result<f64> {
    rhs_from_tail(inst, params, truthful.tail_mass(k), k)
}

/// IC verdict with per-type slack `V(sigma) - rhs_k` (`None` for skipped
/// zero-tail constraints). Empty when there is no truthful segment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IcCertificate {
    pub compatible: bool,
    pub value: f64,
    pub slacks: Vec<Option<f64>>,
}

impl IcCertificate {
    pub fn min_slack(&self) -> Option<f64> {
        self.slacks.iter().flatten().cloned().reduce(f64::min)
    }
}

pub fn is_incentive_compatible(
    inst: &PersuasionInstance,
    policy: &RepeatedPolicy,
    params: RepeatedParams,
) -> IcCertificate {
    let value = sender_value(inst, policy);
    let Some(x_t) = policy.truthful_posterior() else {
        return IcCertificate {
            compatible: true,
            value,
            slacks: Vec::new(),
        };
    };
    let slacks: Vec<Option<f64>> = (0..inst.n())
        .map(|k| ic_rhs(inst, params, x_t, k).ok().map(|rhs| value - rhs))
        .collect();
    let compatible = slacks.iter().flatten().all(|s| *s >= -tol::TIE);
    IcCertificate {
        compatible,
        value,
        slacks,
    }
}

/// Net discounted gain of lying with probability `p_k` for one period on the
/// truthful posterior and returning to truthful play afterwards. Positive
/// means the deviation pays.
pub fn deviation_value(
    inst: &PersuasionInstance,
    policy: &RepeatedPolicy,
    params: RepeatedParams,
    k: usize,
) -> Result<f64> {
    let x_t = policy
        .truthful_posterior()
        .ok_or_else(|| Error::InconsistentPolicy("no truthful segment".into()))?;
    let tail = x_t.tail_mass(k);
    if !(tail > 0.0) {
        return Err(Error::ZeroTail(k));
    }
    let value = sender_value(inst, policy);
    Ok(deviation_gain(inst, params, tail, k, value))
}

pub(crate) fn deviation_gain(
    inst: &PersuasionInstance,
    params: RepeatedParams,
    tail: f64,
    k: usize,
    value: f64,
) -> f64 {
    let RepeatedParams { delta, u_bar } = params;
    let mu = inst.mu();
    let p_k = inst.threshold(k);
    let caught = (1.0 - mu) * tail * p_k;
    let deviate = (1.0 - delta) * tail * inst.sale_value(p_k)
        + delta * (caught * u_bar + (1.0 - caught) * value);
    let comply = (1.0 - delta) * mu + delta * value;
    deviate - comply
}

/// Closed-form utilities of a lowest-type-targeting policy. The conditional
/// quantities on the non-truthful part are `None` when `alpha^T = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedForms {
    pub sender_rest: Option<f64>,
    pub sender_value: f64,
    pub platform_rest: Option<f64>,
    pub platform: f64,
}

pub fn closed_form_report(inst: &PersuasionInstance, policy: &RepeatedPolicy) -> Result<ClosedForms> {
    let base = policy.policy();
    if !is_lowest_type_targeting(inst, base) {
        return Err(Error::NotLowestTypeTargeting);
    }
    let mu = inst.mu();
    let alpha = policy.alpha();
    let greedy = SenderPolicy::greedy(inst, base);
    let mut lie_mass = 0.0;
    let mut type_mass = 0.0;
    for (i, seg) in base.segments().iter().enumerate() {
        if base.is_truthful(i) {
            continue;
        }
        lie_mass += seg.weight * greedy.lie(i);
        type_mass += seg.weight * dot(seg.posterior.weights(), inst.theta());
    }
    let rest = 1.0 - alpha;
    let has_rest = base.len() > usize::from(base.truthful_index().is_some());
    Ok(ClosedForms {
        sender_rest: has_rest.then(|| mu + (1.0 - mu) / rest * lie_mass),
        sender_value: mu + (1.0 - mu) * lie_mass,
        platform_rest: has_rest.then(|| mu / rest * type_mass - (1.0 - mu) / rest * lie_mass),
        platform: inst.first_best() - (1.0 - mu) * lie_mass,
    })
}
