use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tol;

/// Discounting and punishment parameters of the reputation game.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepeatedParams {
    pub delta: f64,
    pub u_bar: f64,
}

/// Unvalidated instance data, as read from a file or built by hand.
#[derive(Debug, Clone, PartialEq)]
pub struct RawInstance {
    pub theta: Vec<f64>,
    pub prior: Vec<f64>,
    pub mu: f64,
    pub repeated: Option<RepeatedParams>,
}

/// A validated persuasion platform instance.
///
/// Types are strictly increasing, the prior lies on the simplex and every
/// persuasion threshold is a valid probability. Construct through
/// [`validate_instance`] or [`PersuasionInstance::new`].
#[derive(Debug, Clone, PartialEq)]
pub struct PersuasionInstance {
    theta: Vec<f64>,
    prior: Vec<f64>,
    mu: f64,
    thresholds: Vec<f64>,
    repeated: Option<RepeatedParams>,
}

/// `mu * theta / (1 - mu)`: the largest lying probability at which a user of
/// type `theta` still follows a buy recommendation.
pub fn persuasion_threshold(theta: f64, mu: f64) -> f64 {
    mu / (1.0 - mu) * theta
}

pub(crate) fn check_simplex(what: &'static str, v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::PriorNotSimplex {
            what,
            reason: "empty vector".into(),
        });
    }
    if let Some((i, x)) = v.iter().enumerate().find(|(_, x)| !x.is_finite() || **x < 0.0) {
        return Err(Error::PriorNotSimplex {
            what,
            reason: format!("entry {i} is {x}"),
        });
    }
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() > tol::SIMPLEX {
        return Err(Error::PriorNotSimplex {
            what,
            reason: format!("entries sum to {sum}"),
        });
    }
    Ok(())
}

pub fn validate_instance(raw: RawInstance) -> Result<PersuasionInstance> {
    let RawInstance {
        theta,
        prior,
        mu,
        repeated,
    } = raw;
    if prior.len() != theta.len() {
        return Err(Error::LengthMismatch {
            what: "prior",
            got: prior.len(),
            expected: theta.len(),
        });
    }
    if theta.is_empty() {
        return Err(Error::LengthMismatch {
            what: "theta",
            got: 0,
            expected: 1,
        });
    }
    for (i, &t) in theta.iter().enumerate() {
        let prev = if i == 0 { 0.0 } else { theta[i - 1] };
        if !t.is_finite() || t <= prev {
            return Err(Error::NonIncreasingTheta { index: i });
        }
    }
    check_simplex("prior", &prior)?;
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::MuOutOfRange(mu));
    }
    let top = mu * (1.0 + theta[theta.len() - 1]);
    if top > 1.0 + tol::SIMPLEX {
        return Err(Error::ThresholdExceedsOne(top));
    }
    let thresholds = theta.iter().map(|&t| persuasion_threshold(t, mu)).collect();
    let mut inst = PersuasionInstance {
        theta,
        prior,
        mu,
        thresholds,
        repeated: None,
    };
    if let Some(params) = repeated {
        inst = inst.with_repeated(params.delta, params.u_bar)?;
    }
    Ok(inst)
}

impl PersuasionInstance {
    pub fn new(theta: Vec<f64>, prior: Vec<f64>, mu: f64) -> Result<Self> {
        validate_instance(RawInstance {
            theta,
            prior,
            mu,
            repeated: None,
        })
    }

    /// Attaches reputation-game parameters, checking `0 < delta < 1` and
    /// `u_bar < U_S(p*; x*)`.
    pub fn with_repeated(mut self, delta: f64, u_bar: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::DeltaOutOfRange(delta));
        }
        let bound = self.uninformed_sender_utility();
        if !u_bar.is_finite() || u_bar >= bound - tol::TIE {
            return Err(Error::PunishmentTooHigh { u_bar, bound });
        }
        self.repeated = Some(RepeatedParams { delta, u_bar });
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.theta.len()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn repeated(&self) -> Option<RepeatedParams> {
        self.repeated
    }

    /// Persuasion threshold of type `j` (0-based).
    pub fn threshold(&self, j: usize) -> f64 {
        self.thresholds[j]
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    /// Sender revenue per sale when lying with probability `p`.
    pub fn sale_value(&self, p: f64) -> f64 {
        self.mu + (1.0 - self.mu) * p
    }

    /// `mu * sum_j x*_j theta_j`, the user utility under full truthfulness.
    pub fn first_best(&self) -> f64 {
        self.mu * dot(&self.prior, &self.theta)
    }

    /// `mu * (1 + sum_j x*_j theta_j)`, the joint sender + user utility when
    /// every user buys.
    pub fn total_welfare(&self) -> f64 {
        self.mu * (1.0 + dot(&self.prior, &self.theta))
    }

    /// `U_S(p*; x*)`: greedy sender utility without any user information.
    pub fn uninformed_sender_utility(&self) -> f64 {
        let k = crate::model::greedy_index(self, &self.prior);
        let tail: f64 = self.prior[k..].iter().sum();
        tail * self.sale_value(self.thresholds[k])
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
