//! JSON file formats. Numbers are written with 12 significant digits.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cli::CliError;
use crate::error::Error;
use crate::model::{
    validate_instance, PersuasionInstance, PlatformPolicy, Posterior, RawInstance, RepeatedParams,
    SenderPolicy, UtilityReport,
};
use crate::repeated::RepeatedPolicy;
use crate::segmentation::Market;

/// Rounds to 12 significant digits; `-0.0` becomes `0.0`.
pub fn canonical(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    if rounded == 0.0 {
        0.0
    } else {
        rounded
    }
}

pub fn canonical_vec(xs: &[f64]) -> Vec<f64> {
    xs.iter().cloned().map(canonical).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepeatedBlock {
    pub delta: f64,
    pub u_bar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub theta: Vec<f64>,
    pub prior: Vec<f64>,
    pub mu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repeated: Option<RepeatedBlock>,
}

impl InstanceFile {
    pub fn validate(self) -> Result<PersuasionInstance, Error> {
        validate_instance(RawInstance {
            theta: self.theta,
            prior: self.prior,
            mu: self.mu,
            repeated: self.repeated.map(|r| RepeatedParams {
                delta: r.delta,
                u_bar: r.u_bar,
            }),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketFile {
    pub values: Vec<f64>,
    pub masses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentEntry {
    pub weight: f64,
    pub posterior: Vec<f64>,
    pub lie_prob: f64,
    #[serde(default)]
    pub truthful: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtilitiesBlock {
    pub sender: f64,
    pub platform: f64,
    pub per_type: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyFile {
    pub segments: Vec<SegmentEntry>,
    pub utilities: UtilitiesBlock,
}

/// Files are rounded to 12 digits, so sums are only checked to this.
const FILE_SUM_SLACK: f64 = 1e-9;

fn renormalize(what: &'static str, v: &[f64]) -> Result<Vec<f64>, Error> {
    if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::PriorNotSimplex {
            what,
            reason: "negative or non-finite entry".into(),
        });
    }
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() > FILE_SUM_SLACK {
        return Err(Error::PriorNotSimplex {
            what,
            reason: format!("entries sum to {sum}"),
        });
    }
    Ok(v.iter().map(|x| x / sum).collect())
}

impl PolicyFile {
    pub fn from_parts(
        policy: &PlatformPolicy,
        sender: &SenderPolicy,
        utilities: &UtilityReport,
    ) -> Self {
        let segments = policy
            .segments()
            .iter()
            .enumerate()
            .map(|(i, s)| SegmentEntry {
                weight: canonical(s.weight),
                posterior: canonical_vec(s.posterior.weights()),
                lie_prob: if policy.is_truthful(i) { 0.0 } else { canonical(sender.lie(i)) },
                truthful: policy.is_truthful(i),
            })
            .collect();
        Self {
            segments,
            utilities: UtilitiesBlock {
                sender: canonical(utilities.sender),
                platform: canonical(utilities.platform),
                per_type: canonical_vec(&utilities.per_type),
            },
        }
    }

    /// Builds the policies, renormalizing the rounded weights and posteriors.
    pub fn to_policies(
        &self,
        inst: &PersuasionInstance,
    ) -> Result<(RepeatedPolicy, SenderPolicy), Error> {
        let truthful: Vec<usize> = (0..self.segments.len())
            .filter(|&i| self.segments[i].truthful)
            .collect();
        if truthful.len() > 1 {
            return Err(Error::InconsistentPolicy("more than one truthful segment".into()));
        }
        let weights: Vec<f64> = self.segments.iter().map(|s| s.weight).collect();
        let weights = renormalize("segment weights", &weights)
            .map_err(|_| Error::WeightsNotNormalized(weights.iter().sum()))?;
        let segments = self
            .segments
            .iter()
            .zip(weights)
            .map(|(s, w)| Ok((w, Posterior::new(renormalize("posterior", &s.posterior)?)?)))
            .collect::<Result<Vec<_>, Error>>()?;
        let lies = self.segments.iter().map(|s| s.lie_prob);
        let policy = PlatformPolicy::new(inst, segments, truthful.first().copied())?;
        // zero-weight segments are dropped by the policy constructor
        let lies: Vec<f64> = lies
            .zip(&self.segments)
            .filter(|(_, s)| s.weight != 0.0)
            .map(|(p, _)| p)
            .collect();
        Ok((RepeatedPolicy::new(policy), SenderPolicy::new(lies)?))
    }

    /// Largest coordinate gap between the weighted posterior mean and `prior`.
    pub fn plausibility_gap(&self, prior: &[f64]) -> f64 {
        let mut mean = vec![0.0; prior.len()];
        for s in &self.segments {
            for (m, x) in mean.iter_mut().zip(&s.posterior) {
                *m += s.weight * x;
            }
        }
        let shape_ok = self.segments.iter().all(|s| s.posterior.len() == prior.len());
        if !shape_ok {
            return f64::INFINITY;
        }
        mean.iter()
            .zip(prior)
            .map(|(m, p)| (m - p).abs())
            .fold(0.0, f64::max)
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::Malformed {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("file types serialize");
    text.push('\n');
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_instance(path: &Path) -> Result<PersuasionInstance, CliError> {
    let file: InstanceFile = read_json(path)?;
    file.validate().map_err(CliError::Invalid)
}

pub fn read_market(path: &Path) -> Result<Market, CliError> {
    let file: MarketFile = read_json(path)?;
    Market::new(file.values, file.masses).map_err(CliError::Invalid)
}
