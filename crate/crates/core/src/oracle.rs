//! Brute-force baselines for tests and the `verify` command.
//!
//! Nothing here calls the closed forms or search code of the other modules:
//! utilities are summed branch by branch and optima are found by scanning
//! grids.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{PersuasionInstance, Posterior, UtilityReport};
use crate::segmentation::Market;

/// Indifference slack when comparing expected payoffs.
const EPS: f64 = 1e-12;

/// Three-segment searches are skipped when the grid has more cells than this.
const MAX_THREE_SEGMENT_CELLS: u64 = 20_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    /// Grid intervals per axis; axis `j` has `resolution + 1` points.
    pub resolution: usize,
    /// 2 or 3.
    pub max_segments: usize,
}

impl GridSpec {
    pub fn new(resolution: usize, max_segments: usize) -> Result<Self> {
        if resolution < 8 {
            return Err(Error::InvalidConfig(format!(
                "oracle resolution {resolution} is below 8"
            )));
        }
        if !(2..=3).contains(&max_segments) {
            return Err(Error::InvalidConfig(format!(
                "oracle segment count {max_segments} is not 2 or 3"
            )));
        }
        Ok(Self {
            resolution,
            max_segments,
        })
    }

    /// Largest change in sender value between neighbouring mass-split cells.
    pub fn value_step(&self, prior: &[f64]) -> f64 {
        prior.iter().cloned().fold(0.0, f64::max) / self.resolution as f64
    }
}

/// Expected utilities of one posterior by summing over type, quality and
/// recommendation; the user buys after a recommendation exactly when the
/// posterior expected payoff of buying is nonnegative.
pub fn enumerate_one_shot_utilities(
    inst: &PersuasionInstance,
    x: &Posterior,
    p: f64,
) -> UtilityReport {
    let mu = inst.mu();
    let mut sender = 0.0;
    let mut per_type = vec![0.0; inst.n()];
    for (j, (&theta, &weight)) in inst.theta().iter().zip(x.weights()).enumerate() {
        // (probability of branch given type, quality is high, recommended)
        let branches = [
            (mu, true, true),
            ((1.0 - mu) * p, false, true),
            ((1.0 - mu) * (1.0 - p), false, false),
        ];
        let pr_rec = mu + (1.0 - mu) * p;
        let pr_high_given_rec = mu / pr_rec;
        let buy_payoff = pr_high_given_rec * theta - (1.0 - pr_high_given_rec);
        let buys = buy_payoff * pr_rec >= -EPS;
        for (pr, high, rec) in branches {
            if rec && buys {
                sender += weight * pr;
                per_type[j] += pr * if high { theta } else { -1.0 };
            }
        }
    }
    let platform = per_type.iter().zip(x.weights()).map(|(u, w)| u * w).sum();
    UtilityReport {
        sender,
        platform,
        per_type,
    }
}

/// Consumer surplus of a (not necessarily normalized) mass vector under its
/// revenue-maximizing price, ties going to the lowest price.
fn segment_consumer_surplus(values: &[f64], masses: &[f64]) -> f64 {
    let revenues: Vec<f64> = (0..values.len())
        .map(|k| values[k] * masses[k..].iter().sum::<f64>())
        .collect();
    let best = revenues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let k = revenues.iter().position(|r| *r >= best - EPS).unwrap_or(0);
    (k..values.len()).map(|j| masses[j] * (values[j] - values[k])).sum()
}

/// Mixed-radix decoding of `cell` into per-axis grid indices.
fn decode(mut cell: u64, axes: usize, points: u64) -> Vec<u64> {
    let mut idx = vec![0; axes];
    for slot in idx.iter_mut().rev() {
        *slot = cell % points;
        cell /= points;
    }
    idx
}

/// Best consumer surplus over segmentations into two (or three) pieces with
/// masses on a grid, each priced optimally.
pub fn grid_segmentation_search(market: &Market, spec: &GridSpec) -> f64 {
    let values = market.values();
    let pi = market.masses();
    let n = values.len();
    let r = spec.resolution as u64;
    let points = r + 1;
    let whole = segment_consumer_surplus(values, pi);

    let two_cells = points.pow(n as u32);
    let two = (0..two_cells)
        .into_par_iter()
        .map(|cell| {
            let idx = decode(cell, n, points);
            let a: Vec<f64> = (0..n).map(|j| pi[j] * idx[j] as f64 / r as f64).collect();
            let b: Vec<f64> = (0..n).map(|j| pi[j] - a[j]).collect();
            segment_consumer_surplus(values, &a) + segment_consumer_surplus(values, &b)
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);

    let mut best = whole.max(two);
    let three_cells = points.checked_pow(2 * n as u32);
    if spec.max_segments >= 3 && three_cells.is_some_and(|c| c <= MAX_THREE_SEGMENT_CELLS) {
        let three = (0..three_cells.unwrap())
            .into_par_iter()
            .filter_map(|cell| {
                let idx = decode(cell, 2 * n, points);
                let a: Vec<f64> = (0..n).map(|j| pi[j] * idx[j] as f64 / r as f64).collect();
                let b: Vec<f64> = (0..n).map(|j| pi[j] * idx[n + j] as f64 / r as f64).collect();
                if (0..n).any(|j| idx[j] + idx[n + j] > r) {
                    return None;
                }
                let c: Vec<f64> = (0..n).map(|j| (pi[j] - a[j] - b[j]).max(0.0)).collect();
                Some(
                    segment_consumer_surplus(values, &a)
                        + segment_consumer_surplus(values, &b)
                        + segment_consumer_surplus(values, &c),
                )
            })
            .reduce(|| f64::NEG_INFINITY, f64::max);
        best = best.max(three);
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepeatedSearch {
    /// Lowest sender value over IC cells and the no-truthful-segment fallback.
    pub sender_value: f64,
    pub platform_value: f64,
    pub mass_split: Vec<f64>,
    pub fallback: bool,
    pub feasible_cells: u64,
}

/// Monopoly revenue of a mass vector in the sale-value currency.
fn monopoly_revenue(inst: &PersuasionInstance, masses: &[f64]) -> f64 {
    let mu = inst.mu();
    (0..inst.n())
        .map(|k| {
            let tau = mu * inst.theta()[k] / (1.0 - mu);
            (mu + (1.0 - mu) * tau) * masses[k..].iter().sum::<f64>()
        })
        .fold(0.0, f64::max)
}

/// Scans the mass-split box on a grid; each cell routes `m_j` of type `j`
/// to the truthful segment and leaves the rest to a monopoly-priced part.
/// A cell is kept when no one-period deviation on the truthful part pays.
pub fn grid_repeated_search(inst: &PersuasionInstance, spec: &GridSpec) -> Result<RepeatedSearch> {
    let params = inst.repeated().ok_or(Error::MissingRepeated)?;
    let (delta, u_bar) = (params.delta, params.u_bar);
    let mu = inst.mu();
    let prior = inst.prior();
    let n = inst.n();
    let r = spec.resolution as u64;
    let points = r + 1;
    let cells = points
        .checked_pow(n as u32)
        .ok_or_else(|| Error::InvalidConfig("oracle grid too large".into()))?;
    let welfare = mu * (1.0 + prior.iter().zip(inst.theta()).map(|(x, t)| x * t).sum::<f64>());

    let evaluate = |cell: u64| -> Option<(f64, u64)> {
        let idx = decode(cell, n, points);
        let m: Vec<f64> = (0..n).map(|j| prior[j] * idx[j] as f64 / r as f64).collect();
        let alpha: f64 = m.iter().sum();
        if alpha <= 0.0 {
            return None;
        }
        let rest: Vec<f64> = (0..n).map(|j| (prior[j] - m[j]).max(0.0)).collect();
        let value = alpha * mu + monopoly_revenue(inst, &rest);
        let deviation_pays = (0..n).any(|k| {
            let tail: f64 = m[k..].iter().sum::<f64>() / alpha;
            let p = mu * inst.theta()[k] / (1.0 - mu);
            let caught = (1.0 - mu) * tail * p;
            let deviate = (1.0 - delta) * tail * (mu + (1.0 - mu) * p)
                + delta * (caught * u_bar + (1.0 - caught) * value);
            let stay = (1.0 - delta) * mu + delta * value;
            deviate - stay > EPS
        });
        (!deviation_pays).then_some((value, cell))
    };

    let feasible: Vec<(f64, u64)> = (0..cells).into_par_iter().filter_map(evaluate).collect();
    let best = feasible
        .iter()
        .cloned()
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let fallback_value = monopoly_revenue(inst, prior);
    let (sender_value, mass_split, fallback) = match best {
        Some((v, cell)) if v < fallback_value => {
            let idx = decode(cell, n, points);
            let m = (0..n).map(|j| prior[j] * idx[j] as f64 / r as f64).collect();
            (v, m, false)
        }
        _ => (fallback_value, vec![0.0; n], true),
    };
    Ok(RepeatedSearch {
        sender_value,
        platform_value: welfare - sender_value,
        mass_split,
        fallback,
        feasible_cells: feasible.len() as u64,
    })
}

/// Closed-form candidate for the lowest sender value:
/// `clamp((1 - delta) / delta + u_bar, mu, monopoly value of the prior)`.
pub fn analytic_v_star(inst: &PersuasionInstance) -> Result<f64> {
    let params = inst.repeated().ok_or(Error::MissingRepeated)?;
    let bound = (1.0 - params.delta) / params.delta + params.u_bar;
    let monopoly = monopoly_revenue(inst, inst.prior());
    Ok(bound.max(inst.mu()).min(monopoly))
}
