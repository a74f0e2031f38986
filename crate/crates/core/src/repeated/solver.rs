use std::cmp::Ordering;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{
    greedy_index, policy_utilities, PersuasionInstance, PlatformPolicy, Posterior, RepeatedParams,
    SenderPolicy,
};
use crate::repeated::ic::{is_incentive_compatible, rhs_from_tail, IcCertificate, RepeatedPolicy};
use crate::segmentation::{bbm_segmentation, Market};
use crate::tol;

/// Cap on grid cells; the per-axis resolution is lowered to fit.
const MAX_CELLS: usize = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverConfig {
    pub grid_points_per_axis: usize,
    pub restarts: usize,
    pub refine_tolerance: f64,
    pub max_refine_iters: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            grid_points_per_axis: 32,
            restarts: 4,
            refine_tolerance: 1e-6,
            max_refine_iters: 500,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_points_per_axis < 8 {
            return Err(Error::InvalidConfig(format!(
                "grid_points_per_axis must be at least 8, got {}",
                self.grid_points_per_axis
            )));
        }
        if self.restarts < 1 {
            return Err(Error::InvalidConfig("restarts must be at least 1".into()));
        }
        if !(self.refine_tolerance > 0.0) {
            return Err(Error::InvalidConfig("refine_tolerance must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub policy: RepeatedPolicy,
    pub sender: SenderPolicy,
    /// Truthful mass routed to the truthful posterior, per type.
    pub mass_split: Vec<f64>,
    pub sender_value: f64,
    pub platform_value: f64,
    pub ic_certificate: IcCertificate,
    pub fallback_used: bool,
    /// Per-axis grid resolution actually scanned.
    pub grid_points: usize,
    pub evaluations: usize,
}

/// A point of the mass-split box with its sender value and IC status.
#[derive(Debug, Clone)]
struct Candidate {
    m: Vec<f64>,
    value: f64,
    feasible: bool,
}

fn order(a: &Candidate, b: &Candidate) -> Ordering {
    a.value
        .total_cmp(&b.value)
        .then_with(|| {
            a.m.iter()
                .zip(&b.m)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
}

/// Step-one objective over the box `0 <= m <= x*`.
struct Problem<'a> {
    inst: &'a PersuasionInstance,
    params: RepeatedParams,
    fallback: f64,
}

impl Problem<'_> {
    fn evaluate(&self, m: &[f64]) -> Candidate {
        let inst = self.inst;
        let alpha: f64 = m.iter().sum();
        if alpha <= 0.0 {
            return Candidate {
                m: m.to_vec(),
                value: self.fallback,
                feasible: true,
            };
        }
        let residual: Vec<f64> = inst.prior().iter().zip(m).map(|(x, t)| (x - t).max(0.0)).collect();
        let rest: f64 = residual.iter().sum();
        let rest_value = if rest <= tol::SUPPORT {
            0.0
        } else {
            let normalized: Vec<f64> = residual.iter().map(|r| r / rest).collect();
            let k = greedy_index(inst, &normalized);
            residual[k..].iter().sum::<f64>() * inst.sale_value(inst.threshold(k))
        };
        let value = alpha * inst.mu() + rest_value;
        let mut feasible = true;
        let mut tail = 0.0;
        for k in (0..inst.n()).rev() {
            tail += m[k];
            if let Ok(rhs) = rhs_from_tail(inst, self.params, tail / alpha, k) {
                // exact here so the assembled policy keeps the TIE margin
                if value < rhs {
                    feasible = false;
                    break;
                }
            }
        }
        Candidate {
            m: m.to_vec(),
            value,
            feasible,
        }
    }

    /// Largest feasible step from `from` toward `to`, by bisection on the
    /// feasibility predicate.
    fn bisect(&self, from: &Candidate, to: &[f64], evals: &mut usize) -> Candidate {
        let point = |t: f64| -> Vec<f64> {
            from.m
                .iter()
                .zip(to)
                .zip(self.inst.prior())
                .map(|((a, b), cap)| (a + t * (b - a)).clamp(0.0, *cap))
                .collect()
        };
        let end = self.evaluate(to);
        *evals += 1;
        if end.feasible {
            return end;
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        let mut best = from.clone();
        for _ in 0..200 {
            if hi - lo <= f64::EPSILON {
                break;
            }
            let mid = 0.5 * (lo + hi);
            let c = self.evaluate(&point(mid));
            *evals += 1;
            if c.feasible {
                lo = mid;
                if order(&c, &best).is_lt() {
                    best = c;
                }
            } else {
                hi = mid;
            }
        }
        best
    }

    /// Compass search over feasible points, interleaved with bisection toward
    /// the fully truthful corner.
    fn refine(&self, start: Candidate, step: f64, cfg: &SolverConfig) -> (Candidate, usize) {
        let prior = self.inst.prior();
        let mut evals = 0;
        let mut current = self.bisect(&start, prior, &mut evals);
        let mut h = step;
        let mut iters = 0;
        while h > cfg.refine_tolerance && iters < cfg.max_refine_iters {
            iters += 1;
            let mut moved = false;
            'axes: for j in 0..prior.len() {
                for sign in [1.0, -1.0] {
                    let mut m = current.m.clone();
                    m[j] = (m[j] + sign * h).clamp(0.0, prior[j]);
                    if m[j] == current.m[j] {
                        continue;
                    }
                    let c = self.evaluate(&m);
                    evals += 1;
                    if c.feasible && c.value < current.value - tol::TIE {
                        current = self.bisect(&c, prior, &mut evals);
                        moved = true;
                        break 'axes;
                    }
                }
            }
            if !moved {
                h *= 0.5;
            }
        }
        (current, evals)
    }
}

fn grid_point(prior: &[f64], points: usize, mut cell: usize) -> Vec<f64> {
    let mut m = vec![0.0; prior.len()];
    for j in (0..prior.len()).rev() {
        let i = cell % points;
        cell /= points;
        m[j] = prior[j] * i as f64 / (points - 1) as f64;
    }
    m
}

fn effective_points(n: usize, requested: usize) -> usize {
    let mut points = requested;
    while points > 2 && points.checked_pow(n as u32).map_or(true, |c| c > MAX_CELLS) {
        points -= 1;
    }
    points
}

/// Two-step solver for the reputation-based platform problem.
///
/// Step one minimizes the truthful sender value over the mass split
/// `m in prod_j [0, x*_j]` (`alpha = sum m`, `x^T = m / alpha`,
/// `x^F = (x* - m) / (1 - alpha)`) subject to the incentive constraints,
/// using a grid scan followed by compass search from the best cells. The
/// split `m = 0` (no truthful request) is always feasible. Step two replaces
/// `x^F` by its consumer-optimal segmentation.
pub fn solve_repeated(inst: &PersuasionInstance, cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.validate()?;
    let params = inst.repeated().ok_or(Error::MissingRepeated)?;
    let n = inst.n();
    let prior = inst.prior();
    let problem = Problem {
        inst,
        params,
        fallback: inst.uninformed_sender_utility(),
    };

    let points = effective_points(n, cfg.grid_points_per_axis);
    let cells = points.pow(n as u32);
    let mut feasible: Vec<(f64, usize)> = (0..cells)
        .into_par_iter()
        .filter_map(|cell| {
            let c = problem.evaluate(&grid_point(prior, points, cell));
            c.feasible.then_some((c.value, cell))
        })
        .collect();
    // cell order is lexicographic in m, so this is the (V, m) order
    feasible.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut evaluations = cells;

    let mut starts: Vec<Candidate> = feasible
        .iter()
        .take(cfg.restarts)
        .map(|&(_, cell)| problem.evaluate(&grid_point(prior, points, cell)))
        .collect();
    starts.push(problem.evaluate(prior));
    starts.push(problem.evaluate(&vec![0.0; n]));

    let step = prior.iter().cloned().fold(0.0, f64::max) / (points - 1) as f64;
    let refined: Vec<(Candidate, usize)> = starts
        .into_par_iter()
        .map(|s| {
            if s.feasible {
                problem.refine(s, step, cfg)
            } else {
                (s, 0)
            }
        })
        .collect();
    let mut best: Option<Candidate> = None;
    for (c, evals) in refined {
        evaluations += evals;
        if c.feasible && best.as_ref().map_or(true, |b| order(&c, b).is_lt()) {
            best = Some(c);
        }
    }
    let mut best = best.expect("the empty split is always feasible");
    if best.value >= problem.fallback {
        best = problem.evaluate(&vec![0.0; n]);
    }

    let policy = assemble(inst, &best.m)?;
    let sender = SenderPolicy::truthful(inst, policy.policy());
    let direct = policy_utilities(inst, policy.policy(), &sender)?;
    let identity = inst.total_welfare() - direct.sender;
    if (direct.platform - identity).abs() > tol::PLAUSIBLE {
        return Err(Error::InconsistentPolicy(format!(
            "platform value {} disagrees with welfare identity {}",
            direct.platform, identity
        )));
    }
    let ic_certificate = is_incentive_compatible(inst, &policy, params);
    let fallback_used = policy.alpha() == 0.0;
    Ok(SolveResult {
        mass_split: if fallback_used { vec![0.0; n] } else { best.m },
        policy,
        sender,
        sender_value: direct.sender,
        platform_value: direct.platform,
        ic_certificate,
        fallback_used,
        grid_points: points,
        evaluations,
    })
}

/// Truthful segment `m / alpha` plus the consumer-optimal segmentation of
/// the remainder.
fn assemble(inst: &PersuasionInstance, m: &[f64]) -> Result<RepeatedPolicy> {
    let alpha: f64 = m.iter().sum();
    let residual: Vec<f64> = inst.prior().iter().zip(m).map(|(x, t)| (x - t).max(0.0)).collect();
    let rest: f64 = residual.iter().sum();
    let mut segments = Vec::new();
    let mut truthful = None;
    if alpha > 0.0 {
        truthful = Some(0);
        if rest <= tol::SUPPORT {
            segments.push((1.0, Posterior::new(inst.prior().to_vec())?));
            return Ok(RepeatedPolicy::new(PlatformPolicy::new(inst, segments, truthful)?));
        }
        segments.push((alpha, Posterior::from_masses(m)?));
    }
    let rest_mean = Posterior::from_masses(&residual)?;
    let market = Market::new(
        crate::reduction::to_market(inst).market().values().to_vec(),
        rest_mean.weights().to_vec(),
    )?;
    let seg = bbm_segmentation(&market)?;
    let weight = 1.0 - alpha;
    for s in seg.segments() {
        segments.push((weight * s.weight, Posterior::new(s.masses.clone())?));
    }
    Ok(RepeatedPolicy::new(PlatformPolicy::new(inst, segments, truthful)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::is_lowest_type_targeting;

    fn instance_a(delta: f64, u_bar: f64) -> PersuasionInstance {
        PersuasionInstance::new(vec![0.2, 0.8], vec![0.2, 0.8], 0.5)
            .unwrap()
            .with_repeated(delta, u_bar)
            .unwrap()
    }

    #[test]
    fn full_truthfulness_when_cheap() {
        let a = instance_a(0.9, 0.3);
        let r = solve_repeated(&a, &SolverConfig::default()).unwrap();
        assert!((r.policy.alpha() - 1.0).abs() < 1e-12);
        assert!((r.platform_value - 0.34).abs() < 1e-9);
        assert!(!r.fallback_used);
        assert!(r.ic_certificate.compatible);
    }

    #[test]
    fn fallback_when_punishment_is_weak() {
        let a = instance_a(0.5, 0.45);
        let r = solve_repeated(&a, &SolverConfig::default()).unwrap();
        assert!(r.fallback_used);
        assert_eq!(r.policy.alpha(), 0.0);
        assert!((r.platform_value - 0.12).abs() < 1e-9);
        assert!((r.sender_value - 0.72).abs() < 1e-9);
    }

    #[test]
    fn interior_split() {
        let a = instance_a(0.75, 0.3);
        let r = solve_repeated(&a, &SolverConfig::default()).unwrap();
        assert!((r.sender_value - (1.0 / 3.0 + 0.3)).abs() < 1e-6, "{}", r.sender_value);
        assert!((r.platform_value - (0.84 - 1.0 / 3.0 - 0.3)).abs() < 1e-6);
        assert!(r.ic_certificate.min_slack().unwrap() >= -1e-9);
        assert!(is_lowest_type_targeting(&a, r.policy.policy()));
    }

    #[test]
    fn rejects_missing_parameters_and_bad_config() {
        let a = PersuasionInstance::new(vec![0.2, 0.8], vec![0.2, 0.8], 0.5).unwrap();
        assert!(matches!(
            solve_repeated(&a, &SolverConfig::default()),
            Err(Error::MissingRepeated)
        ));
        let cfg = SolverConfig {
            grid_points_per_axis: 4,
            ..SolverConfig::default()
        };
        assert!(matches!(
            solve_repeated(&instance_a(0.9, 0.3), &cfg),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn grid_is_capped_for_many_types() {
        assert_eq!(effective_points(2, 32), 32);
        let p = effective_points(12, 32);
        assert!(p.pow(12) <= MAX_CELLS && p >= 2);
    }
}
