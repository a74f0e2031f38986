//! Monte Carlo play of the repeated reputation game.
//!
//! Each period a user type is drawn from the prior, the platform draws a
//! segment from the policy's conditional law given the type, nature draws the
//! product quality and the sender recommends. A purchase of a low-quality
//! product on the truthful segment moves the sender to the absorbing low
//! reputation state, where it earns `u_bar` per period and users get nothing.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`), seeded with
//! `seed_from_u64(seed)` and split into independent streams with
//! `set_stream`; the algorithm is portable, so a seed reproduces a run on
//! every platform.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{follows, PersuasionInstance, RepeatedParams, SenderPolicy};
use crate::repeated::{sender_value, RepeatedPolicy};
use crate::tol;

/// Deterministic random stream `stream` of `seed`.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Reputation {
    High,
    Low,
}

/// How the sender plays on the truthful segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SenderMode {
    Truthful,
    /// Lie with the threshold of type `k` (0-based) on the truthful segment.
    DeviateAt(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub periods: u64,
    pub seed: u64,
    pub mode: SenderMode,
    pub record_trajectory: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PeriodRecord {
    pub period: u64,
    pub type_index: usize,
    pub segment: usize,
    pub high_quality: bool,
    pub recommended: bool,
    pub bought: bool,
    pub reputation: Reputation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub periods: u64,
    /// `(1 - delta) sum_t delta^t u_t` over the simulated horizon.
    pub discounted_sender_utility: f64,
    /// Upper bound on the truncated discounted tail, `delta^T max|u|`.
    pub tail_bound: f64,
    pub avg_sender_utility: f64,
    pub avg_user_utility: f64,
    pub user_utility_std_error: f64,
    /// Mean per-period utilities while the reputation is high.
    pub high_sender_utility: f64,
    pub high_user_utility: f64,
    pub high_periods: u64,
    pub punishment_period: Option<u64>,
    #[serde(skip)]
    pub trajectory: Option<Vec<PeriodRecord>>,
}

/// Precomputed sampling tables for one (instance, policy, sender) triple.
struct Game<'a> {
    inst: &'a PersuasionInstance,
    params: RepeatedParams,
    type_cdf: Vec<f64>,
    /// Per type, cumulative conditional segment probabilities.
    segment_cdf: Vec<Vec<f64>>,
    truthful: Option<usize>,
    lies: Vec<f64>,
}

fn draw(cdf: &[f64], u: f64) -> usize {
    cdf.iter().position(|c| u < *c).unwrap_or(cdf.len() - 1)
}

fn cumulative(weights: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    weights
        .map(|w| {
            acc += w;
            acc
        })
        .collect()
}

impl<'a> Game<'a> {
    fn new(
        inst: &'a PersuasionInstance,
        policy: &RepeatedPolicy,
        sender: &SenderPolicy,
        mode: SenderMode,
    ) -> Result<Self> {
        let params = inst.repeated().ok_or(Error::MissingRepeated)?;
        let base = policy.policy();
        if sender.len() != base.len() {
            return Err(Error::InconsistentPolicy(format!(
                "{} lying probabilities for {} segments",
                sender.len(),
                base.len()
            )));
        }
        let n = inst.n();
        if base.segments().iter().any(|s| s.posterior.len() != n) {
            return Err(Error::InconsistentPolicy("posterior length differs from instance".into()));
        }
        for (j, (got, want)) in base.mean().iter().zip(inst.prior()).enumerate() {
            if (got - want).abs() > tol::PLAUSIBLE {
                return Err(Error::InconsistentPolicy(format!(
                    "policy averages to {got} on type {j}, prior is {want}"
                )));
            }
        }
        let mut lies = sender.lies().to_vec();
        let truthful = base.truthful_index();
        match (mode, truthful) {
            (SenderMode::Truthful, Some(t)) => lies[t] = 0.0,
            (SenderMode::Truthful, None) => {}
            (SenderMode::DeviateAt(k), Some(t)) if k < n => lies[t] = inst.threshold(k),
            (SenderMode::DeviateAt(k), Some(_)) => {
                return Err(Error::InconsistentPolicy(format!("deviation type {k} out of range")))
            }
            (SenderMode::DeviateAt(_), None) => {
                return Err(Error::InconsistentPolicy("no truthful segment to deviate on".into()))
            }
        }
        let segment_cdf = (0..n)
            .map(|j| {
                let mass = inst.prior()[j];
                cumulative(base.segments().iter().map(move |s| {
                    if mass > 0.0 {
                        s.weight * s.posterior.weights()[j] / mass
                    } else {
                        0.0
                    }
                }))
            })
            .collect();
        Ok(Self {
            inst,
            params,
            type_cdf: cumulative(inst.prior().iter().cloned()),
            segment_cdf,
            truthful,
            lies,
        })
    }

    /// One high-reputation interaction: (type, segment, good, recommended,
    /// bought, punished).
    fn play<R: Rng>(&self, rng: &mut R) -> (usize, usize, bool, bool, bool, bool) {
        let j = draw(&self.type_cdf, rng.random::<f64>());
        let seg = draw(&self.segment_cdf[j], rng.random::<f64>());
        let good = rng.random::<f64>() < self.inst.mu();
        let lie = self.lies[seg];
        let coin = rng.random::<f64>();
        let recommended = good || coin < lie;
        let bought = recommended && follows(lie, self.inst.threshold(j));
        let punished = self.truthful == Some(seg) && !good && bought;
        (j, seg, good, recommended, bought, punished)
    }

    fn user_payoff(&self, j: usize, good: bool, bought: bool) -> f64 {
        match (bought, good) {
            (false, _) => 0.0,
            (true, true) => self.inst.theta()[j],
            (true, false) => -1.0,
        }
    }
}

/// Plays `cfg.periods` periods starting from high reputation.
pub fn simulate(
    inst: &PersuasionInstance,
    policy: &RepeatedPolicy,
    sender: &SenderPolicy,
    cfg: &SimConfig,
) -> Result<SimReport> {
    if cfg.periods == 0 {
        return Err(Error::InvalidConfig("periods must be at least 1".into()));
    }
    let game = Game::new(inst, policy, sender, cfg.mode)?;
    let RepeatedParams { delta, u_bar } = game.params;
    let mut rng = rng_stream(cfg.seed, 0);
    let mut reputation = Reputation::High;
    let mut punishment_period = None;
    let mut trajectory = cfg.record_trajectory.then(Vec::new);
    let mut discount = 1.0;
    let mut discounted = 0.0;
    let mut sender_sum = 0.0;
    let mut user = Welford::default();
    let (mut high_sender, mut high_user, mut high_periods) = (0.0, 0.0, 0u64);

    for t in 0..cfg.periods {
        let (j, seg, good, recommended, bought, punished) = game.play(&mut rng);
        let (s_util, u_util, record) = match reputation {
            Reputation::High => {
                let s = if bought { 1.0 } else { 0.0 };
                let u = game.user_payoff(j, good, bought);
                high_sender += s;
                high_user += u;
                high_periods += 1;
                (s, u, (recommended, bought))
            }
            Reputation::Low => (u_bar, 0.0, (false, false)),
        };
        if let Some(log) = trajectory.as_mut() {
            log.push(PeriodRecord {
                period: t,
                type_index: j,
                segment: seg,
                high_quality: good,
                recommended: record.0,
                bought: record.1,
                reputation,
            });
        }
        discounted += discount * s_util;
        discount *= delta;
        sender_sum += s_util;
        user.push(u_util);
        if reputation == Reputation::High && punished {
            reputation = Reputation::Low;
            punishment_period = Some(t);
        }
    }
    let periods = cfg.periods as f64;
    let high = high_periods.max(1) as f64;
    Ok(SimReport {
        periods: cfg.periods,
        discounted_sender_utility: (1.0 - delta) * discounted,
        tail_bound: discount * u_bar.abs().max(1.0),
        avg_sender_utility: sender_sum / periods,
        avg_user_utility: user.mean(),
        user_utility_std_error: user.std_error(),
        high_sender_utility: high_sender / high,
        high_user_utility: high_user / high,
        high_periods,
        punishment_period,
        trajectory,
    })
}

/// Writes one line per period: `period,type,segment,omega,rec,action,rep`
/// with the type index 1-based and `rep` one of `H`/`L`.
pub fn write_trajectory<W: Write>(out: &mut W, records: &[PeriodRecord]) -> std::io::Result<()> {
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.period,
            r.type_index + 1,
            r.segment,
            u8::from(r.high_quality),
            u8::from(r.recommended),
            u8::from(r.bought),
            match r.reputation {
                Reputation::High => 'H',
                Reputation::Low => 'L',
            }
        )?;
    }
    Ok(())
}

/// Running mean and variance.
#[derive(Debug, Default, Clone, Copy)]
struct Welford {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    fn mean(&self) -> f64 {
        self.mean
    }

    fn std_error(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        (self.m2 / (self.count - 1) as f64 / self.count as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HazardEstimate {
    pub punishments: u64,
    pub high_periods: u64,
    pub hazard: f64,
    pub std_error: f64,
}

/// Per-period punishment probability while the reputation is high, pooled
/// over independent replications that each stop at punishment or after
/// `max_periods`.
pub fn punishment_hazard(
    inst: &PersuasionInstance,
    policy: &RepeatedPolicy,
    sender: &SenderPolicy,
    mode: SenderMode,
    replications: u64,
    max_periods: u64,
    seed: u64,
) -> Result<HazardEstimate> {
    let game = Game::new(inst, policy, sender, mode)?;
    let (punishments, high_periods) = (0..replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_stream(seed, r);
            for t in 0..max_periods {
                if game.play(&mut rng).5 {
                    return (1u64, t + 1);
                }
            }
            (0, max_periods)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let hazard = punishments as f64 / high_periods.max(1) as f64;
    Ok(HazardEstimate {
        punishments,
        high_periods,
        hazard,
        std_error: (hazard * (1.0 - hazard) / high_periods.max(1) as f64).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GainEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub runs: u64,
    /// Truncation bound on each simulated continuation.
    pub tail_bound: f64,
}

/// Kahan-compensated sum in slice order.
fn compensated_sum(xs: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0, 0.0);
    for x in xs {
        let y = x - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Monte Carlo estimate of the discounted gain from lying with `p_k` for one
/// period on the truthful posterior, against staying truthful.
///
/// Both branches share the period's draws and the continuation path, so
/// they differ only in the current period and, if the lie is detected, in the
/// punished continuation.
pub fn estimate_deviation_gain(
    inst: &PersuasionInstance,
    policy: &RepeatedPolicy,
    k: usize,
    runs: u64,
    seed: u64,
) -> Result<GainEstimate> {
    let params = inst.repeated().ok_or(Error::MissingRepeated)?;
    let x_t = policy
        .truthful_posterior()
        .ok_or_else(|| Error::InconsistentPolicy("no truthful segment".into()))?;
    if k >= inst.n() {
        return Err(Error::InconsistentPolicy(format!("deviation type {k} out of range")));
    }
    if !(x_t.tail_mass(k) > 0.0) {
        return Err(Error::ZeroTail(k));
    }
    if runs < 2 {
        return Err(Error::InvalidConfig("at least two runs are needed".into()));
    }
    let RepeatedParams { delta, u_bar } = params;
    let sender = SenderPolicy::truthful(inst, policy.policy());
    let game = Game::new(inst, policy, &sender, SenderMode::Truthful)?;
    let horizon = ((1e-10f64).ln() / delta.ln()).ceil().max(1.0) as u64;
    let truthful_cdf = cumulative(x_t.weights().iter().cloned());
    let p_k = inst.threshold(k);
    let mu = inst.mu();

    let gains: Vec<f64> = (0..runs)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_stream(seed, r);
            let j = draw(&truthful_cdf, rng.random::<f64>());
            let good = rng.random::<f64>() < mu;
            let coin = rng.random::<f64>();
            let truthful_now = if good { 1.0 } else { 0.0 };
            let bought = (good || coin < p_k) && follows(p_k, inst.threshold(j));
            let deviate_now = if bought { 1.0 } else { 0.0 };
            let mut gain = (1.0 - delta) * (deviate_now - truthful_now);
            if bought && !good {
                let mut w = 0.0;
                let mut d = 1.0;
                for _ in 0..horizon {
                    if game.play(&mut rng).4 {
                        w += d;
                    }
                    d *= delta;
                }
                gain += delta * (u_bar - (1.0 - delta) * w);
            }
            gain
        })
        .collect();
    let n = runs as f64;
    let mean = compensated_sum(gains.iter().cloned()) / n;
    let var = compensated_sum(gains.iter().map(|g| (g - mean) * (g - mean))) / (n - 1.0);
    Ok(GainEstimate {
        mean,
        std_error: (var / n).sqrt(),
        runs,
        tail_bound: delta.powf(horizon as f64),
    })
}

/// Theoretical truthful value `V(sigma)` for comparison with simulation.
pub fn theoretical_value(inst: &PersuasionInstance, policy: &RepeatedPolicy) -> f64 {
    sender_value(inst, policy)
}
