//! Random instance and policy generators shared by the integration tests.
#![allow(dead_code)]

use persuasion::model::{PlatformPolicy, Posterior};
use persuasion::repeated::RepeatedPolicy;
use persuasion::segmentation::Market;
use persuasion::PersuasionInstance;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn instance_a() -> PersuasionInstance {
    PersuasionInstance::new(vec![0.2, 0.8], vec![0.2, 0.8], 0.5).unwrap()
}

pub fn instance_a_repeated(delta: f64, u_bar: f64) -> PersuasionInstance {
    instance_a().with_repeated(delta, u_bar).unwrap()
}

/// Nonnegative weights summing to one; entries are zero with probability
/// `zero_prob`, but never all of them.
pub fn random_simplex(rng: &mut impl Rng, n: usize, zero_prob: f64) -> Vec<f64> {
    loop {
        let raw: Vec<f64> = (0..n)
            .map(|_| {
                if rng.random::<f64>() < zero_prob {
                    0.0
                } else {
                    rng.random_range(0.01..1.0)
                }
            })
            .collect();
        let total: f64 = raw.iter().sum();
        if total > 0.0 {
            return raw.iter().map(|x| x / total).collect();
        }
    }
}

/// Strictly increasing types with every threshold at most one.
pub fn random_theta(rng: &mut impl Rng, n: usize, mu: f64) -> Vec<f64> {
    let cap = 1.0 / mu - 1.0;
    let mut steps: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = steps.iter().sum();
    let top = cap * rng.random_range(0.3..1.0);
    let mut acc = 0.0;
    for s in steps.iter_mut() {
        acc += *s / total * top;
        *s = acc;
    }
    steps
}

pub fn random_instance(rng: &mut impl Rng, n_lo: usize, n_hi: usize) -> PersuasionInstance {
    let n = rng.random_range(n_lo..=n_hi);
    let mu = rng.random_range(0.1..=0.5);
    let theta = random_theta(rng, n, mu);
    let prior = random_simplex(rng, n, 0.0);
    PersuasionInstance::new(theta, prior, mu).unwrap()
}

/// Attaches `delta` and a `u_bar` below the uninformed sender utility.
pub fn random_repeated(rng: &mut impl Rng, inst: PersuasionInstance) -> PersuasionInstance {
    let delta = rng.random_range(0.05..0.99);
    let u_bar = rng.random_range(0.0..0.999) * inst.uninformed_sender_utility();
    inst.with_repeated(delta, u_bar).unwrap()
}

pub fn random_market(rng: &mut impl Rng, n: usize) -> Market {
    let mut values: Vec<f64> = Vec::with_capacity(n);
    let mut v = rng.random_range(0.1..1.0);
    for _ in 0..n {
        values.push(v);
        v += rng.random_range(0.05..1.0);
    }
    Market::new(values, random_simplex(rng, n, 0.2)).unwrap()
}

/// Splits `masses` into up to `k` segments with random shares per type.
/// Returns `(weight, posterior)` pairs with positive weight.
pub fn random_pieces(rng: &mut impl Rng, masses: &[f64], k: usize) -> Vec<(f64, Posterior)> {
    let n = masses.len();
    let shares: Vec<Vec<f64>> = (0..n).map(|_| random_simplex(rng, k, 0.3)).collect();
    (0..k)
        .filter_map(|i| {
            let seg: Vec<f64> = (0..n).map(|j| masses[j] * shares[j][i]).collect();
            let w: f64 = seg.iter().sum();
            (w > 1e-9).then(|| (w, Posterior::from_masses(&seg).unwrap()))
        })
        .collect()
}

/// A random Bayes-plausible policy with up to `k` segments and no truthful one.
pub fn random_policy(rng: &mut impl Rng, inst: &PersuasionInstance, k: usize) -> PlatformPolicy {
    let mut pieces = random_pieces(rng, inst.prior(), k);
    let total: f64 = pieces.iter().map(|p| p.0).sum();
    for p in pieces.iter_mut() {
        p.0 /= total;
    }
    PlatformPolicy::new(inst, pieces, None).unwrap()
}

/// Random truthful mass split `m` in the box `[0, x*]` with positive total.
pub fn random_mass_split(rng: &mut impl Rng, inst: &PersuasionInstance) -> Vec<f64> {
    loop {
        let m: Vec<f64> = inst
            .prior()
            .iter()
            .map(|x| match rng.random_range(0..6) {
                0 => 0.0,
                1 => *x,
                _ => x * rng.random::<f64>(),
            })
            .collect();
        if m.iter().sum::<f64>() > 1e-6 {
            return m;
        }
    }
}

/// Truthful segment from a random mass split, the rest cut into up to `k`
/// random pieces.
pub fn random_repeated_policy(
    rng: &mut impl Rng,
    inst: &PersuasionInstance,
    k: usize,
) -> RepeatedPolicy {
    let m = random_mass_split(rng, inst);
    let alpha: f64 = m.iter().sum();
    let rest: Vec<f64> = inst.prior().iter().zip(&m).map(|(x, t)| (x - t).max(0.0)).collect();
    let mut segments = vec![(alpha, Posterior::from_masses(&m).unwrap())];
    if rest.iter().sum::<f64>() > 1e-9 {
        segments.extend(random_pieces(rng, &rest, k));
    }
    let total: f64 = segments.iter().map(|s| s.0).sum();
    for s in segments.iter_mut() {
        s.0 /= total;
    }
    RepeatedPolicy::new(PlatformPolicy::new(inst, segments, Some(0)).unwrap())
}

pub fn random_repeated_instance(rng: &mut impl Rng, n_lo: usize, n_hi: usize) -> PersuasionInstance {
    let inst = random_instance(rng, n_lo, n_hi);
    random_repeated(rng, inst)
}
