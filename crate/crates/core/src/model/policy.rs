use crate::error::{Error, Result};
use crate::model::instance::{check_simplex, PersuasionInstance};
use crate::tol;

/// A distribution over user types, used directly as the signal the sender sees.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior(Vec<f64>);

impl Posterior {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        check_simplex("posterior", &weights)?;
        Ok(Self(weights))
    }

    /// Normalizes a nonnegative mass vector with positive total.
    pub fn from_masses(masses: &[f64]) -> Result<Self> {
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) || masses.iter().any(|m| *m < 0.0 || !m.is_finite()) {
            return Err(Error::PriorNotSimplex {
                what: "posterior",
                reason: format!("cannot normalize masses with total {total}"),
            });
        }
        Ok(Self(masses.iter().map(|m| m / total).collect()))
    }

    /// Point mass on type `j`.
    pub fn degenerate(n: usize, j: usize) -> Self {
        let mut w = vec![0.0; n];
        w[j] = 1.0;
        Self(w)
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `F_k(x) = sum_{j >= k} x_j` (0-based `k`).
    pub fn tail_mass(&self, k: usize) -> f64 {
        self.0[k..].iter().sum()
    }

    /// Smallest type index carrying positive mass.
    pub fn min_support(&self) -> usize {
        self.0
            .iter()
            .position(|w| *w > tol::SUPPORT)
            .unwrap_or(0)
    }
}

/// `F_k(x)` for a posterior (0-based `k`).
pub fn tail_mass(x: &Posterior, k: usize) -> f64 {
    x.tail_mass(k)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub weight: f64,
    pub posterior: Posterior,
}

/// A Bayes-plausible, finite-support distribution over posteriors, with an
/// optional segment on which the sender is required to be truthful.
#[derive(Debug, Clone, PartialEq)]
pub struct PlatformPolicy {
    segments: Vec<Segment>,
    truthful: Option<usize>,
}

impl PlatformPolicy {
    /// Validates weights and Bayes-plausibility against the instance prior.
    /// Zero-weight segments are dropped; the truthful index is remapped.
    pub fn new(
        inst: &PersuasionInstance,
        segments: Vec<(f64, Posterior)>,
        truthful: Option<usize>,
    ) -> Result<Self> {
        if let Some(t) = truthful {
            if t >= segments.len() {
                return Err(Error::TruthfulIndexOutOfRange(t));
            }
        }
        let mut kept = Vec::with_capacity(segments.len());
        let mut new_truthful = None;
        for (i, (weight, posterior)) in segments.into_iter().enumerate() {
            if !weight.is_finite() || weight < 0.0 {
                return Err(Error::WeightsNotNormalized(weight));
            }
            if posterior.len() != inst.n() {
                return Err(Error::LengthMismatch {
                    what: "posterior",
                    got: posterior.len(),
                    expected: inst.n(),
                });
            }
            if weight == 0.0 {
                continue;
            }
            if truthful == Some(i) {
                new_truthful = Some(kept.len());
            }
            kept.push(Segment { weight, posterior });
        }
        let policy = Self {
            segments: kept,
            truthful: new_truthful,
        };
        policy.check_plausible(inst)?;
        Ok(policy)
    }

    fn check_plausible(&self, inst: &PersuasionInstance) -> Result<()> {
        let sum: f64 = self.segments.iter().map(|s| s.weight).sum();
        if (sum - 1.0).abs() > tol::SIMPLEX {
            return Err(Error::WeightsNotNormalized(sum));
        }
        let mean = self.mean();
        for (j, (&got, &expected)) in mean.iter().zip(inst.prior()).enumerate() {
            if (got - expected).abs() > tol::PLAUSIBLE {
                return Err(Error::NotBayesPlausible {
                    index: j,
                    got,
                    expected,
                });
            }
        }
        Ok(())
    }

    /// The uninformative policy: one segment equal to the prior.
    pub fn uninformative(inst: &PersuasionInstance) -> Self {
        Self {
            segments: vec![Segment {
                weight: 1.0,
                posterior: Posterior(inst.prior().to_vec()),
            }],
            truthful: None,
        }
    }

    /// Reveals the user type: one degenerate segment per supported type.
    pub fn full_revelation(inst: &PersuasionInstance) -> Self {
        let segments = inst
            .prior()
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > 0.0)
            .map(|(j, &w)| Segment {
                weight: w,
                posterior: Posterior::degenerate(inst.n(), j),
            })
            .collect();
        Self {
            segments,
            truthful: None,
        }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn truthful_index(&self) -> Option<usize> {
        self.truthful
    }

    /// `alpha^T`, zero when no truthful segment is designated.
    pub fn truthful_weight(&self) -> f64 {
        self.truthful.map_or(0.0, |t| self.segments[t].weight)
    }

    pub fn truthful_posterior(&self) -> Option<&Posterior> {
        self.truthful.map(|t| &self.segments[t].posterior)
    }

    pub fn is_truthful(&self, i: usize) -> bool {
        self.truthful == Some(i)
    }

    /// `x^F`: weight-renormalized mean of the non-truthful segments, if any.
    pub fn non_truthful_mean(&self) -> Option<Posterior> {
        let n = self.segments.first()?.posterior.len();
        let mut acc = vec![0.0; n];
        let mut total = 0.0;
        for (i, s) in self.segments.iter().enumerate() {
            if self.is_truthful(i) {
                continue;
            }
            total += s.weight;
            for (a, w) in acc.iter_mut().zip(s.posterior.weights()) {
                *a += s.weight * w;
            }
        }
        if total <= 0.0 {
            return None;
        }
        Posterior::from_masses(&acc).ok()
    }

    /// `sum_i alpha_i x^i`.
    pub fn mean(&self) -> Vec<f64> {
        let n = self.segments.first().map_or(0, |s| s.posterior.len());
        let mut acc = vec![0.0; n];
        for s in &self.segments {
            for (a, w) in acc.iter_mut().zip(s.posterior.weights()) {
                *a += s.weight * w;
            }
        }
        acc
    }

    pub(crate) fn from_parts(segments: Vec<Segment>, truthful: Option<usize>) -> Self {
        Self { segments, truthful }
    }
}

/// Lying probability per segment (probability of recommending the product
/// when it is of low quality). High-quality products are always recommended.
#[derive(Debug, Clone, PartialEq)]
pub struct SenderPolicy {
    lies: Vec<f64>,
}

impl SenderPolicy {
    pub fn new(lies: Vec<f64>) -> Result<Self> {
        if let Some(p) = lies.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::LieOutOfRange(*p));
        }
        Ok(Self { lies })
    }

    /// `p*`: the greedy response on every segment, truthful one included.
    pub fn greedy(inst: &PersuasionInstance, policy: &PlatformPolicy) -> Self {
        let lies = policy
            .segments()
            .iter()
            .map(|s| crate::model::greedy_best_response(inst, &s.posterior).lie)
            .collect();
        Self { lies }
    }

    /// `p_T`: greedy everywhere except zero lying on the truthful segment.
    pub fn truthful(inst: &PersuasionInstance, policy: &PlatformPolicy) -> Self {
        let mut p = Self::greedy(inst, policy);
        if let Some(t) = policy.truthful_index() {
            p.lies[t] = 0.0;
        }
        p
    }

    pub fn lies(&self) -> &[f64] {
        &self.lies
    }

    pub fn lie(&self, segment: usize) -> f64 {
        self.lies[segment]
    }

    pub fn len(&self) -> usize {
        self.lies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lies.is_empty()
    }
}
