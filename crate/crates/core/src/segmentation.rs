//! Third-degree price discrimination: markets over a fixed valuation grid,
//! optimal monopoly pricing, and the consumer-surplus-maximizing
//! segmentation built by peeling extremal markets off the aggregate.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::check_simplex;
use crate::tol;

/// A distribution over a strictly increasing grid of positive valuations.
#[derive(Debug, Clone, PartialEq)]
pub struct Market {
    values: Vec<f64>,
    masses: Vec<f64>,
}

impl Market {
    pub fn new(values: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        if values.len() != masses.len() {
            return Err(Error::LengthMismatch {
                what: "masses",
                got: masses.len(),
                expected: values.len(),
            });
        }
        for (i, &v) in values.iter().enumerate() {
            let prev = if i == 0 { 0.0 } else { values[i - 1] };
            if !v.is_finite() || v <= prev {
                return Err(Error::NonIncreasingTheta { index: i });
            }
        }
        check_simplex("masses", &masses)?;
        Ok(Self { values, masses })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `sum_j pi_j v_j`: surplus when every consumer buys.
    pub fn total_value(&self) -> f64 {
        crate::model::dot(&self.values, &self.masses)
    }
}

/// `v_k * sum_{j >= k} pi_j`.
pub fn revenue(market: &Market, k: usize) -> f64 {
    revenue_of(&market.values, &market.masses, k)
}

fn revenue_of(values: &[f64], masses: &[f64], k: usize) -> f64 {
    values[k] * masses[k..].iter().sum::<f64>()
}

fn best_price(values: &[f64], masses: &[f64]) -> usize {
    let revenues: Vec<f64> = (0..values.len()).map(|k| revenue_of(values, masses, k)).collect();
    let best = revenues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    revenues
        .iter()
        .position(|r| *r >= best - tol::TIE)
        .unwrap_or(0)
}

/// Smallest revenue-maximizing price index.
pub fn optimal_uniform_price(market: &Market) -> usize {
    best_price(&market.values, &market.masses)
}

/// The market supported on `subset` in which every price of the subset earns
/// the same revenue: tail masses `F(v_s) = v_min / v_s`.
pub fn extremal_market(values: &[f64], subset: &[usize]) -> Result<Market> {
    let n = values.len();
    if subset.is_empty() || subset.iter().any(|&i| i >= n) || subset.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(Error::InvalidSubset);
    }
    let v_min = values[subset[0]];
    let tails: Vec<f64> = subset.iter().map(|&i| v_min / values[i]).collect();
    let mut masses = vec![0.0; n];
    for (t, &i) in subset.iter().enumerate() {
        let next = tails.get(t + 1).copied().unwrap_or(0.0);
        masses[i] = tails[t] - next;
    }
    Ok(Market {
        values: values.to_vec(),
        masses,
    })
}

/// One priced market segment; `price` indexes the shared value grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketSegment {
    pub weight: f64,
    pub masses: Vec<f64>,
    pub price: usize,
}

/// A split of the aggregate market together with a price per segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    values: Vec<f64>,
    segments: Vec<MarketSegment>,
}

impl Segmentation {
    pub fn new(values: Vec<f64>, segments: Vec<MarketSegment>) -> Result<Self> {
        for s in &segments {
            if s.masses.len() != values.len() {
                return Err(Error::LengthMismatch {
                    what: "segment masses",
                    got: s.masses.len(),
                    expected: values.len(),
                });
            }
            if s.price >= values.len() {
                return Err(Error::InvalidSubset);
            }
        }
        Ok(Self {
            values,
            segments: segments.into_iter().filter(|s| s.weight > 0.0).collect(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn segments(&self) -> &[MarketSegment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn price_value(&self, segment: usize) -> f64 {
        self.values[self.segments[segment].price]
    }

    /// `sum weight * masses`.
    pub fn aggregate(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.values.len()];
        for s in &self.segments {
            for (a, m) in acc.iter_mut().zip(&s.masses) {
                *a += s.weight * m;
            }
        }
        acc
    }

    /// Checks that the weights are normalized and average back to `market`.
    pub fn check_plausible(&self, market: &Market) -> Result<()> {
        let sum: f64 = self.segments.iter().map(|s| s.weight).sum();
        if (sum - 1.0).abs() > tol::PLAUSIBLE {
            return Err(Error::WeightsNotNormalized(sum));
        }
        for (j, (&got, &expected)) in self.aggregate().iter().zip(market.masses()).enumerate() {
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

    /// True iff every segment's price maximizes revenue within that segment.
    pub fn prices_optimal(&self) -> bool {
        self.segments.iter().all(|s| {
            let charged = revenue_of(&self.values, &s.masses, s.price);
            (0..self.values.len()).all(|k| revenue_of(&self.values, &s.masses, k) <= charged + tol::TIE)
        })
    }
}

/// Consumer-surplus-maximizing segmentation.
///
/// Repeatedly peels the largest multiple of the extremal market on the
/// residual's support, pricing each peel at the lowest value of its support.
/// The producer earns exactly the uniform monopoly revenue and every
/// consumer buys.
pub fn bbm_segmentation(market: &Market) -> Result<Segmentation> {
    let n = market.len();
    let mut residual = market.masses.clone();
    let mut segments = Vec::new();
    for _ in 0..n {
        let remaining: f64 = residual.iter().sum();
        if remaining < tol::SUPPORT {
            break;
        }
        let support: Vec<usize> = (0..n).filter(|&i| residual[i] > tol::SUPPORT).collect();
        let extremal = extremal_market(&market.values, &support)?;
        let (binding, beta) = support
            .iter()
            .map(|&i| (i, residual[i] / extremal.masses[i]))
            .fold((usize::MAX, f64::INFINITY), |best, c| if c.1 < best.1 { c } else { best });
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::ResidualStall(remaining));
        }
        for i in 0..n {
            residual[i] -= beta * extremal.masses[i];
            if residual[i] < tol::SUPPORT {
                residual[i] = 0.0;
            }
        }
        residual[binding] = 0.0;
        segments.push(MarketSegment {
            weight: beta,
            masses: extremal.masses,
            price: support[0],
        });
    }
    let leftover: f64 = residual.iter().sum();
    if leftover >= tol::SUPPORT {
        return Err(Error::ResidualStall(leftover));
    }
    let total: f64 = segments.iter().map(|s| s.weight).sum();
    for s in &mut segments {
        s.weight /= total;
    }
    Segmentation::new(market.values.clone(), segments)
}

/// The aggregate market as a single segment at the uniform monopoly price.
pub fn uniform_pricing(market: &Market) -> Segmentation {
    Segmentation {
        values: market.values.clone(),
        segments: vec![MarketSegment {
            weight: 1.0,
            masses: market.masses.clone(),
            price: optimal_uniform_price(market),
        }],
    }
}

/// Each valuation in its own segment, priced at that valuation.
pub fn full_revelation(market: &Market) -> Segmentation {
    let n = market.len();
    let segments = (0..n)
        .filter(|&j| market.masses[j] > 0.0)
        .map(|j| {
            let mut masses = vec![0.0; n];
            masses[j] = 1.0;
            MarketSegment {
                weight: market.masses[j],
                masses,
                price: j,
            }
        })
        .collect();
    Segmentation {
        values: market.values.clone(),
        segments,
    }
}

/// Mixes the consumer-optimal segmentation (weight `1 - lambda`) with full
/// revelation (weight `lambda`), tracing the efficient edge of the surplus
/// triangle.
pub fn pareto_mix(market: &Market, lambda: f64) -> Result<Segmentation> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidConfig(format!("mixing weight {lambda} outside [0, 1]")));
    }
    let bbm = bbm_segmentation(market)?;
    let full = full_revelation(market);
    let segments = bbm
        .segments
        .into_iter()
        .map(|s| MarketSegment {
            weight: (1.0 - lambda) * s.weight,
            ..s
        })
        .chain(full.segments.into_iter().map(|s| MarketSegment {
            weight: lambda * s.weight,
            ..s
        }))
        .collect();
    Segmentation::new(market.values.clone(), segments)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurplusReport {
    pub consumer: f64,
    pub producer: f64,
    pub total: f64,
}

pub fn surpluses(seg: &Segmentation) -> SurplusReport {
    let mut consumer = 0.0;
    let mut producer = 0.0;
    for s in &seg.segments {
        let price = seg.values[s.price];
        for j in s.price..seg.values.len() {
            consumer += s.weight * s.masses[j] * (seg.values[j] - price);
            producer += s.weight * s.masses[j] * price;
        }
    }
    SurplusReport {
        consumer,
        producer,
        total: consumer + producer,
    }
}

/// Corners of the feasible (consumer, producer) surplus region: `a` is
/// uniform pricing, `b` the consumer optimum, `c` full revelation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurplusTriangle {
    pub a: [f64; 2],
    pub b: [f64; 2],
    pub c: [f64; 2],
}

pub fn surplus_triangle(market: &Market) -> SurplusTriangle {
    let monopoly = revenue(market, optimal_uniform_price(market));
    let total = market.total_value();
    SurplusTriangle {
        a: [0.0, monopoly],
        b: [total - monopoly, monopoly],
        c: [0.0, total],
    }
}
