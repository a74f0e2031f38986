//! Information-disclosure policies for persuasion platforms.
//!
//! A platform decides what a sender (seller) learns about each user before
//! the sender commits to a recommendation policy. The one-shot problem is
//! solved by mapping it onto consumer-surplus-maximizing market
//! segmentation ([`reduction`], [`segmentation`]); the repeated problem with
//! a reputation-based truthfulness contract is solved by a finite-dimensional
//! search over truthful mass splits ([`repeated`]). [`simulate`] plays the
//! repeated game by Monte Carlo and [`oracle`] holds brute-force baselines.

pub mod error;
pub mod model;
pub mod oracle;
pub mod reduction;
pub mod repeated;
pub mod segmentation;
pub mod simulate;

pub mod cli;

pub use error::{Error, Result};
pub use model::{PersuasionInstance, PlatformPolicy, Posterior, SenderPolicy, UtilityReport};

/// Numerical tolerances shared across the crate.
pub mod tol {
    /// Probability vectors must sum to one within this.
    pub const SIMPLEX: f64 = 1e-12;
    /// Bayes-plausibility, per coordinate.
    pub const PLAUSIBLE: f64 = 1e-9;
    /// Utility comparisons: values this close are ties.
    pub const TIE: f64 = 1e-12;
    /// Masses at or below this are outside the support.
    pub const SUPPORT: f64 = 1e-12;
}
