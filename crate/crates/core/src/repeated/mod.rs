//! Reputation-based setting: incentive constraints for the truthful
//! segment, closed forms for lowest-type-targeting policies, and the
//! two-step optimal-policy solver.

mod ic;
mod solver;

pub use crate::model::tail_mass;
pub use ic::{
    deviation_value, ic_rhs, is_incentive_compatible, closed_form_report, sender_value, truthful_value,
    ClosedForms, IcCertificate, RepeatedPolicy,
};
pub use solver::{solve_repeated, SolveResult, SolverConfig};

