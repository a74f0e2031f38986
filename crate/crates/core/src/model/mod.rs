//! Persuasion model: instances, posteriors, platform and sender policies,
//! one-shot utilities and the greedy sender response.

mod instance;
mod policy;
mod targeting;
mod utility;

pub use instance::{persuasion_threshold, validate_instance, PersuasionInstance, RawInstance, RepeatedParams};
pub use policy::{tail_mass, PlatformPolicy, Posterior, Segment, SenderPolicy};
pub use targeting::{improve_counting, improve_to_lowest_type_targeting, is_lowest_type_targeting, Improvement};
pub use utility::{greedy_best_response, platform_utility, policy_utilities, sender_utility, GreedyChoice, UtilityReport};

pub(crate) use instance::{check_simplex, dot};
pub(crate) use utility::{follows, greedy_index};
