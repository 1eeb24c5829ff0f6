//! k-nearest-neighbour entropy and mutual-information estimation.
//!
//! All estimates are in nats and use Chebyshev (max-norm) geometry. Inputs
//! are perturbed by a tiny seeded uniform jitter before any neighbour search
//! so that discrete and binary variables have distinct distances; the jitter
//! seed is the only source of randomness.

mod digamma;
mod discrete;
mod ksg;
pub mod neighbors;
mod sample;

pub use digamma::digamma;
pub use discrete::{plugin_discrete_entropy, plugin_discrete_mi};
pub use ksg::{entropy, kl_entropy, ksg_entropy, ksg_mi, normalized_mi, EntropyMethod, Normalization};
pub use sample::{jitter, EstimatorConfig, MIEstimate, NeighborSearch, SampleMatrix, BRUTE_FORCE_LIMIT};

pub(crate) use ksg::denominator;
