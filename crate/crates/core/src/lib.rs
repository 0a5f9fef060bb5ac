//! Channel capacity and capacity bounds for the additive mixed
//! Gaussian-impulsive noise (MGIN) channel.
//!
//! The crate is organised bottom-up:
//!
//! * [`special_fn`]: gamma, Gauss and generalized hypergeometric series,
//!   Gaussian tails, Gauss-Hermite rules and an adaptive Gauss-Kronrod
//!   integrator.
//! * [`noise_model`]: the five-parameter mixed noise density, its derived
//!   constants, moments, sampler and GSNR conversion.
//! * [`approx_entropy`]: the two-piece approximation of the density with the
//!   KLD-optimal split point, its closed-form differential entropy and a
//!   numeric entropy oracle.
//! * [`capacity_bounds`]: closed-form lower bounds L1/L2, the duality upper
//!   bound U, the gap and the asymptotic capacity.
//! * [`ba_solver`]: moment-constrained Blahut-Arimoto on a discretized
//!   channel with a KKT certificate.
//! * [`pam`]: M-PAM symbol error rate, Fano and Gauss-Hermite lower bounds,
//!   Bhattacharyya parameter and a numeric mutual-information oracle.
//! * [`cli`]: config parsing, scenario execution and CSV/report emission
//!   used by the `mgincap` binary.
//!
//! All entropies, capacities and bounds are in nats unless a function says
//! otherwise.

pub mod approx_entropy;
pub mod ba_solver;
pub mod capacity_bounds;
pub mod cli;
mod error;
pub mod noise_model;
pub mod pam;
pub mod special_fn;

pub use error::{Error, Result};

pub use approx_entropy::ApproxModel;
pub use ba_solver::{BaOptions, BaResult, DiscreteChannel};
pub use capacity_bounds::{BoundSet, MaxEntInput};
pub use noise_model::{DerivedConstants, NoiseModel, NoiseParams};
pub use pam::{PamBounds, PamSpec};

/// Converts nats to bits.
#[inline]
pub fn nats_to_bits(x: f64) -> f64 {
    x / std::f64::consts::LN_2
}
