//! Hamiltonian Monte Carlo with a modified parameterized leapfrog (MPL)
//! integrator.
//!
//! The MPL step scales momentum by `alpha = 1 + alpha2 * dt^2` and position by
//! `beta = 1 + beta2 * dt^2`. With `alpha2 = beta2 = 0` it is the ordinary
//! Störmer–Verlet leapfrog; negative values damp the dynamics and positive
//! values inject energy.
//!
//! The crate is organized bottom-up:
//!
//! * [`phase`], [`mass`], [`params`], [`rng`] - phase-space primitives.
//! * [`targets`] - the target contract and the benchmark potentials.
//! * [`integrator`] - the MPL step, trajectories and numerical probes.
//! * [`sampler`] - the Metropolis-corrected chain and the multi-chain runner.
//! * [`aggressive`] - the mode-hopping variant for widely separated modes.
//! * [`diagnostics`] - ESS, R-hat, mixing time, condition number.
//! * [`config`], [`report`], [`verify`], [`bench`] - the benchmark harness behind the CLI.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aggressive;
pub mod bench;
pub mod config;
pub mod diagnostics;
mod error;
pub mod integrator;
pub mod mass;
pub mod params;
pub mod phase;
pub mod report;
pub mod rng;
pub mod sampler;
pub mod targets;
pub mod verify;

pub use error::{Error, Result};
pub use mass::MassMatrix;
pub use params::MplParameters;
pub use phase::PhaseState;
pub use rng::RngStream;
pub use targets::Target;

/// Crate version embedded in result provenance lines.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
