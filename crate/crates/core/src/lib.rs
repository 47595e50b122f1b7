//! Numerical laboratory for Nosé-Hoover and Nosé-Hoover-chain thermostatted
//! harmonic oscillators.
//!
//! * [`dynamics`]: vector fields, action-angle coordinates, the averaged
//!   systems, their first integral and the invariant Gibbs densities.
//! * [`integrators`]: RK4 and time-reversible splitting steps, plus a
//!   streaming driver feeding [`integrators::Observer`]s.
//! * [`sections`]: Poincaré sections, return maps, fixed points, rotation
//!   numbers, Diophantine filtering and island-chain detection.
//! * [`analysis`]: turning points, the period function of the averaged
//!   system, the twist property and trajectory confinement.
//! * [`ergodicity`]: histograms, reference Gibbs marginals, star discrepancy
//!   and power-law fits.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod dynamics;
pub mod ergodicity;
mod error;
pub mod integrators;
pub mod sections;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
