//! Numerical laboratory for a small quantum system coupled to a large reservoir
//! through a GUE random interaction.
//!
//! The crate compares two routes to the system's reduced state:
//! exact diagonalization of sampled composite Hamiltonians ([`ensemble`]) and the
//! deterministic matrix fixed-point equation for the partial-trace resolvent
//! ([`selfconsistent`]). [`gibbs`] checks that the normalized spectral density
//! approaches `exp(-beta H_S)/Z` as the reservoir grows, with the inverse temperature
//! supplied by the saddle-point thermodynamics in [`thermo`].
//!
//! Runnable examples (`cargo run --release --example NAME`):
//!
//! - `reservoir_conditions`: regularity report and thermodynamic table per reservoir family
//! - `semicircle`: scalar fixed point against the semicircle closed form
//! - `spectral_density`: real-axis solve and spectral density on an energy grid
//! - `darwin_fowler`: saddle-point density against Fourier inversion
//! - `crosscheck`: Monte Carlo reduced density matrix against the fixed-point prediction
//! - `self_averaging`: variance scaling of the partial-trace resolvent
//! - `gibbs_scan`: trace distance to the Gibbs state as the block count grows
//! - `canonical`: canonically weighted reduced state

// physics and Padé constants are kept at full printed precision; `!(x > 0.0)` rejects NaN
#![allow(clippy::excessive_precision, clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod ensemble;
pub mod error;
pub mod gibbs;
pub mod numerics;
pub mod reservoir;
pub mod selfconsistent;
pub mod thermo;

pub use error::{Error, Result};
