//! Simulation and optimization lab for two-tier heterogeneous cellular
//! networks.
//!
//! The crate is organised bottom-up:
//!
//! - [`scenario`] builds topologies, large-scale gains, pilot groups, channel
//!   realizations and MMSE estimates.
//! - [`precoding`] forms MRT and full-pilot zero-forcing precoders and the
//!   transmit/receive signal model.
//! - [`capacity`] evaluates the ergodic-rate lower bound both in closed form
//!   and by Monte Carlo over the desired-signal / beamforming-uncertainty /
//!   inter-user decomposition, plus network energy efficiency.
//! - [`coopnet`] simulates network-coded cooperative relaying with
//!   ordered-SNR source and relay selection over a prime field.
//! - [`hybridrl`] is a parameterized-action Q-learning agent (discrete choice
//!   plus continuous parameter) with a small-cell on/off environment.
//! - [`placement`] solves K-means + p-center replica placement.
//! - [`cli`] ingests experiment files and writes CSV results (behind the
//!   `cli` feature).
//!
//! Every stochastic routine takes an explicit stream from [`rng`], so results
//! are pure functions of configuration and seed.

// `!(a < b)` comparisons are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod capacity;
pub mod coopnet;
pub mod error;
pub mod hybridrl;
pub mod placement;
pub mod precoding;
pub mod rng;
pub mod scenario;
pub mod units;

#[cfg(feature = "cli")]
pub mod cli;

pub use error::{Error, Result};

/// Complex baseband sample.
pub type C64 = num_complex::Complex64;
