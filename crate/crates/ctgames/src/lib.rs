//! Continuous-time dynamic discrete choice games.
//!
//! This crate implements the full pipeline for finite-state games in which
//! players receive Poisson move arrivals and nature drives exogenous state
//! changes:
//!
//! - [`statespace`]: encoded state spaces, deterministic continuation maps,
//!   and the anonymous encoding used by the quality ladder model.
//! - [`jumpprocess`]: sparse intensity matrices, matrix exponentials via
//!   uniformization, trajectory simulation, and discrete-time sampling.
//! - [`equilibrium`]: Markov perfect equilibrium solvers (value function
//!   iteration over conditional choice probabilities) and the linear
//!   representation of the value function.
//! - [`identification`]: order conditions for recovering the intensity matrix
//!   from discretely sampled data, the stacked log-hazard system, and flow
//!   payoff recovery.
//! - [`estimation`]: continuous- and discrete-time likelihoods, quasi-Newton
//!   maximum likelihood with multiple starts, standard errors, likelihood
//!   ratio tests, and Monte Carlo drivers.
//! - [`models`]: the three canonical model families (single-agent renewal,
//!   two-player entry, quality ladder with Bertrand-Nash pricing).
//!
//! State indices are 1-based throughout the public API and in all file
//! formats, matching the encoded state space `{1, .., K}`. Player index 0
//! always refers to nature.

pub mod equilibrium;
pub mod error;
pub mod estimation;
pub mod identification;
pub mod jumpprocess;
pub mod models;
pub mod rngstream;
pub mod statespace;
pub(crate) mod util;

pub use error::{Error, Result};

/// Euler-Mascheroni constant, used in the closed form of the conditional
/// expectation of type-I extreme value shocks.
pub const EULER_MASCHERONI: f64 = 0.57721566490153286061;
