//! Solvers for α-risk-sensitive linearly solvable control problems.
//!
//! A problem is a finite Markov chain with passive dynamics `π₀`, a state
//! cost `q`, and a risk parameter `α`. The controller picks the next-state
//! distribution directly and pays a Rényi divergence from `π₀` for doing so.
//! Under the transform `z = exp((α−1)v)` the Bellman equation becomes linear,
//! which is what every solver in [`solver`] exploits.
//!
//! Module map:
//!
//! - [`divergence`]: Rényi / KL divergences, the `Ψ` certainty-equivalent
//!   operator and the closed-form variational minimizer.
//! - [`model`] and [`specfile`]: problem representation, validation and the
//!   on-disk problem format.
//! - [`discretizer`]: Euler discretization of diffusions on rectangular grids,
//!   including the hill-car preset.
//! - [`solver`]: finite-horizon, first-exit and average-cost solvers, policy
//!   extraction and fixed-policy evaluation.
//! - [`analysis`]: composition of solutions, path-integral Monte Carlo,
//!   stationary distributions and the brute-force game check.
//! - [`cli`]: the `rslc` command-line front end.

// NaN must fail these checks, so `!(x > 0.0)` is deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod discretizer;
pub mod divergence;
mod error;
pub mod linalg;
pub mod model;
pub mod solver;
pub mod sparse;
pub mod specfile;

pub use error::{Error, Result};
pub use model::{CostModel, HorizonKind, Policy, ProblemSpec, RunningCost, StateSpace};
pub use solver::{SolveReport, SolverOptions, ValueFunction, ZFunction};
pub use sparse::SparseRowStochasticMatrix;
