//! Primal-dual stochastic mirror descent for convex programs with inexactly
//! computable functional constraints, and its application to mixing
//! average-reward MDPs under a generative model.
//!
//! The crate is organised bottom-up:
//!
//! - [`prox`] and [`solver`]: the generic constrained mirror-descent method,
//!   its dual-variable reconstruction, iteration bounds and a brute-force
//!   duality-gap oracle used for verification.
//! - [`mdp`]: tabular MDPs, the RiverSwim and Access-Control environments
//!   and exact evaluation oracles (stationary distribution, policy value,
//!   optimal gain, mixing time).
//! - [`estimation`]: empirical transition models built from generative-model
//!   samples.
//! - [`amdp`]: the average-reward LP solved with the constrained method,
//!   incremental constraint caches and policy rounding.
//! - [`parallel`]: the head/worker message-passing execution of the AMDP
//!   solver.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod amdp;
pub mod error;
pub mod estimation;
pub mod mdp;
pub mod parallel;
pub mod prox;
pub mod rng;
pub mod solver;

pub use error::{Error, Result};
