//! Bayesian nonparametric trait-allocation inference under Stable
//! transform-scaled process (ST-SP) priors.
//!
//! The crate is organised bottom-up:
//!
//! - [`special_math`]: log-gamma/log-beta, Gauss–Laguerre rules, adaptive
//!   quadrature and the `I(r, k)` family of integrals.
//! - [`distributions`]: negative-binomial, Gamma and Poisson laws plus the
//!   bespoke samplers used by the restaurant process.
//! - [`stsp`]: datasets, sufficient statistics, exact log-marginals and
//!   predictive laws for the Poisson, negative-binomial and Gaussian
//!   spike-and-slab score models.
//! - [`baselines`]: the Gamma-process (NB-Ga) and stable-Beta (SB-SP)
//!   comparators.
//! - [`generative`]: restaurant-process and Zipf simulators.
//! - [`fitting`]: empirical-Bayes hyperparameter estimation.
//! - [`classifier`]: nonparametric naive-Bayes text classification.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod classifier;
pub mod distributions;
pub mod error;
pub mod fitting;
pub mod generative;
pub mod special_math;
pub mod stsp;

pub use error::{Error, Result};
