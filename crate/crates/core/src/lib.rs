//! Semiparametric efficiency for structured Gaussian copula models.
//!
//! A Gaussian copula model is a map θ ↦ R(θ) from a k-dimensional parameter
//! to p×p correlation matrices, with the margins left completely unknown.
//! This crate computes, for any such model:
//!
//! * the parametric Fisher information I(θ), the efficient information I*(θ)
//!   and the efficient score matrices ([`geometry`]);
//! * the asymptotic covariance of the pseudo-likelihood estimator and
//!   algebraic checks for its efficiency, for regularity of quadratic
//!   influence matrices and for adaptivity ([`geometry`]);
//! * rank-based estimates from data: moment pilot, pseudo-likelihood and the
//!   efficient one-step update ([`estimators`]);
//! * seeded copula sampling and a parallel, deterministic Monte Carlo harness
//!   ([`sampler`], [`mc`]).
//!
//! ```
//! use copula_rank::{geometry, models::ModelSpec};
//!
//! let model = ModelSpec::Exchangeable { p: 3 }.build().unwrap();
//! let geom = copula_rank::models::eval_geometry(model.as_ref(), &[0.5]).unwrap();
//! let bundle = geometry::EfficiencyBundle::compute(&geom).unwrap();
//! assert!((bundle.eff_info_inv[(0, 0)] - 1.0 / 3.0).abs() < 1e-12);
//! ```

pub mod cli;
pub mod error;
pub mod estimators;
pub mod geometry;
pub mod mc;
pub mod models;
pub mod numcore;
pub mod sampler;

pub use error::{Error, Result};
