//! Risk-aware Bayesian optimal experimental design.
//!
//! This library estimates three quantities for a candidate experimental
//! design `xi`:
//!
//! * the expected information gain `U(xi)` (expected KL divergence from
//!   prior to posterior over outcomes of the experiment),
//! * the variance `V(xi)` of the realized information gain across
//!   outcomes, and
//! * the variance-penalized objective `J_lambda(xi) = U(xi) - lambda * V(xi)`,
//!
//! all by prior-sampling Monte Carlo (no posterior sampling), and then
//! maximizes `J_lambda` over a box design domain with a Gaussian-process
//! Bayesian-optimization loop.
//!
//! The crate is organized around:
//!
//! * [`model`] — the problem abstraction (prior, forward map, Gaussian
//!   noise, design domain) and the seeded [`model::SampleBank`] that makes
//!   every estimate reproducible and enables common random sampling (CRS)
//!   across designs.
//! * [`estimators`] — the nested Monte Carlo estimators for `U`, the
//!   second moment `M2` (split into three components), `V`, and `J`,
//!   plus a grid-quadrature information-gain oracle for validation.
//! * [`models`] — built-in benchmark problems (a conjugate linear-Gaussian
//!   model with closed forms, and a cubic nonlinear model).
//! * [`pde`] — a 2D diffusion solver with obstacle masks and a tabulated
//!   interpolating surrogate, used by the contaminant source-inversion
//!   problems.
//! * [`bo`] — the Gaussian-process surrogate, UCB acquisition, and the
//!   outer optimization loop.
//! * [`convergence`] — empirical bias/variance rate studies and the CRS
//!   smoothing study.
//!
//! Determinism contract: nothing in this crate reads the wall clock or
//! ambient randomness. Every random stream derives from an explicit
//! 64-bit master seed via [`rng::substream`].

pub mod bo;
pub mod convergence;
pub mod error;
pub mod estimators;
pub mod model;
pub mod models;
pub mod pde;
pub mod rng;

pub use error::{Error, Result};
pub use estimators::{EstimateReport, EstimatorConfig};
pub use model::{
    DesignDomain, DesignPoint, GaussianNoiseModel, Observation, ParameterSample,
    ProblemDefinition, SampleBank,
};
