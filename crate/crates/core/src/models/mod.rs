//! Built-in benchmark problems.
//!
//! `lingauss-1d` is the conjugate linear-Gaussian model with closed-form
//! expected utility and utility variance, used as the validation anchor
//! for every estimator. `nonlinear-1d` / `nonlinear-2d` is a cubic model
//! whose mean-optimal and variance-penalized-optimal designs differ.
//! The diffusion source-inversion problems are built from a surrogate
//! table via [`diffusion::diffusion_problem`].

pub mod diffusion;
pub mod lingauss;
pub mod nonlinear;

use crate::error::{Error, Result};
use crate::model::ProblemDefinition;

/// Model names accepted in configuration files.
pub const MODEL_NAMES: &[&str] = &["lingauss-1d", "nonlinear-1d", "nonlinear-2d"];

/// Constructs a built-in closed-form problem by registered name.
/// Diffusion problems need a surrogate table and are built through
/// [`diffusion::diffusion_problem`] instead.
pub fn by_name(name: &str) -> Result<ProblemDefinition> {
    match name {
        "lingauss-1d" => lingauss::problem(),
        "nonlinear-1d" => nonlinear::problem(1),
        "nonlinear-2d" => nonlinear::problem(2),
        other => Err(Error::Config(format!(
            "unknown model '{other}' (expected one of {MODEL_NAMES:?} or a diffusion problem)"
        ))),
    }
}

/// A forward model constant in the parameters: zero information for any
/// design. Useful for estimator edge-case checks.
pub fn zero_information(n: usize) -> Result<ProblemDefinition> {
    use crate::model::{
        DesignConstraint, DesignDomain, ForwardModel, GaussianNoiseModel, Prior,
    };
    ProblemDefinition::new(
        "constant-zero",
        Prior::uniform_box(vec![0.0], vec![1.0])?,
        ForwardModel::ConstantZero { n, p: 1 },
        GaussianNoiseModel::iid(1.0, n)?,
        DesignDomain::new(vec![(0.0, 1.0)])?,
        DesignConstraint::BoxOnly,
    )
}
