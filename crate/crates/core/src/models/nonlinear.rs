//! Nonlinear benchmark: `Y_k = theta^3 xi_k^2 + theta exp(-1.3 |0.2 - xi_k|) + eps_k`
//! with `theta ~ U[0, 1]` and `eps ~ N(0, 1e-4 I)`.
//!
//! `xi in [0,1]^d` for d in {1, 2}; the 2D design runs the experiment
//! twice, so observations are conditionally independent given theta with
//! per-component variance 1e-4.

use crate::error::{Error, Result};
use crate::model::{
    DesignConstraint, DesignDomain, ForwardModel, GaussianNoiseModel, Prior, ProblemDefinition,
};

/// Benchmark constants.
#[derive(Debug, Clone, Copy)]
pub struct NonlinearSpec {
    pub noise_var: f64,
    pub executions: usize,
}

pub const NOISE_VAR: f64 = 1e-4;

/// Scalar forward map `theta^3 xi^2 + theta exp(-1.3 |0.2 - xi|)`.
pub fn forward(theta: f64, xi: f64) -> f64 {
    theta * theta * theta * xi * xi + theta * (-1.3 * (0.2 - xi).abs()).exp()
}

pub fn problem(executions: usize) -> Result<ProblemDefinition> {
    if !(1..=2).contains(&executions) {
        return Err(Error::Config(format!(
            "nonlinear model supports 1 or 2 executions, got {executions}"
        )));
    }
    let name = if executions == 1 {
        "nonlinear-1d"
    } else {
        "nonlinear-2d"
    };
    ProblemDefinition::new(
        name,
        Prior::uniform_box(vec![0.0], vec![1.0])?,
        ForwardModel::Nonlinear { executions },
        GaussianNoiseModel::iid(NOISE_VAR, executions)?,
        DesignDomain::new(vec![(0.0, 1.0); executions])?,
        DesignConstraint::BoxOnly,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{forward_eval, DesignPoint, ParameterSample};

    #[test]
    fn scalar_forward_known_values() {
        assert_eq!(forward(0.0, 0.37), 0.0);
        assert!((forward(0.5, 0.2) - 0.505).abs() < 1e-15);
        assert!((forward(1.0, 0.0) - (-0.26f64).exp()).abs() < 1e-15);
        // frozen: exp(-0.26) = 0.7710515858035663
        assert!((forward(1.0, 0.0) - 0.771_051_585_803_566_3).abs() < 1e-12);
    }

    #[test]
    fn two_executions_are_componentwise() {
        let p = problem(2).unwrap();
        let theta = ParameterSample(vec![0.7]);
        let xi = DesignPoint(vec![0.3, 0.9]);
        let g = forward_eval(&p, &theta, &xi).unwrap();
        assert_eq!(g.len(), 2);
        assert!((g[0] - forward(0.7, 0.3)).abs() < 1e-15);
        assert!((g[1] - forward(0.7, 0.9)).abs() < 1e-15);
    }
}
