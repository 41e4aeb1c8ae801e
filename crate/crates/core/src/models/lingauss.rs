//! Linear-Gaussian benchmark: `Y = theta * xi + eps` with
//! `theta ~ N(0, 3^2)`, `eps ~ N(0, 1)`, `xi in [0, 3]`.
//!
//! Conjugacy makes everything available in closed form. With the
//! signal-to-noise ratio `r = sigma0^2 xi^2 / sigma_eps^2`:
//!
//! * posterior: `theta | y ~ N(sigma0^2 xi y / (sigma_eps^2 (1+r)), sigma0^2/(1+r))`
//! * realized information gain, quadratic in the observation:
//!   `u(y) = c0 + c1 y^2` with
//!   `c0 = (1/2) ln(1+r) + 1/(2(1+r)) - 1/2` and
//!   `c1 = r / (2 sigma_eps^2 (1+r)^2)`
//! * expected utility `U = E[u(Y)] = (1/2) ln(1+r)` since `Y ~ N(0, sigma_eps^2 (1+r))`
//! * utility variance `V = Var[u(Y)] = 2 c1^2 sigma_y^4 = r^2 / (2 (1+r)^2)`.
//!
//! The `u(y)` coefficients are exercised against brute-force Monte Carlo
//! oracles in the test suite before the closed forms are trusted
//! anywhere else.

use crate::error::Result;
use crate::model::{
    DesignConstraint, DesignDomain, ForwardModel, GaussianNoiseModel, Prior, ProblemDefinition,
};

/// Fixed benchmark constants.
#[derive(Debug, Clone, Copy)]
pub struct LinearGaussianSpec {
    pub prior_mean: f64,
    pub prior_var: f64,
    pub noise_var: f64,
    pub design_lo: f64,
    pub design_hi: f64,
}

impl Default for LinearGaussianSpec {
    fn default() -> Self {
        Self {
            prior_mean: 0.0,
            prior_var: 9.0,
            noise_var: 1.0,
            design_lo: 0.0,
            design_hi: 3.0,
        }
    }
}

pub const SPEC: LinearGaussianSpec = LinearGaussianSpec {
    prior_mean: 0.0,
    prior_var: 9.0,
    noise_var: 1.0,
    design_lo: 0.0,
    design_hi: 3.0,
};

pub fn problem() -> Result<ProblemDefinition> {
    ProblemDefinition::new(
        "lingauss-1d",
        Prior::gaussian(SPEC.prior_mean, SPEC.prior_var)?,
        ForwardModel::LinearGaussian,
        GaussianNoiseModel::iid(SPEC.noise_var, 1)?,
        DesignDomain::new(vec![(SPEC.design_lo, SPEC.design_hi)])?,
        DesignConstraint::BoxOnly,
    )
}

fn snr(xi: f64) -> f64 {
    SPEC.prior_var * xi * xi / SPEC.noise_var
}

/// Coefficients `(c0, c1)` of the realized information gain
/// `u(y) = c0 + c1 y^2`.
pub fn kl_coefficients(xi: f64) -> (f64, f64) {
    let r = snr(xi);
    let c0 = 0.5 * (1.0 + r).ln() + 0.5 / (1.0 + r) - 0.5;
    let c1 = r / (2.0 * SPEC.noise_var * (1.0 + r) * (1.0 + r));
    (c0, c1)
}

/// Realized KL information gain for observation `y` at design `xi`.
pub fn exact_kl(xi: f64, y: f64) -> f64 {
    let (c0, c1) = kl_coefficients(xi);
    c0 + c1 * y * y
}

/// Marginal predictive variance of `Y` at design `xi`.
pub fn marginal_variance(xi: f64) -> f64 {
    SPEC.prior_var * xi * xi + SPEC.noise_var
}

/// Closed-form expected utility `U(xi) = (1/2) ln(1 + sigma0^2 xi^2 / sigma_eps^2)`.
pub fn exact_expected_utility(xi: f64) -> f64 {
    0.5 * snr(xi).ln_1p()
}

/// Closed-form utility variance `V(xi) = r^2 / (2 (1+r)^2)`.
pub fn exact_utility_variance(xi: f64) -> f64 {
    let r = snr(xi);
    let ratio = r / (1.0 + r);
    0.5 * ratio * ratio
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn expected_utility_known_values() {
        assert_eq!(exact_expected_utility(0.0), 0.0);
        assert!((exact_expected_utility(3.0) - 0.5 * 82.0f64.ln()).abs() < 1e-15);
        assert!((exact_expected_utility(1.0) - 0.5 * 10.0f64.ln()).abs() < 1e-15);
        // Frozen reference numbers.
        assert!((exact_expected_utility(3.0) - 2.203_359_623_632_126_7).abs() < 1e-12);
        assert!((exact_expected_utility(1.0) - 1.151_292_546_497_023).abs() < 1e-12);
    }

    #[test]
    fn variance_is_zero_at_zero_and_saturates() {
        assert_eq!(exact_utility_variance(0.0), 0.0);
        let v1 = exact_utility_variance(1.0);
        let v2 = exact_utility_variance(2.0);
        let v3 = exact_utility_variance(3.0);
        assert!(v1 < v2 && v2 < v3);
        // saturation: marginal increase shrinks
        assert!(v3 - v2 < v2 - v1);
        // frozen value at xi = 3: (81/82)^2 / 2
        assert!((v3 - 0.487_879_238_548_483).abs() < 1e-12);
    }

    /// Brute-force Monte Carlo oracle for both closed forms: draw
    /// y ~ N(0, sigma_y^2), evaluate the exact conjugate KL u(y), and
    /// compare sample mean/variance with the formulas.
    #[test]
    fn closed_forms_match_direct_mc_oracle() {
        let xi = 3.0;
        let sd = marginal_variance(xi).sqrt();
        let mut rng = crate::rng::substream(123, crate::rng::StreamKind::Replicate, 0);
        let m = 10_000_000usize;
        let (mut s1, mut s2) = (0.0f64, 0.0f64);
        for _ in 0..m {
            let y: f64 = sd * rng.sample::<f64, _>(StandardNormal);
            let u = exact_kl(xi, y);
            s1 += u;
            s2 += u * u;
        }
        let mean = s1 / m as f64;
        let var = s2 / m as f64 - mean * mean;
        let u_exact = exact_expected_utility(xi);
        let v_exact = exact_utility_variance(xi);
        assert!(
            (mean - u_exact).abs() / u_exact < 5e-3,
            "MC mean {mean} vs exact {u_exact}"
        );
        assert!(
            (var - v_exact).abs() / v_exact < 5e-3,
            "MC variance {var} vs exact {v_exact}"
        );
    }

    /// The KL coefficients must reproduce u(y) computed from first
    /// principles (posterior moments inserted into the Gaussian KL).
    #[test]
    fn kl_coefficients_match_first_principles() {
        for &(xi, y) in &[(0.5, -1.3), (1.0, 1.0), (3.0, 2.4), (2.0, 0.0)] {
            let s0 = SPEC.prior_var;
            let se = SPEC.noise_var;
            let post_var = s0 * se / (se + s0 * xi * xi);
            let post_mean = s0 * xi * y / (se + s0 * xi * xi);
            let kl = 0.5 * (s0 / post_var).ln() + (post_var + post_mean * post_mean) / (2.0 * s0)
                - 0.5;
            assert!(
                (exact_kl(xi, y) - kl).abs() < 1e-12,
                "xi={xi} y={y}: {} vs {kl}",
                exact_kl(xi, y)
            );
        }
    }
}
