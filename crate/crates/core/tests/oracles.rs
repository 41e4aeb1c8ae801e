//! Independent oracles for the estimator outputs on the conjugate
//! linear-Gaussian benchmark. Every oracle here recomputes the target
//! quantity by quadrature or closed form, never through the estimator
//! code paths it validates.

use mvoed::convergence::{mean, sample_variance};
use mvoed::estimators::{
    estimate_m2a, estimate_m2b, estimate_m2c, estimate_objective, estimate_variance,
    EstimatorConfig,
};
use mvoed::model::{build_sample_bank, DesignPoint};
use mvoed::models::{self, lingauss};

const PRIOR_VAR: f64 = 9.0;
const NOISE_VAR: f64 = 1.0;

fn normal_pdf(x: f64, var: f64) -> f64 {
    (-0.5 * x * x / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

fn normal_logpdf(x: f64, var: f64) -> f64 {
    -0.5 * (2.0 * std::f64::consts::PI * var).ln() - 0.5 * x * x / var
}

/// Composite Simpson rule with `panels` (even) subintervals.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    assert!(panels >= 2 && panels % 2 == 0);
    let h = (b - a) / panels as f64;
    let mut total = f(a) + f(b);
    for k in 1..panels {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        total += w * f(a + k as f64 * h);
    }
    total * h / 3.0
}

/// Exact posterior mean of the log likelihood given `y`:
/// `E_{theta|y}[log p(y | theta, xi)]` from conjugate moments.
fn inner_log_lik_expectation(xi: f64, y: f64) -> f64 {
    let sy2 = PRIOR_VAR * xi * xi + NOISE_VAR;
    let post_var = PRIOR_VAR * NOISE_VAR / sy2;
    let post_mean = PRIOR_VAR * xi * y / sy2;
    let resid2 = (y - xi * post_mean).powi(2) + xi * xi * post_var;
    -0.5 * (2.0 * std::f64::consts::PI * NOISE_VAR).ln() - 0.5 * resid2 / NOISE_VAR
}

fn quad_m2a(xi: f64) -> f64 {
    let sy2 = PRIOR_VAR * xi * xi + NOISE_VAR;
    let lim = 10.0 * sy2.sqrt();
    simpson(
        |y| normal_pdf(y, sy2) * normal_logpdf(y, sy2).powi(2),
        -lim,
        lim,
        40_000,
    )
}

/// Tensor-grid quadrature of the cross term over the joint density
/// `p(theta) p(y|theta)`.
fn quad_m2b_tensor(xi: f64) -> f64 {
    let sy2 = PRIOR_VAR * xi * xi + NOISE_VAR;
    let t_lim = 8.0 * PRIOR_VAR.sqrt();
    let y_lim = 10.0 * sy2.sqrt();
    let panels = 1600usize;
    let outer = |theta: f64| {
        let p_theta = normal_pdf(theta, PRIOR_VAR);
        simpson(
            |y| {
                let ll = normal_logpdf(y - theta * xi, NOISE_VAR);
                p_theta * ll.exp() * ll * normal_logpdf(y, sy2)
            },
            -y_lim,
            y_lim,
            panels,
        )
    };
    -2.0 * simpson(outer, -t_lim, t_lim, panels)
}

/// 1D quadrature of the squared inner expectation using exact conjugate
/// posterior moments.
fn quad_m2c(xi: f64) -> f64 {
    let sy2 = PRIOR_VAR * xi * xi + NOISE_VAR;
    let lim = 10.0 * sy2.sqrt();
    simpson(
        |y| normal_pdf(y, sy2) * inner_log_lik_expectation(xi, y).powi(2),
        -lim,
        lim,
        40_000,
    )
}

fn se(values: &[f64]) -> f64 {
    (sample_variance(values) / values.len() as f64).sqrt()
}

#[test]
fn quadrature_components_sum_to_second_moment() {
    // Internal consistency of the oracles themselves: the three
    // components must reassemble V + U^2 from the closed forms.
    let xi = 3.0;
    let total = quad_m2a(xi) + quad_m2b_tensor(xi) + quad_m2c(xi);
    let expected =
        lingauss::exact_utility_variance(xi) + lingauss::exact_expected_utility(xi).powi(2);
    assert!(
        (total - expected).abs() < 1e-4,
        "quadrature total {total} vs closed form {expected}"
    );
}

#[test]
fn second_moment_components_match_quadrature_oracles() {
    let xi_val = 3.0;
    let problem = models::by_name("lingauss-1d").unwrap();
    let xi = DesignPoint(vec![xi_val]);
    let n = 10_000;
    let config = EstimatorConfig::reuse(n, 0.0).with_parallel(true);
    let bank = build_sample_bank(&problem, n, 2024).unwrap();
    let est = estimate_variance(&problem, &xi, &bank, &config).unwrap();
    let t = &est.terms;

    // per-sample summand spreads give the Monte Carlo standard errors
    let m2a_terms: Vec<f64> = t.log_marginal.iter().map(|&m| m * m).collect();
    let m2b_terms: Vec<f64> = t
        .log_lik
        .iter()
        .zip(&t.log_marginal)
        .map(|(&l, &m)| -2.0 * l * m)
        .collect();
    let m2c_terms: Vec<f64> = t.m2c_ratio.iter().map(|&r| r * r).collect();

    let qa = quad_m2a(xi_val);
    let qb = quad_m2b_tensor(xi_val);
    let qc = quad_m2c(xi_val);
    assert!(
        (estimate_m2a(t) - qa).abs() <= 2.0 * se(&m2a_terms),
        "m2a {} vs quadrature {qa} (2se {})",
        estimate_m2a(t),
        2.0 * se(&m2a_terms)
    );
    assert!(
        (estimate_m2b(t) - qb).abs() <= 2.0 * se(&m2b_terms),
        "m2b {} vs quadrature {qb} (2se {})",
        estimate_m2b(t),
        2.0 * se(&m2b_terms)
    );
    assert!(
        (estimate_m2c(t) - qc).abs() <= 2.0 * se(&m2c_terms),
        "m2c {} vs quadrature {qc} (2se {})",
        estimate_m2c(t),
        2.0 * se(&m2c_terms)
    );
}

#[test]
fn reuse_and_independent_agree_at_large_n() {
    // Double-loop oracle: the independent-inner-loop estimator at
    // N = M1 = 1e4 agrees with the reuse estimator within 0.05 nats.
    let problem = models::by_name("lingauss-1d").unwrap();
    let xi = DesignPoint(vec![3.0]);
    let n = 10_000;
    let reuse = estimate_objective(
        &problem,
        &xi,
        &EstimatorConfig::reuse(n, 0.0).with_parallel(true),
        91,
    )
    .unwrap();
    let indep = estimate_objective(
        &problem,
        &xi,
        &EstimatorConfig::independent(n, n, 4, 0.0).with_parallel(true),
        91,
    )
    .unwrap();
    assert!(
        (reuse.u_hat - indep.u_hat).abs() < 0.05,
        "reuse {} vs independent {}",
        reuse.u_hat,
        indep.u_hat
    );
    let exact = lingauss::exact_expected_utility(3.0);
    assert!((reuse.u_hat - exact).abs() < 0.05);
    assert!((indep.u_hat - exact).abs() < 0.05);
}

#[test]
fn variance_estimate_tracks_closed_form_over_replicates() {
    let problem = models::by_name("lingauss-1d").unwrap();
    let xi = DesignPoint(vec![3.0]);
    let config = EstimatorConfig::reuse(4000, 0.0).with_parallel(true);
    let replicates: Vec<f64> = (0..6)
        .map(|r| {
            estimate_objective(&problem, &xi, &config, 3000 + r)
                .unwrap()
                .v_hat
        })
        .collect();
    let exact = lingauss::exact_utility_variance(3.0);
    let m = mean(&replicates);
    assert!(
        (m - exact).abs() / exact < 0.08,
        "replicate mean {m} vs exact {exact}"
    );
}
