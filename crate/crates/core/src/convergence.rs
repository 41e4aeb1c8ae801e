//! Empirical verification of estimator convergence rates and of the
//! smoothing effect of common random sampling.
//!
//! A rate study runs `R` independent replicates of one estimator at each
//! rung of a sample-size ladder, records the replicate mean and variance
//! per rung, and fits log-log slopes of variance-vs-N and bias-vs-N.
//! Replicate seeds derive from a master seed per `(rung, replicate)`,
//! so studies are fully reproducible and rungs never share randomness.

use crate::error::{Error, Result};
use crate::estimators::{estimate_objective, EstimatorConfig};
use crate::model::{DesignPoint, ProblemDefinition};
use crate::rng::{derive_seed, StreamKind};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (ddof = 1).
pub fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Which scalar of the estimate report a study tracks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EstimatorTag {
    ExpectedUtility,
    UtilityVariance,
    /// The penalized objective at the lambda carried by the estimator config.
    Objective,
}

impl EstimatorTag {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "uhat" | "u" => Ok(Self::ExpectedUtility),
            "vhat" | "v" => Ok(Self::UtilityVariance),
            "jhat" | "j" => Ok(Self::Objective),
            other => Err(Error::Config(format!(
                "unknown estimator tag '{other}' (expected uhat|vhat|jhat)"
            ))),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::ExpectedUtility => "uhat",
            Self::UtilityVariance => "vhat",
            Self::Objective => "jhat",
        }
    }
}

/// Reference value the empirical bias is measured against.
#[derive(Debug, Clone, Copy)]
pub enum TruthSource {
    /// Closed form (available for the linear-Gaussian benchmark).
    Exact(f64),
    /// Self-estimated: replicate average at `factor` times the top rung.
    SelfEstimated { factor: usize, replicates: usize },
}

/// Results of one rate study.
#[derive(Debug, Clone)]
pub struct RateStudy {
    pub tag: EstimatorTag,
    pub ladder: Vec<usize>,
    pub replicates: usize,
    /// Per-rung replicate mean.
    pub rung_means: Vec<f64>,
    /// Per-rung replicate variance (ddof = 1).
    pub rung_vars: Vec<f64>,
    /// Per-rung |replicate mean - truth|.
    pub rung_bias: Vec<f64>,
    pub truth: f64,
}

impl RateStudy {
    pub fn variance_slope(&self) -> Result<f64> {
        let ns: Vec<f64> = self.ladder.iter().map(|&n| n as f64).collect();
        fit_loglog_slope(&ns, &self.rung_vars).map(|f| f.slope)
    }

    pub fn bias_slope(&self) -> Result<f64> {
        let ns: Vec<f64> = self.ladder.iter().map(|&n| n as f64).collect();
        fit_loglog_slope(&ns, &self.rung_bias).map(|f| f.slope)
    }
}

fn evaluate(
    problem: &ProblemDefinition,
    xi: &DesignPoint,
    tag: EstimatorTag,
    base: &EstimatorConfig,
    n: usize,
    seed: u64,
) -> Result<f64> {
    let config = EstimatorConfig {
        n,
        m1: if base.reuse { n } else { base.m1 },
        m2: if base.reuse { n } else { base.m2 },
        crs_seed: None,
        ..base.clone()
    };
    let report = estimate_objective(problem, xi, &config, seed)?;
    Ok(match tag {
        EstimatorTag::ExpectedUtility => report.u_hat,
        EstimatorTag::UtilityVariance => report.v_hat,
        EstimatorTag::Objective => report.j_hat,
    })
}

/// Runs `replicates` independent estimates at every ladder rung and
/// aggregates bias (against the truth source) and replicate variance.
pub fn run_rate_study(
    problem: &ProblemDefinition,
    xi: &DesignPoint,
    tag: EstimatorTag,
    base: &EstimatorConfig,
    ladder: &[usize],
    replicates: usize,
    truth: TruthSource,
    master_seed: u64,
) -> Result<RateStudy> {
    if ladder.len() < 2 || ladder.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("ladder must be strictly increasing".into()));
    }
    if replicates < 2 {
        return Err(Error::Config("need at least 2 replicates per rung".into()));
    }

    let truth_value = match truth {
        TruthSource::Exact(v) => v,
        TruthSource::SelfEstimated {
            factor,
            replicates: reps,
        } => {
            let n_ref = ladder.last().unwrap() * factor;
            let values: Vec<f64> = (0..reps)
                .map(|r| {
                    let seed =
                        derive_seed(master_seed, StreamKind::Replicate, (1 << 40) + r as u64);
                    evaluate(problem, xi, tag, base, n_ref, seed)
                })
                .collect::<Result<_>>()?;
            mean(&values)
        }
    };

    let mut rung_means = Vec::with_capacity(ladder.len());
    let mut rung_vars = Vec::with_capacity(ladder.len());
    let mut rung_bias = Vec::with_capacity(ladder.len());
    for (rung_idx, &n) in ladder.iter().enumerate() {
        let values: Vec<f64> = (0..replicates)
            .map(|r| {
                let seed = derive_seed(
                    master_seed,
                    StreamKind::Replicate,
                    ((rung_idx as u64) << 20) | r as u64,
                );
                evaluate(problem, xi, tag, base, n, seed)
            })
            .collect::<Result<_>>()?;
        rung_means.push(mean(&values));
        rung_vars.push(sample_variance(&values));
        rung_bias.push((mean(&values) - truth_value).abs());
    }

    Ok(RateStudy {
        tag,
        ladder: ladder.to_vec(),
        replicates,
        rung_means,
        rung_vars,
        rung_bias,
        truth: truth_value,
    })
}

/// Least-squares fit of `log(value) ~ slope * log(n) + intercept`.
#[derive(Debug, Clone, Copy)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    /// Residual sum of squares in log space.
    pub residual: f64,
}

pub fn fit_loglog_slope(ns: &[f64], values: &[f64]) -> Result<LogLogFit> {
    if ns.len() != values.len() || ns.len() < 3 {
        return Err(Error::Config(
            "log-log fit needs at least 3 matching points".into(),
        ));
    }
    if values.iter().any(|&v| !(v > 0.0)) || ns.iter().any(|&n| !(n > 0.0)) {
        return Err(Error::Config("log-log fit needs positive values".into()));
    }
    let xs: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let xbar = mean(&xs);
    let ybar = mean(&ys);
    let sxx: f64 = xs.iter().map(|x| (x - xbar).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - (slope * x + intercept)).powi(2))
        .sum();
    Ok(LogLogFit {
        slope,
        intercept,
        residual,
    })
}

/// Paired total-variation roughness of an estimated curve along a 1D
/// design grid, with one shared bank (CRS) and with a fresh bank per
/// design.
#[derive(Debug, Clone)]
pub struct CrsStudy {
    pub grid: Vec<DesignPoint>,
    pub with_crs: Vec<f64>,
    pub without_crs: Vec<f64>,
    pub tv_with: f64,
    pub tv_without: f64,
}

fn total_variation(values: &[f64]) -> f64 {
    values.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

/// Sweeps the utility-variance estimate along `grid` twice: once with a
/// single shared bank seed, once with per-design fresh seeds, and
/// reports both curves with their total variations.
pub fn crs_smoothness_study(
    problem: &ProblemDefinition,
    base: &EstimatorConfig,
    grid: &[DesignPoint],
    master_seed: u64,
) -> Result<CrsStudy> {
    if grid.len() < 50 {
        return Err(Error::Config(
            "CRS smoothness study needs a design grid of at least 50 points".into(),
        ));
    }
    let shared_seed = derive_seed(master_seed, StreamKind::Evaluation, u64::MAX);
    let crs_config = EstimatorConfig {
        crs_seed: Some(shared_seed),
        ..base.clone()
    };
    let fresh_config = EstimatorConfig {
        crs_seed: None,
        ..base.clone()
    };

    let mut with_crs = Vec::with_capacity(grid.len());
    let mut without_crs = Vec::with_capacity(grid.len());
    for (k, xi) in grid.iter().enumerate() {
        let crs = estimate_objective(problem, xi, &crs_config, 0)?;
        with_crs.push(crs.v_hat);
        let fresh_seed = derive_seed(master_seed, StreamKind::Evaluation, k as u64);
        let fresh = estimate_objective(problem, xi, &fresh_config, fresh_seed)?;
        without_crs.push(fresh.v_hat);
    }
    let tv_with = total_variation(&with_crs);
    let tv_without = total_variation(&without_crs);
    Ok(CrsStudy {
        grid: grid.to_vec(),
        with_crs,
        without_crs,
        tv_with,
        tv_without,
    })
}

/// Uniform 1D design grid helper.
pub fn design_grid_1d(lo: f64, hi: f64, count: usize) -> Vec<DesignPoint> {
    (0..count)
        .map(|k| {
            let t = k as f64 / (count - 1) as f64;
            DesignPoint(vec![lo + t * (hi - lo)])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;

    #[test]
    fn loglog_slope_recovers_exact_power_laws() {
        let ns = [100.0, 316.0, 1000.0, 3162.0, 10000.0];
        let inv: Vec<f64> = ns.iter().map(|n| 3.7 / n).collect();
        let fit = fit_loglog_slope(&ns, &inv).unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-12, "{}", fit.slope);
        assert!(fit.residual < 1e-20);

        let constant: Vec<f64> = ns.iter().map(|_| 0.42).collect();
        let fit = fit_loglog_slope(&ns, &constant).unwrap();
        assert!(fit.slope.abs() < 1e-12);

        let sq: Vec<f64> = ns.iter().map(|n| 5.0 / (n * n)).collect();
        let fit = fit_loglog_slope(&ns, &sq).unwrap();
        assert!((fit.slope + 2.0).abs() < 1e-12);
    }

    #[test]
    fn loglog_slope_rejects_bad_input() {
        assert!(fit_loglog_slope(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(fit_loglog_slope(&[1.0, 2.0, 3.0], &[1.0, 0.0, 2.0]).is_err());
        assert!(fit_loglog_slope(&[1.0, 2.0, 3.0], &[1.0, -0.5, 2.0]).is_err());
    }

    #[test]
    fn rate_study_is_reproducible_and_rejects_bad_ladders() {
        let problem = models::by_name("lingauss-1d").unwrap();
        let xi = DesignPoint(vec![3.0]);
        let base = EstimatorConfig::reuse(10, 0.0);
        let ladder = [50usize, 100, 200];
        let truth = TruthSource::Exact(models::lingauss::exact_expected_utility(3.0));
        let a = run_rate_study(
            &problem,
            &xi,
            EstimatorTag::ExpectedUtility,
            &base,
            &ladder,
            3,
            truth,
            77,
        )
        .unwrap();
        let b = run_rate_study(
            &problem,
            &xi,
            EstimatorTag::ExpectedUtility,
            &base,
            &ladder,
            3,
            truth,
            77,
        )
        .unwrap();
        assert_eq!(a.rung_means, b.rung_means);
        assert_eq!(a.rung_vars, b.rung_vars);

        assert!(run_rate_study(
            &problem,
            &xi,
            EstimatorTag::ExpectedUtility,
            &base,
            &[100, 100],
            3,
            truth,
            0,
        )
        .is_err());
    }

    #[test]
    fn objective_study_at_lambda_zero_matches_utility_study() {
        let problem = models::by_name("lingauss-1d").unwrap();
        let xi = DesignPoint(vec![2.0]);
        let base = EstimatorConfig::reuse(10, 0.0);
        let ladder = [50usize, 100, 200];
        let truth = TruthSource::Exact(models::lingauss::exact_expected_utility(2.0));
        let u = run_rate_study(
            &problem,
            &xi,
            EstimatorTag::ExpectedUtility,
            &base,
            &ladder,
            3,
            truth,
            13,
        )
        .unwrap();
        let j = run_rate_study(
            &problem,
            &xi,
            EstimatorTag::Objective,
            &base,
            &ladder,
            3,
            truth,
            13,
        )
        .unwrap();
        assert_eq!(u.rung_means, j.rung_means);
        assert_eq!(u.rung_vars, j.rung_vars);
    }

    #[test]
    fn crs_study_requires_dense_grid_and_is_deterministic() {
        let problem = models::by_name("lingauss-1d").unwrap();
        let base = EstimatorConfig::reuse(50, 0.0);
        let short = design_grid_1d(0.0, 3.0, 10);
        assert!(crs_smoothness_study(&problem, &base, &short, 0).is_err());

        let grid = design_grid_1d(0.0, 3.0, 50);
        let a = crs_smoothness_study(&problem, &base, &grid, 4).unwrap();
        let b = crs_smoothness_study(&problem, &base, &grid, 4).unwrap();
        assert_eq!(a.with_crs, b.with_crs);
        assert_eq!(a.without_crs, b.without_crs);
        assert!(a.tv_with > 0.0 && a.tv_without > 0.0);
    }
}
