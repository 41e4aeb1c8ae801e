//! Monte Carlo estimators for the expected utility, the utility second
//! moment and its three components, the utility variance, and the
//! variance-penalized objective.
//!
//! All estimators draw an outer set of `N` joint samples
//! `(theta_i, y_i)` and estimate the marginal likelihood of each `y_i`
//! with an inner prior average. Two inner-sampling modes exist:
//!
//! * **reuse** (`N = M1 = M2`): the inner averages reuse the outer prior
//!   samples, so one design evaluation needs exactly `N` forward-model
//!   evaluations;
//! * **independent**: each outer sample gets fresh inner draws from
//!   sub-seeds derived from the bank seed, the classical double-loop
//!   estimator (used as the reference the reuse mode is checked against).
//!
//! All likelihood arithmetic stays in log space. The second-moment
//! component that averages `p * log p` terms is a signed sum accumulated
//! under a max-shift shared with the marginal-likelihood denominator, so
//! the ratio of the two stays stable across hundreds of nats of dynamic
//! range.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{
    build_sample_bank, forward_eval, DesignPoint, Observation, ParameterSample,
    ProblemDefinition, SampleBank,
};
use crate::rng::{substream, StreamKind};

/// Sample sizes and options for one objective evaluation.
#[derive(Debug, Clone)]
pub struct EstimatorConfig {
    /// Outer sample count.
    pub n: usize,
    /// Inner count for the marginal-likelihood estimate.
    pub m1: usize,
    /// Inner count for the second-moment numerator.
    pub m2: usize,
    /// Reuse the outer prior samples in the inner loops (forces
    /// `n == m1 == m2`).
    pub reuse: bool,
    /// Variance penalty weight.
    pub lambda: f64,
    /// When set, every design evaluation rebuilds its bank from this
    /// seed (common random sampling across designs).
    pub crs_seed: Option<u64>,
    /// Evaluate outer samples on the rayon pool. Per-sample results are
    /// still reduced sequentially in index order, so output is
    /// bit-identical to the sequential mode.
    pub parallel: bool,
    /// Estimation fails if more than this fraction of outer samples is
    /// degenerate (zero marginal-likelihood estimate).
    pub max_dropped_frac: f64,
}

impl EstimatorConfig {
    /// Sample-reuse configuration with `n = m1 = m2`.
    pub fn reuse(n: usize, lambda: f64) -> Self {
        Self {
            n,
            m1: n,
            m2: n,
            reuse: true,
            lambda,
            crs_seed: None,
            parallel: false,
            max_dropped_frac: 0.01,
        }
    }

    /// Independent-inner-loop configuration.
    pub fn independent(n: usize, m1: usize, m2: usize, lambda: f64) -> Self {
        Self {
            n,
            m1,
            m2,
            reuse: false,
            lambda,
            crs_seed: None,
            parallel: false,
            max_dropped_frac: 0.01,
        }
    }

    pub fn with_crs(mut self, seed: u64) -> Self {
        self.crs_seed = Some(seed);
        self
    }

    pub fn with_parallel(mut self, parallel: bool) -> Self {
        self.parallel = parallel;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.m1 < 2 || self.m2 < 2 {
            return Err(Error::Config(format!(
                "sample counts must be >= 2 (got N={}, M1={}, M2={})",
                self.n, self.m1, self.m2
            )));
        }
        if self.reuse && !(self.n == self.m1 && self.n == self.m2) {
            return Err(Error::Config(format!(
                "sample reuse requires N = M1 = M2 (got N={}, M1={}, M2={})",
                self.n, self.m1, self.m2
            )));
        }
        if !self.lambda.is_finite() {
            return Err(Error::Config("lambda must be finite".into()));
        }
        if !(0.0..=1.0).contains(&self.max_dropped_frac) {
            return Err(Error::Config("max_dropped_frac must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Per-outer-sample quantities cached by one estimation pass. The
/// marginal likelihood of each outer observation is estimated exactly
/// once and shared by every downstream component.
#[derive(Debug, Clone)]
pub struct OuterTerms {
    /// `log p(y_i | theta_i, xi)`.
    pub log_lik: Vec<f64>,
    /// `log phat(y_i | xi)`.
    pub log_marginal: Vec<f64>,
    /// Signed inner ratio of the second-moment component (before squaring).
    pub m2c_ratio: Vec<f64>,
    /// Rows that survived the degeneracy filter.
    pub valid: Vec<bool>,
    /// Number of dropped (degenerate) rows.
    pub dropped: usize,
}

impl OuterTerms {
    pub fn retained(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Per-sample utility summands `log_lik - log_marginal` over
    /// retained rows, in index order.
    pub fn utility_summands(&self) -> Vec<f64> {
        self.log_lik
            .iter()
            .zip(&self.log_marginal)
            .zip(&self.valid)
            .filter(|(_, &v)| v)
            .map(|((&l, &m), _)| l - m)
            .collect()
    }

    fn mean_over_valid(&self, f: impl Fn(usize) -> f64) -> f64 {
        let mut sum = 0.0;
        let mut count = 0usize;
        for i in 0..self.valid.len() {
            if self.valid[i] {
                sum += f(i);
                count += 1;
            }
        }
        sum / count as f64
    }
}

/// One row of the outer loop: everything derived from `y_i` and the
/// inner sample set(s) under a shared max-shift.
#[derive(Debug, Clone, Copy)]
struct RowStats {
    log_lik: f64,
    log_marginal: f64,
    m2c_ratio: f64,
    degenerate: bool,
}

const DEGENERATE: RowStats = RowStats {
    log_lik: f64::NAN,
    log_marginal: f64::NEG_INFINITY,
    m2c_ratio: f64::NAN,
    degenerate: true,
};

/// Shared-shift reduction for one outer row. `lik_den` are the inner
/// log-likelihoods entering the marginal-likelihood average (size M1),
/// `lik_num` those entering the signed `p log p` average (size M2).
/// The same shift `s = max(all)` keeps exp() in range for both sums and
/// cancels in the ratio.
fn row_from_log_liks(log_lik_outer: f64, lik_den: &[f64], lik_num: &[f64]) -> RowStats {
    let mut s = f64::NEG_INFINITY;
    for &l in lik_den.iter().chain(lik_num) {
        if l.is_nan() {
            return DEGENERATE;
        }
        if l > s {
            s = l;
        }
    }
    if !s.is_finite() || !log_lik_outer.is_finite() {
        return DEGENERATE;
    }
    let mut den_sum = 0.0;
    for &l in lik_den {
        den_sum += (l - s).exp();
    }
    // Signed sum: exp(l - s) * l keeps the relative precision of the
    // max-shifted magnitudes while carrying the sign of log p.
    let mut num_sum = 0.0;
    for &l in lik_num {
        num_sum += (l - s).exp() * l;
    }
    let m1 = lik_den.len() as f64;
    let m2 = lik_num.len() as f64;
    let log_marginal = s + (den_sum.ln() - m1.ln());
    let m2c_ratio = (num_sum / m2) / (den_sum / m1);
    RowStats {
        log_lik: log_lik_outer,
        log_marginal,
        m2c_ratio,
        degenerate: false,
    }
}

/// Same reduction when the denominator and numerator share one inner
/// sample set (the reuse mode): a single pass accumulates both sums.
fn row_from_shared_inner(log_lik_outer: f64, lik: &[f64]) -> RowStats {
    let mut s = f64::NEG_INFINITY;
    for &l in lik {
        if l.is_nan() {
            return DEGENERATE;
        }
        if l > s {
            s = l;
        }
    }
    if !s.is_finite() || !log_lik_outer.is_finite() {
        return DEGENERATE;
    }
    let mut den_sum = 0.0;
    let mut num_sum = 0.0;
    for &l in lik {
        let e = (l - s).exp();
        den_sum += e;
        num_sum += e * l;
    }
    let m = lik.len() as f64;
    RowStats {
        log_lik: log_lik_outer,
        log_marginal: s + (den_sum.ln() - m.ln()),
        m2c_ratio: num_sum / den_sum,
        degenerate: false,
    }
}

/// Log of the Monte Carlo marginal-likelihood estimate
/// `log[(1/M1) sum_j p(y | theta_j, xi)]`, computed by log-sum-exp.
/// Returns `-inf` when every inner likelihood underflows to zero; the
/// caller decides whether that row is dropped.
pub fn estimate_marginal_log_likelihood(
    y: &Observation,
    inner_params: &[ParameterSample],
    problem: &ProblemDefinition,
    xi: &DesignPoint,
) -> Result<f64> {
    if inner_params.is_empty() {
        return Err(Error::Config("inner sample set must be non-empty".into()));
    }
    let mut log_liks = Vec::with_capacity(inner_params.len());
    for theta in inner_params {
        let g = forward_eval(problem, theta, xi)?;
        log_liks.push(problem.noise().log_density(y.values(), &g));
    }
    let s = log_liks.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !s.is_finite() {
        return Ok(f64::NEG_INFINITY);
    }
    let sum: f64 = log_liks.iter().map(|&l| (l - s).exp()).sum();
    Ok(s + (sum.ln() - (inner_params.len() as f64).ln()))
}

/// Evaluates forward means for every bank parameter sample: the `N`
/// forward solves of a reuse-mode design evaluation.
fn forward_all(
    problem: &ProblemDefinition,
    bank_params: &[ParameterSample],
    xi: &DesignPoint,
) -> Result<Vec<Vec<f64>>> {
    bank_params
        .iter()
        .map(|theta| forward_eval(problem, theta, xi))
        .collect()
}

/// One estimation pass over the outer samples; the single place where
/// the marginal likelihood of each outer observation is estimated.
pub fn compute_outer_terms(
    problem: &ProblemDefinition,
    xi: &DesignPoint,
    bank: &SampleBank,
    config: &EstimatorConfig,
) -> Result<OuterTerms> {
    config.validate()?;
    if bank.size() < config.n {
        return Err(Error::Config(format!(
            "bank holds {} samples but N={} requested",
            bank.size(),
            config.n
        )));
    }
    if !problem.domain().contains(xi) {
        return Err(Error::Config(format!(
            "design {:?} outside the design domain",
            xi.coords()
        )));
    }

    let n = config.n;
    let g_outer = forward_all(problem, &bank.prior_samples()[..n], xi)?;
    let sd = problem.noise().std_devs();
    let observations: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            g_outer[i]
                .iter()
                .zip(&bank.noise_draws()[i])
                .zip(sd)
                .map(|((&m, &z), &s)| m + s * z)
                .collect()
        })
        .collect();

    let rows: Vec<Result<RowStats>> = if config.reuse {
        let row = |i: usize| -> Result<RowStats> {
            let y = &observations[i];
            let noise = problem.noise();
            let lik: Vec<f64> = g_outer.iter().map(|g| noise.log_density(y, g)).collect();
            Ok(row_from_shared_inner(lik[i], &lik))
        };
        if config.parallel {
            (0..n).into_par_iter().map(row).collect()
        } else {
            (0..n).map(row).collect()
        }
    } else {
        let bank_seed = bank.master_seed();
        let row = |i: usize| -> Result<RowStats> {
            let y = &observations[i];
            let noise = problem.noise();
            let log_lik_outer = noise.log_density(y, &g_outer[i]);

            let mut rng = substream(bank_seed, StreamKind::InnerMarginal, i as u64);
            let mut lik_den = Vec::with_capacity(config.m1);
            for _ in 0..config.m1 {
                let theta = problem.prior().sample(&mut rng)?;
                let g = forward_eval(problem, &theta, xi)?;
                lik_den.push(noise.log_density(y, &g));
            }

            let mut rng = substream(bank_seed, StreamKind::InnerSecondMoment, i as u64);
            let mut lik_num = Vec::with_capacity(config.m2);
            for _ in 0..config.m2 {
                let theta = problem.prior().sample(&mut rng)?;
                let g = forward_eval(problem, &theta, xi)?;
                lik_num.push(noise.log_density(y, &g));
            }
            Ok(row_from_log_liks(log_lik_outer, &lik_den, &lik_num))
        };
        if config.parallel {
            (0..n).into_par_iter().map(row).collect()
        } else {
            (0..n).map(row).collect()
        }
    };

    let mut terms = OuterTerms {
        log_lik: Vec::with_capacity(n),
        log_marginal: Vec::with_capacity(n),
        m2c_ratio: Vec::with_capacity(n),
        valid: Vec::with_capacity(n),
        dropped: 0,
    };
    for row in rows {
        let r = row?;
        terms.log_lik.push(r.log_lik);
        terms.log_marginal.push(r.log_marginal);
        terms.m2c_ratio.push(r.m2c_ratio);
        terms.valid.push(!r.degenerate);
        if r.degenerate {
            terms.dropped += 1;
        }
    }

    let limit = (config.max_dropped_frac * n as f64).floor() as usize;
    if terms.dropped > limit {
        return Err(Error::TooManyDegenerate {
            dropped: terms.dropped,
            total: n,
            limit,
        });
    }
    Ok(terms)
}

/// Expected-utility estimate with its per-sample summands (used by the
/// second-moment components and by diagnostics).
#[derive(Debug, Clone)]
pub struct UtilityEstimate {
    pub u_hat: f64,
    pub terms: OuterTerms,
}

impl UtilityEstimate {
    /// Monte Carlo standard error of `u_hat` from the summand spread.
    pub fn standard_error(&self) -> f64 {
        let summands = self.terms.utility_summands();
        let n = summands.len() as f64;
        let mean = summands.iter().sum::<f64>() / n;
        let var = summands.iter().map(|u| (u - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    }
}

/// Nested Monte Carlo expected-utility estimate
/// `(1/N) sum_i [log p(y_i|theta_i) - log phat(y_i)]`.
pub fn estimate_expected_utility(
    problem: &ProblemDefinition,
    xi: &DesignPoint,
    bank: &SampleBank,
    config: &EstimatorConfig,
) -> Result<UtilityEstimate> {
    let terms = compute_outer_terms(problem, xi, bank, config)?;
    let u_hat = terms.mean_over_valid(|i| terms.log_lik[i] - terms.log_marginal[i]);
    Ok(UtilityEstimate { u_hat, terms })
}

/// Mean of squared marginal log-likelihood estimates.
pub fn estimate_m2a(terms: &OuterTerms) -> f64 {
    terms.mean_over_valid(|i| terms.log_marginal[i] * terms.log_marginal[i])
}

/// `-(2/N) sum_i log p(y_i|theta_i) log phat(y_i)`; the pairing over the
/// joint draw `(theta_i, y_i)` realizes the posterior weighting without
/// posterior samples.
pub fn estimate_m2b(terms: &OuterTerms) -> f64 {
    -2.0 * terms.mean_over_valid(|i| terms.log_lik[i] * terms.log_marginal[i])
}

/// Mean of the squared signed inner ratio.
pub fn estimate_m2c(terms: &OuterTerms) -> f64 {
    terms.mean_over_valid(|i| terms.m2c_ratio[i] * terms.m2c_ratio[i])
}

/// Utility-variance estimate and its decomposition.
#[derive(Debug, Clone)]
pub struct VarianceEstimate {
    pub u_hat: f64,
    pub m2a: f64,
    pub m2b: f64,
    pub m2c: f64,
    pub m2_hat: f64,
    pub v_hat: f64,
    pub terms: OuterTerms,
}

/// `Vhat = M2hat - Uhat^2`. May legitimately be negative at small
/// sample sizes; the raw value is reported, never clamped.
pub fn estimate_variance(
    problem: &ProblemDefinition,
    xi: &DesignPoint,
    bank: &SampleBank,
    config: &EstimatorConfig,
) -> Result<VarianceEstimate> {
    let UtilityEstimate { u_hat, terms } =
        estimate_expected_utility(problem, xi, bank, config)?;
    let m2a = estimate_m2a(&terms);
    let m2b = estimate_m2b(&terms);
    let m2c = estimate_m2c(&terms);
    let m2_hat = m2a + m2b + m2c;
    let v_hat = m2_hat - u_hat * u_hat;
    Ok(VarianceEstimate {
        u_hat,
        m2a,
        m2b,
        m2c,
        m2_hat,
        v_hat,
        terms,
    })
}

/// Full decomposition of one objective evaluation at one design.
#[derive(Debug, Clone)]
pub struct EstimateReport {
    pub design: DesignPoint,
    pub u_hat: f64,
    pub m2a: f64,
    pub m2b: f64,
    pub m2c: f64,
    pub m2_hat: f64,
    pub v_hat: f64,
    pub j_hat: f64,
    pub n: usize,
    pub m1: usize,
    pub m2: usize,
    pub lambda: f64,
    /// Bank seed actually used (the CRS seed when set).
    pub seed: u64,
    pub dropped: usize,
}

impl EstimateReport {
    /// CSV header matching [`EstimateReport::csv_row`]; design
    /// coordinates expand to `xi0..xi{d-1}`.
    pub fn csv_header(design_dim: usize) -> String {
        let mut cols: Vec<String> = (0..design_dim).map(|k| format!("xi{k}")).collect();
        cols.extend(
            [
                "u_hat", "m2a", "m2b", "m2c", "m2_hat", "v_hat", "j_hat", "n", "m1", "m2",
                "lambda", "seed", "dropped",
            ]
            .map(String::from),
        );
        cols.join(",")
    }

    pub fn csv_row(&self) -> String {
        let mut cols: Vec<String> = self.design.coords().iter().map(|c| c.to_string()).collect();
        cols.extend([
            self.u_hat.to_string(),
            self.m2a.to_string(),
            self.m2b.to_string(),
            self.m2c.to_string(),
            self.m2_hat.to_string(),
            self.v_hat.to_string(),
            self.j_hat.to_string(),
            self.n.to_string(),
            self.m1.to_string(),
            self.m2.to_string(),
            self.lambda.to_string(),
            self.seed.to_string(),
            self.dropped.to_string(),
        ]);
        cols.join(",")
    }
}

/// Evaluates the variance-penalized objective at one design.
///
/// The bank is rebuilt from `config.crs_seed` when set (common random
/// sampling: identical prior and noise streams for every design);
/// otherwise from `fallback_seed`, which orchestrators derive freshly
/// per evaluation.
pub fn estimate_objective(
    problem: &ProblemDefinition,
    xi: &DesignPoint,
    config: &EstimatorConfig,
    fallback_seed: u64,
) -> Result<EstimateReport> {
    let seed = config.crs_seed.unwrap_or(fallback_seed);
    let bank = build_sample_bank(problem, config.n, seed)?;
    let est = estimate_variance(problem, xi, &bank, config)?;
    let j_hat = est.u_hat - config.lambda * est.v_hat;
    Ok(EstimateReport {
        design: xi.clone(),
        u_hat: est.u_hat,
        m2a: est.m2a,
        m2b: est.m2b,
        m2c: est.m2c,
        m2_hat: est.m2_hat,
        v_hat: est.v_hat,
        j_hat,
        n: config.n,
        m1: config.m1,
        m2: config.m2,
        lambda: config.lambda,
        seed,
        dropped: est.terms.dropped,
    })
}

/// Grid-discretization oracle for the realized information gain: forms
/// the normalized posterior on a uniform parameter grid and returns the
/// Riemann-sum KL divergence to the (identically discretized) prior.
/// Supports parameter dimension 1 or 2 with bounded (or effectively
/// truncated) prior support.
pub fn exact_utility_grid(
    problem: &ProblemDefinition,
    xi: &DesignPoint,
    y: &Observation,
    grid_size: usize,
) -> Result<f64> {
    let p = problem.param_dim();
    if p > 2 {
        return Err(Error::Config(
            "grid utility oracle supports parameter dimension <= 2".into(),
        ));
    }
    if grid_size < 2 {
        return Err(Error::Config("grid size must be at least 2".into()));
    }
    let bounds = problem.prior().grid_bounds();

    // Midpoint-rule nodes per axis.
    let axis_nodes: Vec<Vec<f64>> = bounds
        .iter()
        .map(|&(lo, hi)| {
            let h = (hi - lo) / grid_size as f64;
            (0..grid_size).map(|k| lo + (k as f64 + 0.5) * h).collect()
        })
        .collect();

    let mut log_post = Vec::new();
    let mut log_prior = Vec::new();
    let mut push = |problem: &ProblemDefinition, theta: ParameterSample| -> Result<()> {
        let lp = problem.prior().log_density(&theta);
        if lp.is_finite() {
            let g = forward_eval(problem, &theta, xi)?;
            log_post.push(problem.noise().log_density(y.values(), &g) + lp);
            log_prior.push(lp);
        } else {
            log_post.push(f64::NEG_INFINITY);
            log_prior.push(f64::NEG_INFINITY);
        }
        Ok(())
    };
    match p {
        1 => {
            for &t in &axis_nodes[0] {
                push(problem, ParameterSample(vec![t]))?;
            }
        }
        _ => {
            for &tx in &axis_nodes[0] {
                for &ty in &axis_nodes[1] {
                    push(problem, ParameterSample(vec![tx, ty]))?;
                }
            }
        }
    }

    let lse = |v: &[f64]| -> f64 {
        let s = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !s.is_finite() {
            return f64::NEG_INFINITY;
        }
        s + v.iter().map(|&l| (l - s).exp()).sum::<f64>().ln()
    };
    let lse_post = lse(&log_post);
    if !lse_post.is_finite() {
        return Err(Error::Estimation(
            "grid posterior underflowed everywhere".into(),
        ));
    }
    let lse_prior = lse(&log_prior);

    let mut kl = 0.0;
    for (lpost, lprior) in log_post.iter().zip(&log_prior) {
        let lq = lpost - lse_post;
        let q = lq.exp();
        if q > 0.0 {
            kl += q * (lq - (lprior - lse_prior));
        }
    }
    Ok(kl)
}
