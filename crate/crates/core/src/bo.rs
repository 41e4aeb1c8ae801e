//! Bayesian optimization of the variance-penalized objective: a
//! Gaussian-process surrogate over designs, an acquisition rule, and the
//! outer loop that proposes, evaluates, and tracks the best design.
//!
//! Inputs are normalized to the unit box and targets standardized before
//! fitting; hyperparameters come from a fixed multi-start grid search on
//! the log marginal likelihood followed by deterministic coordinate
//! refinement. The whole loop is a pure function of its seeds.

use rand::Rng;

use crate::error::{Error, Result};
use crate::estimators::{estimate_objective, EstimateReport, EstimatorConfig};
use crate::model::{DesignDomain, DesignPoint, ProblemDefinition};
use crate::rng::{derive_seed, substream, StreamKind};

/// Squared-exponential kernel hyperparameters on the normalized scale.
#[derive(Debug, Clone)]
pub struct GpHyperParams {
    /// Per-dimension length scales.
    pub length_scales: Vec<f64>,
    /// Signal variance.
    pub signal_var: f64,
    /// Observation noise variance.
    pub noise_var: f64,
}

/// Hyperparameter search controls.
#[derive(Debug, Clone)]
pub struct GpFitConfig {
    /// Log-spaced length-scale grid over the normalized domain.
    pub ell_lo: f64,
    pub ell_hi: f64,
    pub ell_count: usize,
    /// Signal-variance grid, in units of the (standardized) target variance.
    pub sf2_grid: Vec<f64>,
    /// Noise-variance grid, same units.
    pub sn2_grid: Vec<f64>,
    /// Coordinate-refinement rounds after the grid pass.
    pub refine_rounds: usize,
}

impl Default for GpFitConfig {
    fn default() -> Self {
        Self {
            ell_lo: 0.05,
            ell_hi: 2.0,
            ell_count: 7,
            sf2_grid: vec![0.1, 1.0, 10.0],
            sn2_grid: vec![1e-4, 1e-2, 1e-1],
            refine_rounds: 20,
        }
    }
}

/// Gaussian-process posterior state over the design domain.
#[derive(Debug, Clone)]
pub struct GpSurrogate {
    domain: DesignDomain,
    /// Training inputs, normalized to the unit box.
    x: Vec<Vec<f64>>,
    /// Standardized targets.
    y_std: Vec<f64>,
    y_mean: f64,
    y_sd: f64,
    hyper: GpHyperParams,
    /// Lower Cholesky factor of `K + noise_var I (+ jitter)`, row-major.
    chol: Vec<f64>,
    /// `(K + noise_var I)^{-1} y_std`.
    alpha: Vec<f64>,
}

fn kernel(hyper: &GpHyperParams, a: &[f64], b: &[f64]) -> f64 {
    let mut q = 0.0;
    for d in 0..a.len() {
        let r = (a[d] - b[d]) / hyper.length_scales[d];
        q += r * r;
    }
    hyper.signal_var * (-0.5 * q).exp()
}

/// In-place Cholesky of a row-major symmetric matrix; returns the lower
/// factor or `None` when a pivot is non-positive.
fn cholesky(mut m: Vec<f64>, n: usize) -> Option<Vec<f64>> {
    for k in 0..n {
        let mut pivot = m[k * n + k];
        for t in 0..k {
            pivot -= m[k * n + t] * m[k * n + t];
        }
        if pivot <= 0.0 || !pivot.is_finite() {
            return None;
        }
        let pivot = pivot.sqrt();
        m[k * n + k] = pivot;
        for i in k + 1..n {
            let mut v = m[i * n + k];
            for t in 0..k {
                v -= m[i * n + t] * m[k * n + t];
            }
            m[i * n + k] = v / pivot;
        }
        for t in k + 1..n {
            m[k * n + t] = 0.0;
        }
    }
    Some(m)
}

fn solve_lower(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut x = b.to_vec();
    for i in 0..n {
        for t in 0..i {
            x[i] -= l[i * n + t] * x[t];
        }
        x[i] /= l[i * n + i];
    }
    x
}

fn solve_upper_t(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    // solves L^T x = b
    let mut x = b.to_vec();
    for i in (0..n).rev() {
        for t in i + 1..n {
            x[i] -= l[t * n + i] * x[t];
        }
        x[i] /= l[i * n + i];
    }
    x
}

/// Factorizes the kernel matrix with jitter escalation and returns
/// `(chol, alpha, log_marginal_likelihood)`.
fn factorize(
    x: &[Vec<f64>],
    y: &[f64],
    hyper: &GpHyperParams,
) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let n = x.len();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = kernel(hyper, &x[i], &x[j]);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    for jitter in [0.0, 1e-10, 1e-8, 1e-6] {
        let mut kj = k.clone();
        for i in 0..n {
            kj[i * n + i] += hyper.noise_var + jitter;
        }
        if let Some(chol) = cholesky(kj, n) {
            let alpha = solve_upper_t(&chol, n, &solve_lower(&chol, n, y));
            let mut lml = -0.5 * y.iter().zip(&alpha).map(|(a, b)| a * b).sum::<f64>();
            for i in 0..n {
                lml -= chol[i * n + i].ln();
            }
            lml -= 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
            return Ok((chol, alpha, lml));
        }
    }
    Err(Error::Numerical(
        "kernel matrix not positive definite after jitter escalation to 1e-6".into(),
    ))
}

impl GpSurrogate {
    /// Fits hyperparameters by maximizing the log marginal likelihood
    /// over the fixed grid, then refining each coordinate. Deterministic
    /// given the training pairs and config.
    pub fn fit(
        pairs: &[(DesignPoint, f64)],
        domain: &DesignDomain,
        config: &GpFitConfig,
    ) -> Result<Self> {
        if pairs.len() < 2 {
            return Err(Error::Config("GP fit needs at least 2 training pairs".into()));
        }
        let (x, y_std, y_mean, y_sd) = Self::prepare(pairs, domain)?;
        let dim = domain.dim();

        let mut ells = Vec::with_capacity(config.ell_count);
        for k in 0..config.ell_count {
            let f = k as f64 / (config.ell_count - 1).max(1) as f64;
            ells.push(config.ell_lo * (config.ell_hi / config.ell_lo).powf(f));
        }

        let mut best: Option<(f64, GpHyperParams)> = None;
        for &ell in &ells {
            for &sf2 in &config.sf2_grid {
                for &sn2 in &config.sn2_grid {
                    let hyper = GpHyperParams {
                        length_scales: vec![ell; dim],
                        signal_var: sf2,
                        noise_var: sn2,
                    };
                    if let Ok((_, _, lml)) = factorize(&x, &y_std, &hyper) {
                        if best.as_ref().map_or(true, |(b, _)| lml > *b) {
                            best = Some((lml, hyper));
                        }
                    }
                }
            }
        }
        let (mut best_lml, mut hyper) =
            best.ok_or_else(|| Error::Numerical("no admissible GP hyperparameters".into()))?;

        // Coordinate refinement in log space: per-dimension length
        // scales first, then the two variances.
        for _ in 0..config.refine_rounds {
            let mut improved = false;
            for coord in 0..dim + 2 {
                for &factor in &[0.8, 1.25] {
                    let mut cand = hyper.clone();
                    match coord {
                        c if c < dim => cand.length_scales[c] *= factor,
                        c if c == dim => cand.signal_var *= factor,
                        _ => cand.noise_var *= factor,
                    }
                    if cand.length_scales.iter().any(|&l| !(1e-4..=1e3).contains(&l))
                        || !(1e-8..=1e6).contains(&cand.signal_var)
                        || !(1e-10..=1e3).contains(&cand.noise_var)
                    {
                        continue;
                    }
                    if let Ok((_, _, lml)) = factorize(&x, &y_std, &cand) {
                        if lml > best_lml {
                            best_lml = lml;
                            hyper = cand;
                            improved = true;
                        }
                    }
                }
            }
            if !improved {
                break;
            }
        }

        let (chol, alpha, _) = factorize(&x, &y_std, &hyper)?;
        Ok(Self {
            domain: domain.clone(),
            x,
            y_std,
            y_mean,
            y_sd,
            hyper,
            chol,
            alpha,
        })
    }

    /// Builds a surrogate with explicitly chosen hyperparameters
    /// (no search). Useful for tests and diagnostics.
    pub fn with_hyperparameters(
        pairs: &[(DesignPoint, f64)],
        domain: &DesignDomain,
        hyper: GpHyperParams,
    ) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::Config("GP needs at least 1 training pair".into()));
        }
        if hyper.length_scales.len() != domain.dim() {
            return Err(Error::Config("length-scale count must match the domain".into()));
        }
        let (x, y_std, y_mean, y_sd) = Self::prepare(pairs, domain)?;
        let (chol, alpha, _) = factorize(&x, &y_std, &hyper)?;
        Ok(Self {
            domain: domain.clone(),
            x,
            y_std,
            y_mean,
            y_sd,
            hyper,
            chol,
            alpha,
        })
    }

    fn prepare(
        pairs: &[(DesignPoint, f64)],
        domain: &DesignDomain,
    ) -> Result<(Vec<Vec<f64>>, Vec<f64>, f64, f64)> {
        for (xi, v) in pairs {
            if !domain.contains(xi) {
                return Err(Error::Config(format!(
                    "training input {:?} outside the design domain",
                    xi.coords()
                )));
            }
            if !v.is_finite() {
                return Err(Error::Config("training target must be finite".into()));
            }
        }
        let x: Vec<Vec<f64>> = pairs
            .iter()
            .map(|(xi, _)| normalize(xi.coords(), domain))
            .collect();
        let raw: Vec<f64> = pairs.iter().map(|(_, v)| *v).collect();
        let m = raw.len() as f64;
        let y_mean = raw.iter().sum::<f64>() / m;
        let var = raw.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / m;
        // Degenerate targets (all equal) standardize to zeros; the fit
        // then predicts the constant everywhere.
        let y_sd = if var > 0.0 { var.sqrt() } else { 1.0 };
        let y_std = raw.iter().map(|v| (v - y_mean) / y_sd).collect();
        Ok((x, y_std, y_mean, y_sd))
    }

    pub fn hyperparameters(&self) -> &GpHyperParams {
        &self.hyper
    }

    pub fn training_len(&self) -> usize {
        self.x.len()
    }

    /// Standardized training targets, in insertion order.
    pub fn training_targets(&self) -> &[f64] {
        &self.y_std
    }

    /// Posterior mean and (latent) variance at `xi`, on the original
    /// target scale. The variance is clamped at zero against roundoff.
    pub fn predict(&self, xi: &DesignPoint) -> (f64, f64) {
        let n = self.x.len();
        let q = normalize(xi.coords(), &self.domain);
        let kstar: Vec<f64> = self.x.iter().map(|t| kernel(&self.hyper, &q, t)).collect();
        let mean_std: f64 = kstar.iter().zip(&self.alpha).map(|(a, b)| a * b).sum();
        let v = solve_lower(&self.chol, n, &kstar);
        let mut var_std = self.hyper.signal_var - v.iter().map(|t| t * t).sum::<f64>();
        debug_assert!(var_std > -1e-10, "predictive variance {var_std} below floor");
        if var_std < 0.0 {
            var_std = 0.0;
        }
        (
            self.y_mean + self.y_sd * mean_std,
            self.y_sd * self.y_sd * var_std,
        )
    }
}

fn normalize(x: &[f64], domain: &DesignDomain) -> Vec<f64> {
    x.iter()
        .zip(domain.bounds())
        .map(|(&v, &(a, b))| (v - a) / (b - a))
        .collect()
}

/// Acquisition rules.
#[derive(Debug, Clone, Copy)]
pub enum Acquisition {
    /// `mean + kappa * stdev`.
    Ucb { kappa: f64 },
    /// Expected improvement over the given incumbent value.
    ExpectedImprovement { best: f64 },
}

/// Upper confidence bound `mean(xi) + kappa * stdev(xi)`.
pub fn acquisition_ucb(surrogate: &GpSurrogate, xi: &DesignPoint, kappa: f64) -> f64 {
    let (mean, var) = surrogate.predict(xi);
    mean + kappa * var.sqrt()
}

fn normal_cdf(z: f64) -> f64 {
    // Abramowitz & Stegun 7.1.26 via erf; |error| < 1.5e-7, plenty for
    // ranking acquisition candidates.
    let x = z / std::f64::consts::SQRT_2;
    let t = 1.0 / (1.0 + 0.327_591_1 * x.abs());
    let poly = t
        * (0.254_829_592
            + t * (-0.284_496_736 + t * (1.421_413_741 + t * (-1.453_152_027 + t * 1.061_405_429))));
    let erf = 1.0 - poly * (-x * x).exp();
    let erf = if x >= 0.0 { erf } else { -erf };
    0.5 * (1.0 + erf)
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn acquisition_value(surrogate: &GpSurrogate, xi: &DesignPoint, rule: Acquisition) -> f64 {
    match rule {
        Acquisition::Ucb { kappa } => acquisition_ucb(surrogate, xi, kappa),
        Acquisition::ExpectedImprovement { best } => {
            let (mean, var) = surrogate.predict(xi);
            let sd = var.sqrt();
            if sd <= 0.0 {
                return (mean - best).max(0.0);
            }
            let z = (mean - best) / sd;
            (mean - best) * normal_cdf(z) + sd * normal_pdf(z)
        }
    }
}

const CANDIDATE_COUNT: usize = 1024;
const ASCENT_STARTS: usize = 8;

/// Maximizes the acquisition over the feasible domain: 1024 seeded
/// uniform candidates, then local coordinate ascent from the best 8.
/// Ties break toward the lowest candidate index. Errors when every
/// candidate is infeasible.
pub fn propose_next(
    surrogate: &GpSurrogate,
    domain: &DesignDomain,
    constraint: Option<&dyn Fn(&DesignPoint) -> bool>,
    rule: Acquisition,
    seed: u64,
) -> Result<DesignPoint> {
    let mut rng = substream(seed, StreamKind::BoCandidates, 0);
    let feasible = |xi: &DesignPoint| constraint.map_or(true, |c| c(xi));

    let mut scored: Vec<(usize, DesignPoint, f64)> = Vec::new();
    for idx in 0..CANDIDATE_COUNT {
        let coords: Vec<f64> = domain
            .bounds()
            .iter()
            .map(|&(a, b)| rng.gen_range(a..b))
            .collect();
        let xi = DesignPoint(coords);
        if feasible(&xi) {
            let v = acquisition_value(surrogate, &xi, rule);
            scored.push((idx, xi, v));
        }
    }
    if scored.is_empty() {
        return Err(Error::Estimation(
            "all acquisition candidates were infeasible".into(),
        ));
    }
    // Highest score first; ties by lowest candidate index.
    scored.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap().then(a.0.cmp(&b.0)));
    scored.truncate(ASCENT_STARTS);

    let widths: Vec<f64> = domain.bounds().iter().map(|&(a, b)| b - a).collect();
    let mut best: Option<(usize, DesignPoint, f64)> = None;
    for (idx, start, score) in scored {
        let (xi, v) = coordinate_ascent(surrogate, domain, &feasible, rule, start, score, &widths);
        let better = match &best {
            None => true,
            Some((bi, _, bv)) => v > *bv || (v == *bv && idx < *bi),
        };
        if better {
            best = Some((idx, xi, v));
        }
    }
    Ok(best.unwrap().1)
}

fn coordinate_ascent(
    surrogate: &GpSurrogate,
    domain: &DesignDomain,
    feasible: &impl Fn(&DesignPoint) -> bool,
    rule: Acquisition,
    start: DesignPoint,
    start_score: f64,
    widths: &[f64],
) -> (DesignPoint, f64) {
    let mut x = start;
    let mut score = start_score;
    let mut scale = 0.1;
    for _ in 0..60 {
        let mut improved = false;
        for d in 0..x.dim() {
            for sign in [1.0, -1.0] {
                let mut cand = x.clone();
                cand.0[d] += sign * scale * widths[d];
                domain.clamp(&mut cand.0);
                if cand == x || !feasible(&cand) {
                    continue;
                }
                let v = acquisition_value(surrogate, &cand, rule);
                if v > score {
                    x = cand;
                    score = v;
                    improved = true;
                }
            }
        }
        if !improved {
            scale *= 0.5;
            if scale < 1e-4 {
                break;
            }
        }
    }
    (x, score)
}

/// Outer-loop knobs.
#[derive(Debug, Clone)]
pub struct BoConfig {
    pub estimator: EstimatorConfig,
    /// Initial space-filling design count (>= 2).
    pub n_init: usize,
    /// Optimization budget after initialization (>= 1).
    pub budget: usize,
    pub kappa: f64,
    pub use_expected_improvement: bool,
    pub gp: GpFitConfig,
    pub master_seed: u64,
}

impl BoConfig {
    pub fn new(estimator: EstimatorConfig, n_init: usize, budget: usize, master_seed: u64) -> Self {
        Self {
            estimator,
            n_init,
            budget,
            kappa: 2.0,
            use_expected_improvement: false,
            gp: GpFitConfig::default(),
            master_seed,
        }
    }
}

/// One trace row per completed objective evaluation.
#[derive(Debug, Clone)]
pub struct TraceEntry {
    pub iteration: usize,
    pub design: DesignPoint,
    pub j_hat: f64,
    pub u_hat: f64,
    pub v_hat: f64,
    pub best_so_far: f64,
}

/// Final state of one optimization run.
#[derive(Debug, Clone)]
pub struct BoState {
    pub evaluated: Vec<(DesignPoint, f64)>,
    pub best_design: DesignPoint,
    pub best_value: f64,
    /// Designs whose estimation failed and were skipped.
    pub skipped: usize,
    pub trace: Vec<TraceEntry>,
}

/// Runs the full loop: evaluate `n_init` seeded uniform designs, then
/// `budget` rounds of fit / acquire / evaluate; returns the best
/// evaluated design and the complete trace. With CRS enabled in the
/// estimator config, every design evaluation reuses the identical
/// sample bank.
pub fn run_bo(problem: &ProblemDefinition, config: &BoConfig) -> Result<BoState> {
    if config.n_init < 2 {
        return Err(Error::Config("BO needs at least 2 initial designs".into()));
    }
    if config.budget < 1 {
        return Err(Error::Config("BO budget must be at least 1".into()));
    }
    config.estimator.validate()?;

    let domain = problem.domain().clone();
    let mut state = BoState {
        evaluated: Vec::new(),
        best_design: DesignPoint(vec![f64::NAN; domain.dim()]),
        best_value: f64::NEG_INFINITY,
        skipped: 0,
        trace: Vec::new(),
    };
    let mut eval_index = 0u64;

    let record = |state: &mut BoState, xi: DesignPoint, report: Result<EstimateReport>| {
        match report {
            Ok(r) => {
                if r.j_hat > state.best_value {
                    state.best_value = r.j_hat;
                    state.best_design = xi.clone();
                }
                state.evaluated.push((xi.clone(), r.j_hat));
                state.trace.push(TraceEntry {
                    iteration: state.trace.len() + 1,
                    design: xi,
                    j_hat: r.j_hat,
                    u_hat: r.u_hat,
                    v_hat: r.v_hat,
                    best_so_far: state.best_value,
                });
            }
            Err(_) => state.skipped += 1,
        }
    };

    // Initialization: seeded uniform draws, rejected against the constraint.
    let mut init_rng = substream(config.master_seed, StreamKind::BoInit, 0);
    let mut drawn = 0usize;
    let mut attempts = 0usize;
    while drawn < config.n_init {
        attempts += 1;
        if attempts > 10_000 * config.n_init {
            return Err(Error::Config(
                "could not draw feasible initial designs".into(),
            ));
        }
        let coords: Vec<f64> = domain
            .bounds()
            .iter()
            .map(|&(a, b)| init_rng.gen_range(a..b))
            .collect();
        let xi = DesignPoint(coords);
        if !problem.design_feasible(&xi) {
            continue;
        }
        drawn += 1;
        let seed = derive_seed(config.master_seed, StreamKind::Evaluation, eval_index);
        eval_index += 1;
        let report = estimate_objective(problem, &xi, &config.estimator, seed);
        record(&mut state, xi, report);
    }

    let constraint = |xi: &DesignPoint| problem.design_feasible(xi);
    for t in 0..config.budget {
        let xi = if state.evaluated.len() >= 2 {
            let surrogate = GpSurrogate::fit(&state.evaluated, &domain, &config.gp)?;
            let rule = if config.use_expected_improvement {
                Acquisition::ExpectedImprovement {
                    best: state.best_value,
                }
            } else {
                Acquisition::Ucb {
                    kappa: config.kappa,
                }
            };
            let seed = derive_seed(config.master_seed, StreamKind::BoCandidates, t as u64 + 1);
            propose_next(&surrogate, &domain, Some(&constraint), rule, seed)?
        } else {
            // not enough surviving evaluations to fit: fall back to a
            // fresh uniform feasible draw
            let mut rng = substream(config.master_seed, StreamKind::BoCandidates, t as u64 + 1);
            loop {
                let coords: Vec<f64> = domain
                    .bounds()
                    .iter()
                    .map(|&(a, b)| rng.gen_range(a..b))
                    .collect();
                let xi = DesignPoint(coords);
                if problem.design_feasible(&xi) {
                    break xi;
                }
            }
        };
        let seed = derive_seed(config.master_seed, StreamKind::Evaluation, eval_index);
        eval_index += 1;
        let report = estimate_objective(problem, &xi, &config.estimator, seed);
        record(&mut state, xi, report);
    }

    if state.evaluated.is_empty() {
        return Err(Error::Estimation("every BO evaluation failed".into()));
    }
    Ok(state)
}
