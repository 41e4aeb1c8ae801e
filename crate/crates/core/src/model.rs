//! Problem abstraction: prior, forward model, Gaussian noise, design
//! domain, and the seeded sample infrastructure shared by all estimators.
//!
//! Everything here is immutable after construction and safe to share
//! across threads. The only interior mutability is a relaxed atomic
//! counter of forward-model evaluations, used by tests to verify the
//! O(N) cost contract of the sample-reuse estimator.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::pde::SurrogateTable;
use crate::rng::{substream, StreamKind};

/// Cap on rejection-sampling attempts per draw for obstacle-masked priors.
pub const REJECTION_ATTEMPT_CAP: usize = 10_000;

/// A point in the design domain, `d` real coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignPoint(pub Vec<f64>);

impl DesignPoint {
    pub fn dim(&self) -> usize {
        self.0.len()
    }
    pub fn coords(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for DesignPoint {
    fn from(v: Vec<f64>) -> Self {
        DesignPoint(v)
    }
}

/// A draw of the unknown model parameters, `p` real values.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSample(pub Vec<f64>);

impl ParameterSample {
    pub fn dim(&self) -> usize {
        self.0.len()
    }
    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// An observation vector, `n` real values in model units.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation(pub Vec<f64>);

impl Observation {
    pub fn dim(&self) -> usize {
        self.0.len()
    }
    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Additive Gaussian noise with diagonal covariance.
#[derive(Debug, Clone)]
pub struct GaussianNoiseModel {
    variances: Vec<f64>,
    std_devs: Vec<f64>,
    /// -(n/2) log(2 pi) - (1/2) log|Gamma|, cached.
    log_norm: f64,
}

impl GaussianNoiseModel {
    /// Diagonal covariance; every entry must be strictly positive.
    pub fn diagonal(variances: Vec<f64>) -> Result<Self> {
        if variances.is_empty() {
            return Err(Error::Config("noise covariance must be non-empty".into()));
        }
        if variances.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::Config(
                "noise covariance entries must be strictly positive and finite".into(),
            ));
        }
        let n = variances.len();
        let log_det: f64 = variances.iter().map(|v| v.ln()).sum();
        let log_norm = -0.5 * (n as f64) * (2.0 * std::f64::consts::PI).ln() - 0.5 * log_det;
        let std_devs = variances.iter().map(|v| v.sqrt()).collect();
        Ok(Self {
            variances,
            std_devs,
            log_norm,
        })
    }

    /// Scalar variance replicated across `n` i.i.d. sensor channels.
    pub fn iid(variance: f64, n: usize) -> Result<Self> {
        Self::diagonal(vec![variance; n])
    }

    pub fn dim(&self) -> usize {
        self.variances.len()
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn std_devs(&self) -> &[f64] {
        &self.std_devs
    }

    /// Log density of `y` under `N(mean, Gamma)`, including the full
    /// normalizing constant.
    pub fn log_density(&self, y: &[f64], mean: &[f64]) -> f64 {
        debug_assert_eq!(y.len(), self.variances.len());
        debug_assert_eq!(mean.len(), self.variances.len());
        let mut quad = 0.0;
        for k in 0..y.len() {
            let r = y[k] - mean[k];
            quad += r * r / self.variances[k];
        }
        self.log_norm - 0.5 * quad
    }
}

/// An axis-aligned rectangle inside the unit square, used both as a
/// building obstacle (excluded from the prior support and from sensor
/// placement) and for rasterized no-flux regions in the PDE solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Rect {
    pub fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Result<Self> {
        let r = Rect {
            xmin,
            xmax,
            ymin,
            ymax,
        };
        if !(xmin < xmax && ymin < ymax) {
            return Err(Error::Config(format!("degenerate rectangle {r:?}")));
        }
        if xmin < 0.0 || xmax > 1.0 || ymin < 0.0 || ymax > 1.0 {
            return Err(Error::Config(format!(
                "rectangle {r:?} not inside the unit square"
            )));
        }
        Ok(r)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.xmin && x <= self.xmax && y >= self.ymin && y <= self.ymax
    }

    pub fn area(&self) -> f64 {
        (self.xmax - self.xmin) * (self.ymax - self.ymin)
    }

    fn overlaps(&self, other: &Rect) -> bool {
        self.xmin < other.xmax
            && other.xmin < self.xmax
            && self.ymin < other.ymax
            && other.ymin < self.ymax
    }
}

/// Validates that obstacles are pairwise disjoint and inside the unit square.
pub fn validate_obstacles(obstacles: &[Rect]) -> Result<()> {
    for (i, a) in obstacles.iter().enumerate() {
        for b in &obstacles[i + 1..] {
            if a.overlaps(b) {
                return Err(Error::Config(format!(
                    "obstacles {a:?} and {b:?} overlap"
                )));
            }
        }
    }
    Ok(())
}

/// Prior distribution over the parameters. Each built-in prior knows its
/// analytic normalization, so the density integrates to 1 over its
/// support by construction.
#[derive(Debug, Clone)]
pub enum Prior {
    /// Scalar Gaussian `N(mean, var)`.
    Gaussian { mean: f64, var: f64 },
    /// Uniform over an axis-aligned box.
    UniformBox { lo: Vec<f64>, hi: Vec<f64> },
    /// Uniform over the unit square minus obstacle rectangles
    /// (the "accessible region"), sampled by rejection.
    MaskedUniform {
        obstacles: Vec<Rect>,
        accessible_area: f64,
    },
}

impl Prior {
    pub fn gaussian(mean: f64, var: f64) -> Result<Self> {
        if !(var > 0.0) {
            return Err(Error::Config("prior variance must be positive".into()));
        }
        Ok(Prior::Gaussian { mean, var })
    }

    pub fn uniform_box(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::Config("prior box bounds must match and be non-empty".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(Error::Config("prior box must have lo < hi per axis".into()));
        }
        Ok(Prior::UniformBox { lo, hi })
    }

    /// Uniform over `[0,1]^2` minus the obstacles. Errors if the
    /// accessible area falls below 10% of the domain.
    pub fn masked_uniform(obstacles: Vec<Rect>) -> Result<Self> {
        validate_obstacles(&obstacles)?;
        let accessible_area = 1.0 - obstacles.iter().map(Rect::area).sum::<f64>();
        if accessible_area < 0.1 {
            return Err(Error::Config(format!(
                "accessible area {accessible_area:.3} is below 10% of the domain"
            )));
        }
        Ok(Prior::MaskedUniform {
            obstacles,
            accessible_area,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            Prior::Gaussian { .. } => 1,
            Prior::UniformBox { lo, .. } => lo.len(),
            Prior::MaskedUniform { .. } => 2,
        }
    }

    /// True iff `theta` lies in the support.
    pub fn supports(&self, theta: &ParameterSample) -> bool {
        match self {
            Prior::Gaussian { .. } => theta.dim() == 1 && theta.0[0].is_finite(),
            Prior::UniformBox { lo, hi } => {
                theta.dim() == lo.len()
                    && theta
                        .0
                        .iter()
                        .zip(lo.iter().zip(hi))
                        .all(|(&t, (&a, &b))| t >= a && t <= b)
            }
            Prior::MaskedUniform { obstacles, .. } => {
                theta.dim() == 2 && {
                    let (x, y) = (theta.0[0], theta.0[1]);
                    (0.0..=1.0).contains(&x)
                        && (0.0..=1.0).contains(&y)
                        && !obstacles.iter().any(|r| r.contains(x, y))
                }
            }
        }
    }

    /// Log prior density; `-inf` outside the support.
    pub fn log_density(&self, theta: &ParameterSample) -> f64 {
        if !self.supports(theta) {
            return f64::NEG_INFINITY;
        }
        match self {
            Prior::Gaussian { mean, var } => {
                let r = theta.0[0] - mean;
                -0.5 * (2.0 * std::f64::consts::PI * var).ln() - 0.5 * r * r / var
            }
            Prior::UniformBox { lo, hi } => {
                let vol: f64 = lo.iter().zip(hi).map(|(a, b)| b - a).product();
                -vol.ln()
            }
            Prior::MaskedUniform {
                accessible_area, ..
            } => -accessible_area.ln(),
        }
    }

    /// One draw. Obstacle-masked priors use rejection with a capped
    /// number of attempts.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Result<ParameterSample> {
        match self {
            Prior::Gaussian { mean, var } => {
                let z: f64 = rng.sample(StandardNormal);
                Ok(ParameterSample(vec![mean + var.sqrt() * z]))
            }
            Prior::UniformBox { lo, hi } => {
                let v = lo
                    .iter()
                    .zip(hi)
                    .map(|(&a, &b)| rng.gen_range(a..b))
                    .collect();
                Ok(ParameterSample(v))
            }
            Prior::MaskedUniform { obstacles, .. } => {
                for _ in 0..REJECTION_ATTEMPT_CAP {
                    let x = rng.gen_range(0.0..1.0);
                    let y = rng.gen_range(0.0..1.0);
                    if !obstacles.iter().any(|r| r.contains(x, y)) {
                        return Ok(ParameterSample(vec![x, y]));
                    }
                }
                Err(Error::RejectionExhausted {
                    attempts: REJECTION_ATTEMPT_CAP,
                })
            }
        }
    }

    /// Bounds for grid discretization of the parameter space. Bounded
    /// priors return their support box; the Gaussian prior is truncated
    /// at `mean +- 8 sigma` (mass outside is ~1e-15, negligible against
    /// any grid tolerance used here).
    pub fn grid_bounds(&self) -> Vec<(f64, f64)> {
        match self {
            Prior::Gaussian { mean, var } => {
                let s = var.sqrt();
                vec![(mean - 8.0 * s, mean + 8.0 * s)]
            }
            Prior::UniformBox { lo, hi } => lo.iter().copied().zip(hi.iter().copied()).collect(),
            Prior::MaskedUniform { .. } => vec![(0.0, 1.0), (0.0, 1.0)],
        }
    }
}

/// Forward observation maps `G(theta, xi)`.
#[derive(Debug, Clone)]
pub enum ForwardModel {
    /// `G = theta * xi`, the conjugate benchmark (d = p = n = 1).
    LinearGaussian,
    /// `G_k = theta^3 xi_k^2 + theta exp(-1.3 |0.2 - xi_k|)` applied
    /// componentwise; `executions` in {1, 2} is both the design and the
    /// observation dimension.
    Nonlinear { executions: usize },
    /// `G == 0` regardless of theta: a zero-information model used to
    /// exercise estimator edge cases. `p` is the parameter dimension it
    /// pairs with (the output ignores the parameters entirely).
    ConstantZero { n: usize, p: usize },
    /// Concentration field of the diffusion problem read off a tabulated
    /// surrogate; the design packs `sensors` sensor coordinates as
    /// `[x1, y1, x2, y2, ...]`.
    DiffusionSurrogate {
        table: Arc<SurrogateTable>,
        sensors: usize,
    },
}

impl ForwardModel {
    /// (design dim, parameter dim, observation dim).
    pub fn dims(&self) -> (usize, usize, usize) {
        match self {
            ForwardModel::LinearGaussian => (1, 1, 1),
            ForwardModel::Nonlinear { executions } => (*executions, 1, *executions),
            ForwardModel::ConstantZero { n, p } => (1, *p, *n),
            ForwardModel::DiffusionSurrogate { sensors, .. } => (2 * sensors, 2, *sensors),
        }
    }

    fn eval(&self, theta: &ParameterSample, xi: &DesignPoint) -> Vec<f64> {
        match self {
            ForwardModel::LinearGaussian => vec![theta.0[0] * xi.0[0]],
            ForwardModel::Nonlinear { .. } => {
                let t = theta.0[0];
                xi.0.iter()
                    .map(|&x| t * t * t * x * x + t * (-1.3 * (0.2 - x).abs()).exp())
                    .collect()
            }
            ForwardModel::ConstantZero { n, .. } => vec![0.0; *n],
            ForwardModel::DiffusionSurrogate { table, sensors } => {
                let (tx, ty) = (theta.0[0], theta.0[1]);
                (0..*sensors)
                    .map(|k| table.query(tx, ty, xi.0[2 * k], xi.0[2 * k + 1]))
                    .collect()
            }
        }
    }
}

/// Box bounds of the design domain.
#[derive(Debug, Clone)]
pub struct DesignDomain {
    bounds: Vec<(f64, f64)>,
}

impl DesignDomain {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.is_empty() || bounds.iter().any(|(a, b)| !(a < b)) {
            return Err(Error::Config("design bounds must be non-empty with lo < hi".into()));
        }
        Ok(Self { bounds })
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn contains(&self, xi: &DesignPoint) -> bool {
        xi.dim() == self.dim()
            && xi
                .0
                .iter()
                .zip(&self.bounds)
                .all(|(&x, &(a, b))| x >= a && x <= b)
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (v, &(a, b)) in x.iter_mut().zip(&self.bounds) {
            *v = v.clamp(a, b);
        }
    }
}

/// Feasibility constraint on designs beyond the box bounds.
#[derive(Debug, Clone, Default)]
pub enum DesignConstraint {
    #[default]
    BoxOnly,
    /// Every (x, y) sensor pair packed in the design must lie outside
    /// all obstacle rectangles.
    SensorsOutsideObstacles(Vec<Rect>),
}

impl DesignConstraint {
    pub fn feasible(&self, xi: &DesignPoint) -> bool {
        match self {
            DesignConstraint::BoxOnly => true,
            DesignConstraint::SensorsOutsideObstacles(obstacles) => xi
                .0
                .chunks_exact(2)
                .all(|s| !obstacles.iter().any(|r| r.contains(s[0], s[1]))),
        }
    }
}

/// Bundles prior, forward model, noise model, and design domain:
/// everything an estimator needs.
#[derive(Debug, Clone)]
pub struct ProblemDefinition {
    name: String,
    prior: Prior,
    forward: ForwardModel,
    noise: GaussianNoiseModel,
    domain: DesignDomain,
    constraint: DesignConstraint,
    eval_count: Arc<AtomicU64>,
}

impl ProblemDefinition {
    pub fn new(
        name: impl Into<String>,
        prior: Prior,
        forward: ForwardModel,
        noise: GaussianNoiseModel,
        domain: DesignDomain,
        constraint: DesignConstraint,
    ) -> Result<Self> {
        let (d, p, n) = forward.dims();
        if prior.dim() != p {
            return Err(Error::DimensionMismatch {
                what: "prior",
                expected: p,
                got: prior.dim(),
            });
        }
        if noise.dim() != n {
            return Err(Error::DimensionMismatch {
                what: "noise covariance",
                expected: n,
                got: noise.dim(),
            });
        }
        if domain.dim() != d {
            return Err(Error::DimensionMismatch {
                what: "design domain",
                expected: d,
                got: domain.dim(),
            });
        }
        Ok(Self {
            name: name.into(),
            prior,
            forward,
            noise,
            domain,
            constraint,
            eval_count: Arc::new(AtomicU64::new(0)),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn prior(&self) -> &Prior {
        &self.prior
    }
    pub fn forward(&self) -> &ForwardModel {
        &self.forward
    }
    pub fn noise(&self) -> &GaussianNoiseModel {
        &self.noise
    }
    pub fn domain(&self) -> &DesignDomain {
        &self.domain
    }
    pub fn constraint(&self) -> &DesignConstraint {
        &self.constraint
    }

    /// (design dim, parameter dim, observation dim).
    pub fn dims(&self) -> (usize, usize, usize) {
        self.forward.dims()
    }

    pub fn design_dim(&self) -> usize {
        self.forward.dims().0
    }
    pub fn param_dim(&self) -> usize {
        self.forward.dims().1
    }
    pub fn obs_dim(&self) -> usize {
        self.forward.dims().2
    }

    /// True iff `xi` is inside the box and satisfies the constraint.
    pub fn design_feasible(&self, xi: &DesignPoint) -> bool {
        self.domain.contains(xi) && self.constraint.feasible(xi)
    }

    /// Number of forward-model evaluations performed through this
    /// problem instance since construction (or the last reset).
    pub fn forward_eval_count(&self) -> u64 {
        self.eval_count.load(Ordering::Relaxed)
    }

    pub fn reset_forward_eval_count(&self) {
        self.eval_count.store(0, Ordering::Relaxed);
    }
}

/// Draws `count` independent prior samples. Deterministic given `seed`.
pub fn sample_prior(
    problem: &ProblemDefinition,
    count: usize,
    seed: u64,
) -> Result<Vec<ParameterSample>> {
    if count == 0 {
        return Err(Error::Config("sample count must be at least 1".into()));
    }
    let mut rng = substream(seed, StreamKind::BankPrior, 0);
    (0..count).map(|_| problem.prior.sample(&mut rng)).collect()
}

/// Evaluates the forward map `G(theta, xi)`. Deterministic; counted.
pub fn forward_eval(
    problem: &ProblemDefinition,
    theta: &ParameterSample,
    xi: &DesignPoint,
) -> Result<Vec<f64>> {
    let (d, p, _) = problem.dims();
    if theta.dim() != p {
        return Err(Error::DimensionMismatch {
            what: "parameter sample",
            expected: p,
            got: theta.dim(),
        });
    }
    if xi.dim() != d {
        return Err(Error::DimensionMismatch {
            what: "design point",
            expected: d,
            got: xi.dim(),
        });
    }
    problem.eval_count.fetch_add(1, Ordering::Relaxed);
    let g = problem.forward.eval(theta, xi);
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Evaluation(format!(
            "forward model produced a non-finite output at theta={:?}",
            theta.0
        )));
    }
    Ok(g)
}

/// Forms `y = G(theta, xi) + Gamma^{1/2} * noise_draw` from a
/// standard-normal draw. Deterministic given its inputs.
pub fn sample_observation(
    problem: &ProblemDefinition,
    theta: &ParameterSample,
    xi: &DesignPoint,
    noise_draw: &[f64],
) -> Result<Observation> {
    let g = forward_eval(problem, theta, xi)?;
    if noise_draw.len() != g.len() {
        return Err(Error::DimensionMismatch {
            what: "noise draw",
            expected: g.len(),
            got: noise_draw.len(),
        });
    }
    let sd = problem.noise.std_devs();
    Ok(Observation(
        g.iter()
            .zip(noise_draw)
            .zip(sd)
            .map(|((&m, &z), &s)| m + s * z)
            .collect(),
    ))
}

/// Log likelihood `log N(y; G(theta, xi), Gamma)`, including the
/// normalizing constant.
pub fn log_likelihood(
    problem: &ProblemDefinition,
    y: &Observation,
    theta: &ParameterSample,
    xi: &DesignPoint,
) -> Result<f64> {
    let g = forward_eval(problem, theta, xi)?;
    if y.dim() != g.len() {
        return Err(Error::DimensionMismatch {
            what: "observation",
            expected: g.len(),
            got: y.dim(),
        });
    }
    Ok(problem.noise.log_density(y.values(), &g))
}

/// A seeded, indexed store of prior draws and standard-normal noise
/// draws. The prior and noise streams derive from distinct sub-seeds of
/// the master seed, so they are mutually independent: regenerating one
/// never perturbs the other. Rebuilding with the same `(master_seed,
/// size)` yields bit-identical contents.
#[derive(Debug, Clone)]
pub struct SampleBank {
    master_seed: u64,
    prior_samples: Vec<ParameterSample>,
    noise_draws: Vec<Vec<f64>>,
}

impl SampleBank {
    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn size(&self) -> usize {
        self.prior_samples.len()
    }

    pub fn prior_samples(&self) -> &[ParameterSample] {
        &self.prior_samples
    }

    pub fn noise_draws(&self) -> &[Vec<f64>] {
        &self.noise_draws
    }
}

/// Builds a bank of `size` prior samples and `size` standard-normal
/// noise vectors (length = observation dimension). The bank depends
/// only on `(master_seed, size)` and the problem's prior and dimensions,
/// never on any design.
pub fn build_sample_bank(
    problem: &ProblemDefinition,
    size: usize,
    master_seed: u64,
) -> Result<SampleBank> {
    if size < 2 {
        return Err(Error::Config("sample bank size must be at least 2".into()));
    }
    let mut prior_rng = substream(master_seed, StreamKind::BankPrior, 0);
    let prior_samples: Vec<ParameterSample> = (0..size)
        .map(|_| problem.prior.sample(&mut prior_rng))
        .collect::<Result<_>>()?;

    let n = problem.obs_dim();
    let mut noise_rng = substream(master_seed, StreamKind::BankNoise, 0);
    let noise_draws: Vec<Vec<f64>> = (0..size)
        .map(|_| (0..n).map(|_| noise_rng.sample(StandardNormal)).collect())
        .collect();

    Ok(SampleBank {
        master_seed,
        prior_samples,
        noise_draws,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;

    fn unit_square_problem(obstacles: Vec<Rect>) -> ProblemDefinition {
        ProblemDefinition::new(
            "test-masked",
            Prior::masked_uniform(obstacles).unwrap(),
            ForwardModel::ConstantZero { n: 1, p: 2 },
            GaussianNoiseModel::iid(1.0, 1).unwrap(),
            DesignDomain::new(vec![(0.0, 1.0)]).unwrap(),
            DesignConstraint::BoxOnly,
        )
        .unwrap()
    }

    #[test]
    fn sample_prior_is_deterministic_and_in_support() {
        let problem = models::by_name("nonlinear-1d").unwrap();
        let a = sample_prior(&problem, 3, 42).unwrap();
        let b = sample_prior(&problem, 3, 42).unwrap();
        assert_eq!(a, b);
        for s in &a {
            assert!(problem.prior().supports(s));
        }
    }

    #[test]
    fn gaussian_prior_matches_law_of_large_numbers() {
        // N(0, 3^2): sample mean within 0.03 of 0, sample variance within
        // 0.3 of 9 at 1e5 draws (Chebyshev-style tolerances).
        let problem = models::by_name("lingauss-1d").unwrap();
        let draws = sample_prior(&problem, 100_000, 7).unwrap();
        let n = draws.len() as f64;
        let mean: f64 = draws.iter().map(|s| s.0[0]).sum::<f64>() / n;
        let var: f64 = draws.iter().map(|s| (s.0[0] - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 0.03, "sample mean {mean}");
        assert!((var - 9.0).abs() < 0.3, "sample variance {var}");
    }

    #[test]
    fn masked_prior_avoids_obstacle() {
        let rect = Rect::new(0.4, 0.6, 0.4, 0.6).unwrap();
        let problem = unit_square_problem(vec![rect]);
        let draws = sample_prior(&problem, 100, 1).unwrap();
        assert!(draws.iter().all(|s| !rect.contains(s.0[0], s.0[1])));
    }

    #[test]
    fn masked_prior_rejects_tiny_accessible_area() {
        let big = Rect::new(0.0, 1.0, 0.0, 0.95).unwrap();
        assert!(matches!(
            Prior::masked_uniform(vec![big]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn overlapping_obstacles_rejected() {
        let a = Rect::new(0.1, 0.5, 0.1, 0.5).unwrap();
        let b = Rect::new(0.4, 0.8, 0.4, 0.8).unwrap();
        assert!(Prior::masked_uniform(vec![a, b]).is_err());
    }

    #[test]
    fn forward_eval_known_values() {
        let lg = models::by_name("lingauss-1d").unwrap();
        let g = forward_eval(
            &lg,
            &ParameterSample(vec![2.0]),
            &DesignPoint(vec![3.0]),
        )
        .unwrap();
        assert_eq!(g, vec![6.0]);

        let nl = models::by_name("nonlinear-1d").unwrap();
        let g = forward_eval(
            &nl,
            &ParameterSample(vec![0.5]),
            &DesignPoint(vec![0.2]),
        )
        .unwrap();
        assert!((g[0] - 0.505).abs() < 1e-15, "got {}", g[0]);

        let g = forward_eval(&nl, &ParameterSample(vec![1.0]), &DesignPoint(vec![1.0])).unwrap();
        let expected = 1.0 + (-1.04f64).exp();
        assert!((g[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn forward_eval_dimension_mismatch() {
        let lg = models::by_name("lingauss-1d").unwrap();
        let err = forward_eval(
            &lg,
            &ParameterSample(vec![1.0, 2.0]),
            &DesignPoint(vec![0.5]),
        );
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn sample_observation_affine_map() {
        let lg = models::by_name("lingauss-1d").unwrap();
        let y = sample_observation(
            &lg,
            &ParameterSample(vec![0.0]),
            &DesignPoint(vec![1.0]),
            &[0.0],
        )
        .unwrap();
        assert_eq!(y.values(), &[0.0]);

        let y = sample_observation(
            &lg,
            &ParameterSample(vec![1.0]),
            &DesignPoint(vec![2.0]),
            &[1.5],
        )
        .unwrap();
        assert_eq!(y.values(), &[3.5]);

        let y2 = sample_observation(
            &lg,
            &ParameterSample(vec![1.0]),
            &DesignPoint(vec![2.0]),
            &[1.5],
        )
        .unwrap();
        assert_eq!(y.values(), y2.values());
    }

    #[test]
    fn log_likelihood_gaussian_constants() {
        let lg = models::by_name("lingauss-1d").unwrap();
        let theta = ParameterSample(vec![1.0]);
        let xi = DesignPoint(vec![2.0]);
        // zero residual: -(1/2) log(2 pi)
        let l0 = log_likelihood(&lg, &Observation(vec![2.0]), &theta, &xi).unwrap();
        let c = -0.5 * (2.0 * std::f64::consts::PI).ln();
        assert!((l0 - c).abs() < 1e-14);
        // residual 2: c - 2
        let l2 = log_likelihood(&lg, &Observation(vec![4.0]), &theta, &xi).unwrap();
        assert!((l2 - (c - 2.0)).abs() < 1e-14);

        // n = 2, Gamma = diag(0.05^2, 0.05^2), zero residual:
        // -log(2 pi) - 2 log(0.05)
        let noise = GaussianNoiseModel::iid(0.05 * 0.05, 2).unwrap();
        let v = noise.log_density(&[1.0, -0.3], &[1.0, -0.3]);
        let expected = -(2.0 * std::f64::consts::PI).ln() - 2.0 * 0.05f64.ln();
        assert!((v - expected).abs() < 1e-12);
    }

    #[test]
    fn gaussian_log_density_integrates_to_one() {
        // Quadrature oracle: exp(log density) over a fine 1D grid
        // integrates to 1 within 1e-4.
        let noise = GaussianNoiseModel::iid(0.7, 1).unwrap();
        let (lo, hi, m) = (-12.0, 12.0, 20_000);
        let h = (hi - lo) / m as f64;
        let mut total = 0.0;
        for k in 0..m {
            let y = lo + (k as f64 + 0.5) * h;
            total += noise.log_density(&[y], &[0.0]).exp() * h;
        }
        assert!((total - 1.0).abs() < 1e-4, "integral {total}");
    }

    #[test]
    fn bank_is_reproducible_and_seed_sensitive() {
        let problem = models::by_name("lingauss-1d").unwrap();
        let a = build_sample_bank(&problem, 100, 0).unwrap();
        let b = build_sample_bank(&problem, 100, 0).unwrap();
        assert_eq!(a.prior_samples(), b.prior_samples());
        assert_eq!(a.noise_draws(), b.noise_draws());

        let c = build_sample_bank(&problem, 100, 1).unwrap();
        assert_ne!(a.prior_samples(), c.prior_samples());
        assert_ne!(a.noise_draws(), c.noise_draws());
    }

    #[test]
    fn prior_stream_independent_of_noise_stream() {
        // The prior samples of a bank match a standalone prior draw with
        // the same master seed, regardless of the noise stream existing.
        let problem = models::by_name("lingauss-1d").unwrap();
        let bank = build_sample_bank(&problem, 50, 9).unwrap();
        let standalone = sample_prior(&problem, 50, 9).unwrap();
        assert_eq!(bank.prior_samples(), &standalone[..]);
    }

    #[test]
    fn forward_eval_counter_counts() {
        let lg = models::by_name("lingauss-1d").unwrap();
        lg.reset_forward_eval_count();
        for _ in 0..5 {
            forward_eval(&lg, &ParameterSample(vec![1.0]), &DesignPoint(vec![1.0])).unwrap();
        }
        assert_eq!(lg.forward_eval_count(), 5);
    }
}
