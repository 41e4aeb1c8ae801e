//! Configuration file schema and flag merging. Flags win over file
//! values; file values win over defaults. Seeds are always explicit —
//! nothing here reads the wall clock.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;

use mvoed::model::{
    DesignDomain, GaussianNoiseModel, Prior, ProblemDefinition, Rect,
};
use mvoed::models;
use mvoed::pde::{build_surrogate, PdeConfig};
use mvoed::EstimatorConfig;

use crate::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub model: Option<String>,
    pub seed: Option<u64>,
    /// Scalar noise variance override, expanded over the observation
    /// dimension.
    pub noise_variance: Option<f64>,
    /// Design box override, one `[lo, hi]` pair per dimension.
    pub design_bounds: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub prior: Option<PriorSpec>,
    #[serde(default)]
    pub estimator: EstimatorSection,
    #[serde(default)]
    pub bo: BoSection,
    #[serde(default)]
    pub diffusion: DiffusionSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum PriorSpec {
    Gaussian { mean: f64, var: f64 },
    Uniform { lo: Vec<f64>, hi: Vec<f64> },
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSection {
    pub n: Option<usize>,
    pub m1: Option<usize>,
    pub m2: Option<usize>,
    pub reuse: Option<bool>,
    pub lambda: Option<f64>,
    pub crs_seed: Option<u64>,
    pub parallel: Option<bool>,
    pub max_dropped_frac: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoSection {
    pub init: Option<usize>,
    pub budget: Option<usize>,
    pub kappa: Option<f64>,
    pub expected_improvement: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffusionSection {
    pub sensors: Option<usize>,
    pub lattice: Option<usize>,
    /// Surrogate cache path; the table is rebuilt when absent or stale.
    pub cache: Option<PathBuf>,
    /// Obstacle spec file (TOML list of rectangles).
    pub obstacles: Option<PathBuf>,
}

pub fn load_file(path: Option<&Path>) -> Result<FileConfig, CliError> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", p.display())))?;
            toml::from_str(&text)
                .map_err(|e| CliError::Config(format!("config {}: {e}", p.display())))
        }
    }
}

/// Obstacle spec file: a TOML list of rectangles.
#[derive(Debug, Deserialize)]
struct ObstacleFile {
    #[serde(default)]
    obstacle: Vec<ObstacleEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObstacleEntry {
    xmin: f64,
    xmax: f64,
    ymin: f64,
    ymax: f64,
}

pub fn load_obstacles(path: &Path) -> Result<Vec<Rect>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read obstacles {}: {e}", path.display())))?;
    let parsed: ObstacleFile = toml::from_str(&text)
        .map_err(|e| CliError::Config(format!("obstacles {}: {e}", path.display())))?;
    parsed
        .obstacle
        .into_iter()
        .map(|o| Rect::new(o.xmin, o.xmax, o.ymin, o.ymax).map_err(CliError::from))
        .collect()
}

/// Everything a command needs after merging file and flags.
pub struct Resolved {
    pub problem: ProblemDefinition,
    pub estimator: EstimatorConfig,
    pub seed: u64,
}

pub struct CommonOverrides {
    pub model: Option<String>,
    pub seed: Option<u64>,
    pub n: Option<usize>,
    pub m1: Option<usize>,
    pub m2: Option<usize>,
    pub no_reuse: bool,
    pub lambda: Option<f64>,
    pub crs_seed: Option<u64>,
    pub parallel: bool,
    pub obstacles: Option<PathBuf>,
}

/// Merges file + flags into a problem and estimator configuration.
pub fn resolve(file: &FileConfig, over: &CommonOverrides) -> Result<Resolved, CliError> {
    let model = over
        .model
        .clone()
        .or_else(|| file.model.clone())
        .ok_or_else(|| CliError::Config("missing required key 'model'".into()))?;

    let obstacles = match over.obstacles.as_ref().or(file.diffusion.obstacles.as_ref()) {
        Some(p) => load_obstacles(p)?,
        None => Vec::new(),
    };

    let mut problem = match model.as_str() {
        "diffusion-1s" | "diffusion-2s" | "diffusion" => {
            let sensors = match model.as_str() {
                "diffusion-2s" => 2,
                "diffusion-1s" => 1,
                _ => file.diffusion.sensors.unwrap_or(1),
            };
            let lattice = file.diffusion.lattice.unwrap_or(21);
            let pde_config = PdeConfig::with_obstacles(obstacles.clone());
            let table = build_surrogate(&pde_config, lattice, file.diffusion.cache.as_deref())?;
            models::diffusion::diffusion_problem(Arc::new(table), sensors, obstacles)?
        }
        name => models::by_name(name)?,
    };

    // optional problem overrides
    if file.prior.is_some() || file.noise_variance.is_some() || file.design_bounds.is_some() {
        let prior = match &file.prior {
            None => problem.prior().clone(),
            Some(PriorSpec::Gaussian { mean, var }) => Prior::gaussian(*mean, *var)?,
            Some(PriorSpec::Uniform { lo, hi }) => Prior::uniform_box(lo.clone(), hi.clone())?,
        };
        let noise = match file.noise_variance {
            None => problem.noise().clone(),
            Some(v) => GaussianNoiseModel::iid(v, problem.obs_dim())?,
        };
        let domain = match &file.design_bounds {
            None => problem.domain().clone(),
            Some(b) => DesignDomain::new(b.iter().map(|p| (p[0], p[1])).collect())?,
        };
        problem = ProblemDefinition::new(
            problem.name().to_string(),
            prior,
            problem.forward().clone(),
            noise,
            domain,
            problem.constraint().clone(),
        )?;
    }

    let n = over.n.or(file.estimator.n).unwrap_or(1000);
    let reuse = if over.no_reuse {
        false
    } else {
        file.estimator.reuse.unwrap_or(true)
    };
    let (m1, m2) = if reuse {
        (n, n)
    } else {
        (
            over.m1.or(file.estimator.m1).unwrap_or(n),
            over.m2.or(file.estimator.m2).unwrap_or(n),
        )
    };
    let estimator = EstimatorConfig {
        n,
        m1,
        m2,
        reuse,
        lambda: over.lambda.or(file.estimator.lambda).unwrap_or(0.0),
        crs_seed: over.crs_seed.or(file.estimator.crs_seed),
        parallel: over.parallel || file.estimator.parallel.unwrap_or(false),
        max_dropped_frac: file.estimator.max_dropped_frac.unwrap_or(0.01),
    };
    estimator.validate()?;

    Ok(Resolved {
        problem,
        estimator,
        seed: over.seed.or(file.seed).unwrap_or(0),
    })
}
