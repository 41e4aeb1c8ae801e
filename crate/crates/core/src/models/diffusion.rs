//! Contaminant source-inversion problems on the diffusion surrogate.
//!
//! The unknown parameter is the 2D source location with a uniform prior
//! over the accessible region; the design places `m` concentration
//! sensors (design dimension `2m`), each read at the final time with
//! i.i.d. Gaussian noise of standard deviation 0.05 per sensor.

use std::sync::Arc;

use crate::error::Result;
use crate::model::{
    DesignConstraint, DesignDomain, ForwardModel, GaussianNoiseModel, Prior, ProblemDefinition,
    Rect,
};
use crate::pde::SurrogateTable;

/// Per-sensor noise standard deviation.
pub const SENSOR_NOISE_SD: f64 = 0.05;

/// Builds the source-inversion problem with `sensors` sensors reading
/// the tabulated field. Obstacles (possibly empty) mask both the prior
/// support and feasible sensor placements.
pub fn diffusion_problem(
    table: Arc<SurrogateTable>,
    sensors: usize,
    obstacles: Vec<Rect>,
) -> Result<ProblemDefinition> {
    let prior = if obstacles.is_empty() {
        Prior::uniform_box(vec![0.0, 0.0], vec![1.0, 1.0])?
    } else {
        Prior::masked_uniform(obstacles.clone())?
    };
    let constraint = if obstacles.is_empty() {
        DesignConstraint::BoxOnly
    } else {
        DesignConstraint::SensorsOutsideObstacles(obstacles)
    };
    let name = format!("diffusion-{sensors}s");
    ProblemDefinition::new(
        name,
        prior,
        ForwardModel::DiffusionSurrogate { table, sensors },
        GaussianNoiseModel::iid(SENSOR_NOISE_SD * SENSOR_NOISE_SD, sensors)?,
        DesignDomain::new(vec![(0.0, 1.0); 2 * sensors])?,
        constraint,
    )
}
