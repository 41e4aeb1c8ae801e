//! Subcommand implementations. Each one parses inputs, delegates to the
//! library, and emits CSV (file or stdout).

use std::path::Path;

use mvoed::bo::{run_bo, BoConfig};
use mvoed::convergence::{
    crs_smoothness_study, design_grid_1d, run_rate_study, EstimatorTag, TruthSource,
};
use mvoed::estimators::estimate_objective;
use mvoed::model::DesignPoint;
use mvoed::models::lingauss;
use mvoed::pde::{build_surrogate, PdeConfig};
use mvoed::rng::{derive_seed, StreamKind};
use mvoed::EstimateReport;

use crate::config::{self, CommonOverrides, Resolved};
use crate::{CliError, CommonArgs};

const SWEEP_ROW_CAP: usize = 100_000;

fn overrides(common: &CommonArgs) -> CommonOverrides {
    CommonOverrides {
        model: common.model.clone(),
        seed: common.seed,
        n: common.n,
        m1: common.m1,
        m2: common.m2,
        no_reuse: common.no_reuse,
        lambda: common.lambda,
        crs_seed: common.crs_seed,
        parallel: common.parallel,
        obstacles: common.obstacles.clone(),
    }
}

fn resolve(common: &CommonArgs) -> Result<Resolved, CliError> {
    let file = config::load_file(common.config.as_deref())?;
    config::resolve(&file, &overrides(common))
}

fn parse_xi(s: &str, expected_dim: usize) -> Result<DesignPoint, CliError> {
    let coords: Vec<f64> = s
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Config(format!("bad design coordinate '{t}'")))
        })
        .collect::<Result<_, _>>()?;
    if coords.len() != expected_dim {
        return Err(CliError::Config(format!(
            "design has {} coordinates but the model expects {expected_dim}",
            coords.len()
        )));
    }
    Ok(DesignPoint(coords))
}

fn write_output(out: Option<&Path>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

pub fn cmd_estimate(common: &CommonArgs, xi: &str) -> Result<(), CliError> {
    let resolved = resolve(common)?;
    let xi = parse_xi(xi, resolved.problem.design_dim())?;
    let seed = derive_seed(resolved.seed, StreamKind::Evaluation, 0);
    let report = estimate_objective(&resolved.problem, &xi, &resolved.estimator, seed)?;
    let mut csv = EstimateReport::csv_header(resolved.problem.design_dim());
    csv.push('\n');
    csv.push_str(&report.csv_row());
    csv.push('\n');
    write_output(common.out.as_deref(), &csv)
}

fn parse_grid(spec: &str, dim: usize) -> Result<Vec<usize>, CliError> {
    let parts: Vec<&str> = spec.split('x').map(str::trim).collect();
    if parts.is_empty() || parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("empty grid spec '{spec}'")));
    }
    let counts: Vec<usize> = parts
        .iter()
        .map(|p| {
            p.parse::<usize>()
                .map_err(|_| CliError::Config(format!("bad grid count '{p}'")))
        })
        .collect::<Result<_, _>>()?;
    let counts = if counts.len() == 1 {
        vec![counts[0]; dim]
    } else if counts.len() == dim {
        counts
    } else {
        return Err(CliError::Config(format!(
            "grid spec '{spec}' has {} counts but the design dimension is {dim}",
            counts.len()
        )));
    };
    if counts.iter().any(|&c| c < 2) {
        return Err(CliError::Config("grid needs at least 2 points per axis".into()));
    }
    Ok(counts)
}

pub fn cmd_sweep(common: &CommonArgs, grid: &str) -> Result<(), CliError> {
    let resolved = resolve(common)?;
    let d = resolved.problem.design_dim();
    if d > 4 {
        return Err(CliError::Config(format!(
            "sweep supports design dimension <= 4, got {d}"
        )));
    }
    let counts = parse_grid(grid, d)?;
    let rows: usize = counts.iter().product();
    if rows > SWEEP_ROW_CAP {
        return Err(CliError::Config(format!(
            "grid would produce {rows} rows (cap {SWEEP_ROW_CAP})"
        )));
    }

    let bounds = resolved.problem.domain().bounds().to_vec();
    let mut csv = EstimateReport::csv_header(d);
    csv.push('\n');
    for row in 0..rows {
        let mut idx = row;
        let mut coords = Vec::with_capacity(d);
        for k in (0..d).rev() {
            let c = counts[k];
            let pos = idx % c;
            idx /= c;
            let (lo, hi) = bounds[k];
            coords.push(lo + (hi - lo) * pos as f64 / (c - 1) as f64);
        }
        coords.reverse();
        let xi = DesignPoint(coords);
        let seed = derive_seed(resolved.seed, StreamKind::Evaluation, row as u64);
        let report = estimate_objective(&resolved.problem, &xi, &resolved.estimator, seed)?;
        csv.push_str(&report.csv_row());
        csv.push('\n');
    }
    write_output(common.out.as_deref(), &csv)
}

pub fn cmd_optimize(
    common: &CommonArgs,
    budget: usize,
    init: usize,
    kappa: f64,
    ei: bool,
) -> Result<(), CliError> {
    let resolved = resolve(common)?;
    let mut bo = BoConfig::new(resolved.estimator, init, budget, resolved.seed);
    bo.kappa = kappa;
    bo.use_expected_improvement = ei;
    let state = run_bo(&resolved.problem, &bo)?;

    let d = resolved.problem.design_dim();
    let mut csv = String::from("iteration,");
    csv.push_str(&(0..d).map(|k| format!("xi{k}")).collect::<Vec<_>>().join(","));
    csv.push_str(",j_hat,u_hat,v_hat,best_so_far\n");
    for e in &state.trace {
        let coords = e
            .design
            .coords()
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(",");
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            e.iteration, coords, e.j_hat, e.u_hat, e.v_hat, e.best_so_far
        ));
    }
    write_output(common.out.as_deref(), &csv)?;
    if common.out.is_some() {
        let coords = state
            .best_design
            .coords()
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(",");
        println!(
            "best design [{coords}] with objective {} ({} evaluations, {} skipped)",
            state.best_value,
            state.trace.len(),
            state.skipped
        );
    }
    Ok(())
}

pub fn cmd_convergence(
    common: &CommonArgs,
    estimator: &str,
    xi: &str,
    ladder: &str,
    replicates: usize,
) -> Result<(), CliError> {
    let resolved = resolve(common)?;
    let tag = EstimatorTag::parse(estimator)?;
    let xi = parse_xi(xi, resolved.problem.design_dim())?;
    let ladder: Vec<usize> = ladder
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| CliError::Config(format!("bad ladder entry '{t}'")))
        })
        .collect::<Result<_, _>>()?;

    // Closed-form truth exists only for the linear-Gaussian benchmark;
    // anything else self-estimates at 10x the top rung over 20 seeds.
    let truth = if resolved.problem.name() == "lingauss-1d" {
        let x = xi.coords()[0];
        let u = lingauss::exact_expected_utility(x);
        let v = lingauss::exact_utility_variance(x);
        TruthSource::Exact(match tag {
            EstimatorTag::ExpectedUtility => u,
            EstimatorTag::UtilityVariance => v,
            EstimatorTag::Objective => u - resolved.estimator.lambda * v,
        })
    } else {
        TruthSource::SelfEstimated {
            factor: 10,
            replicates: 20,
        }
    };

    let study = run_rate_study(
        &resolved.problem,
        &xi,
        tag,
        &resolved.estimator,
        &ladder,
        replicates,
        truth,
        resolved.seed,
    )?;

    let mut csv = String::from("n,mean,variance,bias,truth\n");
    for (k, &n) in study.ladder.iter().enumerate() {
        csv.push_str(&format!(
            "{n},{},{},{},{}\n",
            study.rung_means[k], study.rung_vars[k], study.rung_bias[k], study.truth
        ));
    }
    let slopes = format!(
        "# estimator={} variance_slope={} bias_slope={}\n",
        study.tag.label(),
        study
            .variance_slope()
            .map(|s| s.to_string())
            .unwrap_or_else(|_| "nan".into()),
        study
            .bias_slope()
            .map(|s| s.to_string())
            .unwrap_or_else(|_| "nan".into()),
    );
    csv.push_str(&slopes);
    write_output(common.out.as_deref(), &csv)?;
    if common.out.is_some() {
        print!("{slopes}");
    }
    Ok(())
}

pub fn cmd_crs_study(common: &CommonArgs, grid: usize) -> Result<(), CliError> {
    let resolved = resolve(common)?;
    if resolved.problem.design_dim() != 1 {
        return Err(CliError::Config(
            "crs-study sweeps a 1D design grid; use a 1D model".into(),
        ));
    }
    let (lo, hi) = resolved.problem.domain().bounds()[0];
    let points = design_grid_1d(lo, hi, grid);
    let study = crs_smoothness_study(&resolved.problem, &resolved.estimator, &points, resolved.seed)?;

    let mut csv = String::from("xi,v_hat_crs,v_hat_fresh\n");
    for (k, xi) in study.grid.iter().enumerate() {
        csv.push_str(&format!(
            "{},{},{}\n",
            xi.coords()[0],
            study.with_crs[k],
            study.without_crs[k]
        ));
    }
    let summary = format!(
        "# tv_with_crs={} tv_without_crs={}\n",
        study.tv_with, study.tv_without
    );
    csv.push_str(&summary);
    write_output(common.out.as_deref(), &csv)?;
    if common.out.is_some() {
        print!("{summary}");
    }
    Ok(())
}

pub fn cmd_pde_table(
    lattice: usize,
    obstacles: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    let obstacles = match obstacles {
        Some(p) => config::load_obstacles(p)?,
        None => Vec::new(),
    };
    let pde_config = PdeConfig::with_obstacles(obstacles);
    let table = build_surrogate(&pde_config, lattice, Some(out))?;
    println!(
        "surrogate table: lattice {}x{}, grid {}x{}, config hash {:016x}, written to {}",
        table.lattice(),
        table.lattice(),
        pde_config.n_cells,
        pde_config.n_cells,
        pde_config.hash(),
        out.display()
    );
    Ok(())
}
