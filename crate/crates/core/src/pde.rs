//! 2D diffusion with a Gaussian source on the unit square:
//! `dG/dt = laplacian(G) + S`, homogeneous Neumann boundaries, optional
//! rectangular obstacles, and a tabulated interpolating surrogate for
//! fast forward evaluations.
//!
//! Discretization: conservative finite volume on a cell-centered
//! `n x n` grid. Time stepping is Strang-split Crank-Nicolson — an
//! implicit half step along x, a full step along y carrying the source,
//! and another half step along x — second order in time, unconditionally
//! stable, and mass-conservative by the telescoping of face fluxes.
//! Obstacle cells are rasterized by cell center, held at zero, and
//! excluded from fluxes (zero normal flux on obstacle faces), which
//! splits each grid line into independently solved tridiagonal segments.

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{validate_obstacles, Rect};

/// Physical and numerical parameters of the diffusion problem.
#[derive(Debug, Clone, PartialEq)]
pub struct PdeConfig {
    /// Cells per axis; grid spacing is `1 / n_cells`.
    pub n_cells: usize,
    /// Time step.
    pub dt: f64,
    /// Final (measurement) time.
    pub t_final: f64,
    /// Total source emission rate.
    pub source_strength: f64,
    /// Gaussian source width.
    pub source_width: f64,
    /// Obstacle rectangles (pairwise disjoint, inside the unit square).
    pub obstacles: Vec<Rect>,
}

impl Default for PdeConfig {
    fn default() -> Self {
        Self {
            n_cells: 100,
            dt: 5e-4,
            t_final: 0.16,
            source_strength: 2.0,
            source_width: 0.05,
            obstacles: Vec::new(),
        }
    }
}

impl PdeConfig {
    pub fn with_obstacles(obstacles: Vec<Rect>) -> Self {
        Self {
            obstacles,
            ..Self::default()
        }
    }

    pub fn dz(&self) -> f64 {
        1.0 / self.n_cells as f64
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_cells < 4 {
            return Err(Error::Config("grid must have at least 4 cells per axis".into()));
        }
        if !(self.dt > 0.0 && self.t_final > 0.0) {
            return Err(Error::Config("dt and t_final must be positive".into()));
        }
        let steps = self.t_final / self.dt;
        if (steps - steps.round()).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "t_final must be an integer number of steps (t_final/dt = {steps})"
            )));
        }
        if !(self.source_width > 0.0) {
            return Err(Error::Config("source width must be positive".into()));
        }
        validate_obstacles(&self.obstacles)
    }

    /// FNV-1a hash of the canonical byte encoding; keys surrogate caches.
    pub fn hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        eat(&(self.n_cells as u64).to_le_bytes());
        eat(&self.dt.to_bits().to_le_bytes());
        eat(&self.t_final.to_bits().to_le_bytes());
        eat(&self.source_strength.to_bits().to_le_bytes());
        eat(&self.source_width.to_bits().to_le_bytes());
        eat(&(self.obstacles.len() as u64).to_le_bytes());
        for r in &self.obstacles {
            for v in [r.xmin, r.xmax, r.ymin, r.ymax] {
                eat(&v.to_bits().to_le_bytes());
            }
        }
        h
    }
}

/// A concentration field on the cell-centered grid. `values[j * n + i]`
/// is the cell with center `((i + 0.5) dz, (j + 0.5) dz)`. Obstacle
/// cells are held at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionField {
    n: usize,
    values: Vec<f64>,
}

/// Snap tolerance (in cell units) that makes interpolation exact at
/// lattice nodes and cell centers despite decimal-to-binary rounding.
const SNAP_EPS: f64 = 1e-9;

fn split_cell(t: f64, max_cell: usize) -> (usize, f64) {
    let t = t.clamp(0.0, max_cell as f64);
    let mut i = t.floor() as usize;
    if i > max_cell.saturating_sub(1) {
        i = max_cell.saturating_sub(1);
    }
    let mut f = t - i as f64;
    if f < SNAP_EPS {
        f = 0.0;
    } else if f > 1.0 - SNAP_EPS {
        f = 1.0;
    }
    (i, f)
}

impl DiffusionField {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            values: vec![0.0; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.n + i]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[j * self.n + i] = v;
    }

    /// Total mass `sum(values) * dz^2`.
    pub fn total_mass(&self) -> f64 {
        let dz2 = (1.0 / self.n as f64).powi(2);
        self.values.iter().sum::<f64>() * dz2
    }

    /// Bilinear interpolation of cell-center values at `(x, y)`,
    /// clamped to the half-cell margin at the boundary.
    pub fn interpolate(&self, x: f64, y: f64) -> f64 {
        let inv_dz = self.n as f64;
        let (i, fx) = split_cell(x * inv_dz - 0.5, self.n - 1);
        let (j, fy) = split_cell(y * inv_dz - 0.5, self.n - 1);
        let v00 = self.at(i, j);
        let v10 = self.at(i + 1, j);
        let v01 = self.at(i, j + 1);
        let v11 = self.at(i + 1, j + 1);
        (1.0 - fy) * ((1.0 - fx) * v00 + fx * v10) + fy * ((1.0 - fx) * v01 + fx * v11)
    }
}

/// [start, end] inclusive indices of one contiguous active run of cells
/// along a grid line.
type Segment = (usize, usize);

/// Finite-volume solver for one `PdeConfig`.
#[derive(Debug, Clone)]
pub struct DiffusionSolver {
    config: PdeConfig,
    mask: Vec<bool>,
    /// Active segments per row (x sweeps) and per column (y sweeps).
    row_segments: Vec<Vec<Segment>>,
    col_segments: Vec<Vec<Segment>>,
}

fn segments_of(line_masked: impl Iterator<Item = bool>, len: usize) -> Vec<Segment> {
    let mut segs = Vec::new();
    let mut start = None;
    for (idx, masked) in line_masked.enumerate() {
        match (masked, start) {
            (false, None) => start = Some(idx),
            (true, Some(s)) => {
                segs.push((s, idx - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        segs.push((s, len - 1));
    }
    segs
}

impl DiffusionSolver {
    pub fn new(config: PdeConfig) -> Result<Self> {
        config.validate()?;
        let n = config.n_cells;
        let dz = config.dz();
        let mut mask = vec![false; n * n];
        for j in 0..n {
            for i in 0..n {
                let (x, y) = ((i as f64 + 0.5) * dz, (j as f64 + 0.5) * dz);
                if config.obstacles.iter().any(|r| r.contains(x, y)) {
                    mask[j * n + i] = true;
                }
            }
        }
        let row_segments = (0..n)
            .map(|j| segments_of((0..n).map(|i| mask[j * n + i]), n))
            .collect();
        let col_segments = (0..n)
            .map(|i| segments_of((0..n).map(|j| mask[j * n + i]), n))
            .collect();
        Ok(Self {
            config,
            mask,
            row_segments,
            col_segments,
        })
    }

    pub fn config(&self) -> &PdeConfig {
        &self.config
    }

    pub fn cell_masked(&self, i: usize, j: usize) -> bool {
        self.mask[j * self.config.n_cells + i]
    }

    /// Discrete Gaussian source at cell centers; obstacle cells get none.
    pub fn source_field(&self, theta_x: f64, theta_y: f64) -> Vec<f64> {
        let n = self.config.n_cells;
        let dz = self.config.dz();
        let h2 = self.config.source_width * self.config.source_width;
        let amp = self.config.source_strength / (2.0 * std::f64::consts::PI * h2);
        let mut s = vec![0.0; n * n];
        for j in 0..n {
            for i in 0..n {
                if self.mask[j * n + i] {
                    continue;
                }
                let dx = (i as f64 + 0.5) * dz - theta_x;
                let dy = (j as f64 + 0.5) * dz - theta_y;
                s[j * n + i] = amp * (-(dx * dx + dy * dy) / (2.0 * h2)).exp();
            }
        }
        s
    }

    /// Source mass injected per unit time, `sum(source) * dz^2`.
    pub fn injection_rate(&self, source: &[f64]) -> f64 {
        let dz2 = self.config.dz() * self.config.dz();
        source.iter().sum::<f64>() * dz2
    }

    /// Field at `t_final` for a source at `theta`, starting from zero.
    pub fn solve(&self, theta_x: f64, theta_y: f64) -> DiffusionField {
        let mut field = DiffusionField::zeros(self.config.n_cells);
        let source = self.source_field(theta_x, theta_y);
        self.evolve(&mut field, Some(&source), self.config.steps(), self.config.dt);
        field
    }

    /// Advances `steps` Strang-split Crank-Nicolson steps of size `dt`.
    /// `source` (if any) is integrated in the middle (y) substep.
    pub fn evolve(
        &self,
        field: &mut DiffusionField,
        source: Option<&[f64]>,
        steps: usize,
        dt: f64,
    ) {
        assert_eq!(field.n, self.config.n_cells);
        let dz2 = self.config.dz() * self.config.dz();
        let beta_half = dt / (4.0 * dz2);
        let beta_full = dt / (2.0 * dz2);
        let mut work = SweepWork::new(self.config.n_cells);
        for _ in 0..steps {
            self.sweep_x(field, beta_half, &mut work);
            self.sweep_y(field, beta_full, source, dt, &mut work);
            self.sweep_x(field, beta_half, &mut work);
        }
    }

    fn sweep_x(&self, field: &mut DiffusionField, beta: f64, work: &mut SweepWork) {
        let n = self.config.n_cells;
        for j in 0..n {
            for &(a, b) in &self.row_segments[j] {
                let len = b - a + 1;
                if len == 1 {
                    continue; // both faces closed: no diffusion along this line
                }
                for (k, i) in (a..=b).enumerate() {
                    work.line[k] = field.at(i, j);
                }
                cn_segment(&work.line[..len], beta, 0.0, &[], &mut work.rhs, &mut work.scratch);
                for (k, i) in (a..=b).enumerate() {
                    field.set(i, j, work.rhs[k]);
                }
            }
        }
    }

    fn sweep_y(
        &self,
        field: &mut DiffusionField,
        beta: f64,
        source: Option<&[f64]>,
        dt: f64,
        work: &mut SweepWork,
    ) {
        let n = self.config.n_cells;
        for i in 0..n {
            for &(a, b) in &self.col_segments[i] {
                let len = b - a + 1;
                for (k, j) in (a..=b).enumerate() {
                    work.line[k] = field.at(i, j);
                    work.src[k] = source.map_or(0.0, |s| s[j * n + i]);
                }
                if len == 1 {
                    // no diffusion; source still injects
                    field.set(i, a, work.line[0] + dt * work.src[0]);
                    continue;
                }
                cn_segment(
                    &work.line[..len],
                    beta,
                    dt,
                    &work.src[..len],
                    &mut work.rhs,
                    &mut work.scratch,
                );
                for (k, j) in (a..=b).enumerate() {
                    field.set(i, j, work.rhs[k]);
                }
            }
        }
    }
}

struct SweepWork {
    line: Vec<f64>,
    src: Vec<f64>,
    rhs: Vec<f64>,
    scratch: Vec<f64>,
}

impl SweepWork {
    fn new(n: usize) -> Self {
        Self {
            line: vec![0.0; n],
            src: vec![0.0; n],
            rhs: vec![0.0; n],
            scratch: vec![0.0; n],
        }
    }
}

/// One Crank-Nicolson substep along a segment with zero-flux ends:
/// solves `(I - beta T) u_new = (I + beta T) u_old + dt * src`, where
/// `T` is the 1D flux-form Laplacian stencil. Writes `u_new` into `rhs`.
fn cn_segment(u: &[f64], beta: f64, dt: f64, src: &[f64], rhs: &mut [f64], scratch: &mut [f64]) {
    let m = u.len();
    debug_assert!(m >= 2);
    // RHS = (I + beta T) u (+ dt * src)
    rhs[0] = u[0] + beta * (u[1] - u[0]);
    for k in 1..m - 1 {
        rhs[k] = u[k] + beta * (u[k - 1] - 2.0 * u[k] + u[k + 1]);
    }
    rhs[m - 1] = u[m - 1] + beta * (u[m - 2] - u[m - 1]);
    if !src.is_empty() {
        for k in 0..m {
            rhs[k] += dt * src[k];
        }
    }
    // Thomas solve of the tridiagonal (I - beta T):
    // ends: diag 1 + beta, interior: diag 1 + 2 beta, off-diagonals -beta.
    let off = -beta;
    let diag = |k: usize| -> f64 {
        if k == 0 || k == m - 1 {
            1.0 + beta
        } else {
            1.0 + 2.0 * beta
        }
    };
    scratch[0] = off / diag(0);
    rhs[0] /= diag(0);
    for k in 1..m {
        let denom = diag(k) - off * scratch[k - 1];
        if k < m - 1 {
            scratch[k] = off / denom;
        }
        rhs[k] = (rhs[k] - off * rhs[k - 1]) / denom;
    }
    for k in (0..m - 1).rev() {
        rhs[k] -= scratch[k] * rhs[k + 1];
    }
}

/// Tabulated solver outputs on a uniform lattice of source locations,
/// bilinearly interpolated in both the source location and the query
/// point. Replaces the expensive per-sample PDE solve in the
/// source-inversion forward model.
#[derive(Debug)]
pub struct SurrogateTable {
    config: PdeConfig,
    lattice: usize,
    fields: Vec<DiffusionField>,
}

impl SurrogateTable {
    pub fn config(&self) -> &PdeConfig {
        &self.config
    }

    pub fn lattice(&self) -> usize {
        self.lattice
    }

    /// Stored field for lattice node `(u, v)`,
    /// i.e. source at `(u, v) / (lattice - 1)`.
    pub fn node_field(&self, u: usize, v: usize) -> &DiffusionField {
        &self.fields[u * self.lattice + v]
    }

    /// Concentration at sensor `(zx, zy)` for a source at
    /// `(theta_x, theta_y)`.
    pub fn query(&self, theta_x: f64, theta_y: f64, zx: f64, zy: f64) -> f64 {
        let last = self.lattice - 1;
        let (u, fu) = split_cell(theta_x * last as f64, last);
        let (v, fv) = split_cell(theta_y * last as f64, last);
        let f00 = self.node_field(u, v).interpolate(zx, zy);
        let f10 = self.node_field(u + 1, v).interpolate(zx, zy);
        let f01 = self.node_field(u, v + 1).interpolate(zx, zy);
        let f11 = self.node_field(u + 1, v + 1).interpolate(zx, zy);
        (1.0 - fv) * ((1.0 - fu) * f00 + fu * f10) + fv * ((1.0 - fu) * f01 + fu * f11)
    }
}

const CACHE_MAGIC: &[u8; 8] = b"MVOEDSG1";

/// Builds (or loads) the surrogate table. Lattice nodes cover `[0,1]^2`
/// inclusively; the solver runs at every node, including nodes inside
/// obstacles, so interpolation near obstacle boundaries stays defined.
/// When `cache` is given, a valid cache file keyed by the config hash is
/// loaded instead of solving, and a freshly built table is persisted.
pub fn build_surrogate(
    config: &PdeConfig,
    lattice: usize,
    cache: Option<&Path>,
) -> Result<SurrogateTable> {
    if lattice < 11 {
        return Err(Error::Config(format!(
            "surrogate lattice must be at least 11 per axis, got {lattice}"
        )));
    }
    config.validate()?;
    if let Some(path) = cache {
        if path.exists() {
            match load_surrogate(config, path) {
                Ok(table) if table.lattice == lattice => return Ok(table),
                // stale or foreign cache: rebuild below and overwrite
                _ => {}
            }
        }
    }

    let solver = DiffusionSolver::new(config.clone())?;
    let last = (lattice - 1) as f64;
    let fields: Vec<DiffusionField> = (0..lattice * lattice)
        .into_par_iter()
        .map(|idx| {
            let (u, v) = (idx / lattice, idx % lattice);
            solver.solve(u as f64 / last, v as f64 / last)
        })
        .collect();

    let table = SurrogateTable {
        config: config.clone(),
        lattice,
        fields,
    };
    if let Some(path) = cache {
        write_surrogate(&table, path)?;
    }
    Ok(table)
}

fn write_surrogate(table: &SurrogateTable, path: &Path) -> Result<()> {
    let n = table.config.n_cells;
    let mut buf = Vec::with_capacity(8 + 8 + 12 + table.fields.len() * n * n * 8);
    buf.extend_from_slice(CACHE_MAGIC);
    buf.extend_from_slice(&table.config.hash().to_le_bytes());
    buf.extend_from_slice(&(table.lattice as u32).to_le_bytes());
    buf.extend_from_slice(&(n as u32).to_le_bytes());
    buf.extend_from_slice(&(n as u32).to_le_bytes());
    for field in &table.fields {
        for v in field.values() {
            buf.extend_from_slice(&v.to_bits().to_le_bytes());
        }
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

/// Reads the header of a surrogate cache file: `(config_hash, lattice)`.
pub fn read_surrogate_header(path: &Path) -> Result<(u64, usize)> {
    let mut file = std::fs::File::open(path)?;
    let mut header = [0u8; 8 + 8 + 12];
    file.read_exact(&mut header)?;
    if &header[..8] != CACHE_MAGIC {
        return Err(Error::CacheMismatch(format!(
            "{} is not a surrogate cache",
            path.display()
        )));
    }
    let hash = u64::from_le_bytes(header[8..16].try_into().unwrap());
    let lattice = u32::from_le_bytes(header[16..20].try_into().unwrap()) as usize;
    Ok((hash, lattice))
}

/// Loads a surrogate cache, verifying the config hash and grid shape.
pub fn load_surrogate(config: &PdeConfig, path: &Path) -> Result<SurrogateTable> {
    let data = std::fs::read(path)?;
    if data.len() < 28 || &data[..8] != CACHE_MAGIC {
        return Err(Error::CacheMismatch(format!(
            "{} is not a surrogate cache",
            path.display()
        )));
    }
    let hash = u64::from_le_bytes(data[8..16].try_into().unwrap());
    if hash != config.hash() {
        return Err(Error::CacheMismatch(
            "cache was built for a different configuration".into(),
        ));
    }
    let lattice = u32::from_le_bytes(data[16..20].try_into().unwrap()) as usize;
    let nx = u32::from_le_bytes(data[20..24].try_into().unwrap()) as usize;
    let ny = u32::from_le_bytes(data[24..28].try_into().unwrap()) as usize;
    if nx != config.n_cells || ny != config.n_cells {
        return Err(Error::CacheMismatch("cache grid shape mismatch".into()));
    }
    let expected = 28 + lattice * lattice * nx * ny * 8;
    if data.len() != expected {
        return Err(Error::CacheMismatch("cache payload truncated".into()));
    }
    let mut fields = Vec::with_capacity(lattice * lattice);
    let mut offset = 28;
    for _ in 0..lattice * lattice {
        let mut values = Vec::with_capacity(nx * ny);
        for _ in 0..nx * ny {
            values.push(f64::from_bits(u64::from_le_bytes(
                data[offset..offset + 8].try_into().unwrap(),
            )));
            offset += 8;
        }
        fields.push(DiffusionField { n: nx, values });
    }
    Ok(SurrogateTable {
        config: config.clone(),
        lattice,
        fields,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> PdeConfig {
        PdeConfig {
            n_cells: 50,
            dt: 1e-3,
            t_final: 0.04,
            ..PdeConfig::default()
        }
    }

    #[test]
    fn zero_source_from_zero_stays_zero() {
        let solver = DiffusionSolver::new(small_config()).unwrap();
        let mut field = DiffusionField::zeros(50);
        solver.evolve(&mut field, None, 10, 1e-3);
        assert!(field.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_source_conserves_mass_per_step() {
        let solver = DiffusionSolver::new(small_config()).unwrap();
        let mut field = DiffusionField::zeros(50);
        // a lumpy initial condition
        for j in 0..50 {
            for i in 0..50 {
                let (x, y) = ((i as f64 + 0.5) / 50.0, (j as f64 + 0.5) / 50.0);
                field.set(i, j, (-(x - 0.3f64).powi(2) / 0.01 - (y - 0.6f64).powi(2) / 0.02).exp());
            }
        }
        let mut prev = field.total_mass();
        for _ in 0..50 {
            solver.evolve(&mut field, None, 1, 1e-3);
            let mass = field.total_mass();
            assert!(
                ((mass - prev) / prev).abs() < 1e-10,
                "mass drift {prev} -> {mass}"
            );
            prev = mass;
        }
    }

    #[test]
    fn solution_is_linear_in_source_strength() {
        let mut config = small_config();
        let solver1 = DiffusionSolver::new(config.clone()).unwrap();
        config.source_strength *= 2.0;
        let solver2 = DiffusionSolver::new(config).unwrap();
        let f1 = solver1.solve(0.4, 0.55);
        let f2 = solver2.solve(0.4, 0.55);
        let max = f1.values().iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        for (a, b) in f1.values().iter().zip(f2.values()) {
            assert!((2.0 * a - b).abs() <= 1e-12 * max, "{a} vs {b}");
        }
    }

    #[test]
    fn centered_source_field_is_mirror_symmetric() {
        let solver = DiffusionSolver::new(PdeConfig::default()).unwrap();
        let field = solver.solve(0.5, 0.5);
        let n = field.n();
        let peak = field.values().iter().cloned().fold(0.0f64, f64::max);
        for j in 0..n {
            for i in 0..n {
                let v = field.at(i, j);
                let vx = field.at(n - 1 - i, j);
                let vy = field.at(i, n - 1 - j);
                assert!((v - vx).abs() <= 1e-10 * peak, "x mirror at ({i},{j})");
                assert!((v - vy).abs() <= 1e-10 * peak, "y mirror at ({i},{j})");
            }
        }
    }

    #[test]
    fn source_mass_balance_at_final_time() {
        let solver = DiffusionSolver::new(PdeConfig::default()).unwrap();
        let field = solver.solve(0.5, 0.5);
        let expected = 2.0 * 0.16;
        let mass = field.total_mass();
        assert!(
            ((mass - expected) / expected).abs() < 0.01,
            "mass {mass} vs {expected}"
        );
    }

    #[test]
    fn obstacle_mass_balances_injected_mass() {
        let rect = Rect::new(0.3, 0.5, 0.4, 0.6).unwrap();
        let config = PdeConfig {
            n_cells: 100,
            dt: 5e-4,
            t_final: 0.08,
            obstacles: vec![rect],
            ..PdeConfig::default()
        };
        let solver = DiffusionSolver::new(config.clone()).unwrap();
        let source = solver.source_field(0.7, 0.5);
        let injected = solver.injection_rate(&source) * config.t_final;
        let field = solver.solve(0.7, 0.5);
        let mass = field.total_mass();
        assert!(
            ((mass - injected) / injected).abs() < 0.01,
            "mass {mass} vs injected {injected}"
        );
        // masked cells stay exactly zero
        for j in 0..100 {
            for i in 0..100 {
                if solver.cell_masked(i, j) {
                    assert_eq!(field.at(i, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn temporal_self_convergence_is_second_order() {
        let config = PdeConfig {
            n_cells: 50,
            dt: 4e-3,
            t_final: 0.08,
            ..PdeConfig::default()
        };
        let solver = DiffusionSolver::new(config.clone()).unwrap();
        let source = solver.source_field(0.35, 0.6);
        let run = |dt: f64| {
            let mut f = DiffusionField::zeros(50);
            let steps = (config.t_final / dt).round() as usize;
            solver.evolve(&mut f, Some(&source), steps, dt);
            f
        };
        let f1 = run(4e-3);
        let f2 = run(2e-3);
        let f4 = run(1e-3);
        let diff = |a: &DiffusionField, b: &DiffusionField| {
            a.values()
                .iter()
                .zip(b.values())
                .fold(0.0f64, |m, (&x, &y)| m.max((x - y).abs()))
        };
        let e1 = diff(&f1, &f2);
        let e2 = diff(&f2, &f4);
        let order = (e1 / e2).log2();
        assert!(order >= 1.8, "observed order {order} (e1={e1}, e2={e2})");
    }

    #[test]
    fn interpolation_at_cell_center_is_exact() {
        let solver = DiffusionSolver::new(small_config()).unwrap();
        let field = solver.solve(0.5, 0.5);
        let dz = 1.0 / 50.0;
        for &(i, j) in &[(0usize, 0usize), (24, 30), (49, 49), (7, 41)] {
            let x = (i as f64 + 0.5) * dz;
            let y = (j as f64 + 0.5) * dz;
            assert_eq!(field.interpolate(x, y), field.at(i, j));
        }
    }

    #[test]
    fn surrogate_nodes_reproduce_solver_exactly() {
        let config = small_config();
        let table = build_surrogate(&config, 11, None).unwrap();
        let dz = 1.0 / 50.0;
        let (u, v) = (3usize, 7usize);
        let theta = (u as f64 / 10.0, v as f64 / 10.0);
        let z = (20.0 * dz + 0.5 * dz, 33.0 * dz + 0.5 * dz);
        let stored = table.node_field(u, v).at(20, 33);
        assert_eq!(table.query(theta.0, theta.1, z.0, z.1), stored);
    }

    #[test]
    fn surrogate_orders_near_and_far_sources() {
        let config = small_config();
        let table = build_surrogate(&config, 11, None).unwrap();
        let sensor = (0.2, 0.2);
        let near = table.query(0.25, 0.25, sensor.0, sensor.1);
        let far = table.query(0.9, 0.9, sensor.0, sensor.1);
        assert!(near > far, "near {near} far {far}");
    }

    #[test]
    fn surrogate_cache_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("table.bin");
        let config = small_config();
        let built = build_surrogate(&config, 11, Some(&path)).unwrap();
        assert!(path.exists());
        let (hash, lattice) = read_surrogate_header(&path).unwrap();
        assert_eq!(hash, config.hash());
        assert_eq!(lattice, 11);
        let loaded = build_surrogate(&config, 11, Some(&path)).unwrap();
        for (a, b) in built.fields.iter().zip(&loaded.fields) {
            assert_eq!(a.values(), b.values());
        }
        // a different config must not accept this cache
        let other = PdeConfig {
            source_strength: 3.0,
            ..small_config()
        };
        assert!(load_surrogate(&other, &path).is_err());
    }
}
