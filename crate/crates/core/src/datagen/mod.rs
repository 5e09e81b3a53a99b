//! Parametric snapshot generation: small PDE proxies and manufactured
//! fields that produce families of high-dimensional field vectors indexed
//! by parameters (and time), plus the sampling and split bookkeeping the
//! training pipeline consumes.

pub mod steady;
pub mod transport;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::SeededRng;
pub use transport::{run_transient, Boundary, BoundarySet, Simulation};

/// Porosity of the porous-medium transport problems.
pub const POROSITY: f64 = 0.3;
/// Fixed horizontal flow rate of the transport problems.
pub const HORIZONTAL_FLOW: f64 = 20.0;
/// Fixed diffusivity of the velocity-parameterized transport problem.
pub const TRANSPORT_DIFFUSIVITY: f64 = 0.2;
/// Inflow concentration on the left boundary.
pub const INFLOW_VALUE: f64 = 1.0;
/// Velocity scale of the convection-cell problem, chosen so the velocity
/// magnitude is O(1) over the parameter box.
pub const CONVECTION_KAPPA: f64 = 1.0 / 450.0;
/// Default CFL safety factor.
pub const DEFAULT_SAFETY: f64 = 0.9;

/// The five snapshot families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    /// Transport with the vertical velocity amplitude as the parameter.
    TransportVelocity,
    /// Transport with the diffusivity as the parameter.
    TransportDiffusivity,
    /// Heated-box convection cell with the circulation strength as the
    /// parameter (transient temperature field).
    ThermalConvection,
    /// Steady 2-D displacement magnitude, two boundary parameters.
    Displacement2d,
    /// Steady 3-D displacement magnitude, two loading parameters.
    Displacement3d,
}

impl Problem {
    pub const ALL: [Problem; 5] = [
        Problem::TransportVelocity,
        Problem::TransportDiffusivity,
        Problem::ThermalConvection,
        Problem::Displacement2d,
        Problem::Displacement3d,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Problem::TransportVelocity => "transport_velocity",
            Problem::TransportDiffusivity => "transport_diffusivity",
            Problem::ThermalConvection => "thermal_convection",
            Problem::Displacement2d => "displacement_2d",
            Problem::Displacement3d => "displacement_3d",
        }
    }

    pub fn is_transient(&self) -> bool {
        matches!(
            self,
            Problem::TransportVelocity | Problem::TransportDiffusivity | Problem::ThermalConvection
        )
    }

    pub fn param_dim(&self) -> usize {
        match self {
            Problem::TransportVelocity | Problem::TransportDiffusivity | Problem::ThermalConvection => 1,
            Problem::Displacement2d | Problem::Displacement3d => 2,
        }
    }

    /// Declared parameter box, one (lo, hi) per dimension.
    pub fn param_box(&self) -> Vec<(f64, f64)> {
        match self {
            Problem::TransportVelocity => vec![(5.0, 25.0)],
            Problem::TransportDiffusivity => vec![(0.1, 1.0)],
            Problem::ThermalConvection => vec![(350.0, 450.0)],
            Problem::Displacement2d => vec![(-1.0, 1.0), (-1.0, 1.0)],
            Problem::Displacement3d => vec![(0.1, 0.9), (0.1, 0.9)],
        }
    }
}

/// Structured grid. Transient solvers treat it cell-centered (nx·ny cells);
/// the steady field families evaluate at nodes (spacing l/(n−1)), so the
/// boundary rows carry exact boundary values. `nz = 1` means 2-D.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub lx: f64,
    pub ly: f64,
    pub lz: f64,
}

impl GridSpec {
    pub fn dof(&self) -> usize {
        self.nx * self.ny * self.nz.max(1)
    }

    pub fn is_3d(&self) -> bool {
        self.nz > 1
    }

    pub fn dx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    /// Node coordinate for the steady families (inclusive endpoints).
    pub fn node_x(&self, i: usize) -> f64 {
        if self.nx > 1 {
            self.lx * i as f64 / (self.nx - 1) as f64
        } else {
            0.0
        }
    }

    pub fn node_y(&self, j: usize) -> f64 {
        if self.ny > 1 {
            self.ly * j as f64 / (self.ny - 1) as f64
        } else {
            0.0
        }
    }

    pub fn node_z(&self, k: usize) -> f64 {
        if self.nz > 1 {
            self.lz * k as f64 / (self.nz - 1) as f64
        } else {
            0.0
        }
    }
}

/// Axis-aligned rectangle masked out of every emitted snapshot (the
/// generators still solve the full grid; masked entries are stored as 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoleSpec {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl HoleSpec {
    fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }
}

/// Everything that pins down one snapshot family: which problem, its grid,
/// time horizon, output cadence, and optional masked holes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub problem: Problem,
    pub grid: GridSpec,
    /// Final time of transient runs; ignored for steady families.
    pub tau: f64,
    /// Record every k-th step (initial and final always recorded).
    pub record_stride: usize,
    pub safety: f64,
    #[serde(default)]
    pub holes: Vec<HoleSpec>,
}

impl ProblemSpec {
    /// Reference-scale defaults per problem.
    pub fn defaults(problem: Problem) -> Self {
        let grid = match problem {
            Problem::TransportVelocity | Problem::TransportDiffusivity | Problem::Displacement2d => GridSpec {
                nx: 48,
                ny: 32,
                nz: 1,
                lx: 2.0,
                ly: 1.0,
                lz: 0.0,
            },
            Problem::ThermalConvection => GridSpec {
                nx: 32,
                ny: 32,
                nz: 1,
                lx: 1.0,
                ly: 1.0,
                lz: 0.0,
            },
            Problem::Displacement3d => GridSpec {
                nx: 12,
                ny: 12,
                nz: 12,
                lx: 1.0,
                ly: 1.0,
                lz: 1.0,
            },
        };
        let (tau, record_stride) = match problem {
            Problem::TransportVelocity | Problem::TransportDiffusivity => (0.1, 16),
            Problem::ThermalConvection => (0.05, 8),
            Problem::Displacement2d | Problem::Displacement3d => (0.0, 1),
        };
        ProblemSpec {
            problem,
            grid,
            tau,
            record_stride,
            safety: DEFAULT_SAFETY,
            holes: Vec::new(),
        }
    }

    pub fn dof(&self) -> usize {
        self.grid.dof()
    }

    fn validate(&self) -> Result<()> {
        if self.grid.nx == 0 || self.grid.ny == 0 {
            return Err(Error::InvalidConfig("grid must have nonzero extents".into()));
        }
        if self.problem == Problem::Displacement3d && !self.grid.is_3d() {
            return Err(Error::InvalidConfig(
                "the 3-D displacement family needs nz >= 2".into(),
            ));
        }
        if self.problem != Problem::Displacement3d && self.grid.is_3d() {
            return Err(Error::InvalidConfig(format!(
                "{} is a 2-D family; set nz = 1",
                self.problem.name()
            )));
        }
        if self.problem.is_transient() && !(self.tau > 0.0) {
            return Err(Error::InvalidConfig("transient runs need tau > 0".into()));
        }
        Ok(())
    }
}

/// Build the advection–diffusion state for one transient family at one μ.
fn transport_simulation(spec: &ProblemSpec, mu: &[f64]) -> Result<Simulation> {
    let g = &spec.grid;
    let (nx, ny) = (g.nx, g.ny);
    let (dx, dy) = (g.dx(), g.dy());
    match spec.problem {
        Problem::TransportVelocity | Problem::TransportDiffusivity => {
            let (vy_amp, diff) = match spec.problem {
                Problem::TransportVelocity => (mu[0], TRANSPORT_DIFFUSIVITY),
                _ => (1.0, mu[0]),
            };
            let ux = Array2::from_elem((nx + 1, ny), HORIZONTAL_FLOW / POROSITY);
            let uy = Array2::from_shape_fn((nx, ny + 1), |(i, _)| {
                let x = (i as f64 + 0.5) * dx;
                vy_amp * (std::f64::consts::PI * x).cos() / POROSITY
            });
            let bc = BoundarySet {
                left: Boundary::Dirichlet(INFLOW_VALUE),
                right: Boundary::ZeroGradient,
                bottom: Boundary::ZeroGradient,
                top: Boundary::ZeroGradient,
            };
            Simulation::new(nx, ny, dx, dy, ux, uy, diff / POROSITY, bc, 0.0)
        }
        Problem::ThermalConvection => {
            // Streamfunction at cell corners; face velocities from its
            // discrete differences are divergence-free to roundoff.
            let amp = mu[0] * CONVECTION_KAPPA;
            let psi = Array2::from_shape_fn((nx + 1, ny + 1), |(i, j)| {
                let x = i as f64 * dx;
                let y = j as f64 * dy;
                amp * (std::f64::consts::PI * x).sin() * (std::f64::consts::PI * y).sin()
            });
            let ux = Array2::from_shape_fn((nx + 1, ny), |(i, j)| (psi[[i, j + 1]] - psi[[i, j]]) / dy);
            let uy = Array2::from_shape_fn((nx, ny + 1), |(i, j)| -(psi[[i + 1, j]] - psi[[i, j]]) / dx);
            let bc = BoundarySet {
                left: Boundary::ZeroGradient,
                right: Boundary::ZeroGradient,
                bottom: Boundary::Dirichlet(1.0),
                top: Boundary::Dirichlet(0.0),
            };
            Simulation::new(nx, ny, dx, dy, ux, uy, 1.0, bc, 0.0)
        }
        _ => Err(Error::InvalidConfig(format!(
            "{} is not a transient family",
            spec.problem.name()
        ))),
    }
}

fn apply_holes(spec: &ProblemSpec, row: &mut Array1<f64>) {
    if spec.holes.is_empty() {
        return;
    }
    let g = &spec.grid;
    let cell_centered = spec.problem.is_transient();
    for k in 0..g.nz.max(1) {
        for j in 0..g.ny {
            let y = if cell_centered { (j as f64 + 0.5) * g.dy() } else { g.node_y(j) };
            for i in 0..g.nx {
                let x = if cell_centered { (i as f64 + 0.5) * g.dx() } else { g.node_x(i) };
                if spec.holes.iter().any(|h| h.contains(x, y)) {
                    row[(k * g.ny + j) * g.nx + i] = 0.0;
                }
            }
        }
    }
}

/// Generate snapshots for one parameter point. Transient families return
/// strictly increasing timestamps (t = 0 included); steady families return
/// one row and no timestamps.
pub fn generate(spec: &ProblemSpec, mu: &[f64]) -> Result<(Vec<f64>, Array2<f64>)> {
    spec.validate()?;
    if mu.len() != spec.problem.param_dim() {
        return Err(Error::shape(
            "parameter vector",
            format!("{}", spec.problem.param_dim()),
            format!("{}", mu.len()),
        ));
    }
    for (d, &(lo, hi)) in spec.problem.param_box().iter().enumerate() {
        if !(mu[d] >= lo && mu[d] <= hi) {
            return Err(Error::InvalidConfig(format!(
                "parameter {d} = {} outside [{lo}, {hi}] for {}",
                mu[d],
                spec.problem.name()
            )));
        }
    }

    let (timestamps, mut rows) = if spec.problem.is_transient() {
        let mut sim = transport_simulation(spec, mu)?;
        let (ts, rows) = run_transient(&mut sim, spec.tau, spec.record_stride, spec.safety)?;
        (ts, rows)
    } else {
        let row = match spec.problem {
            Problem::Displacement2d => steady::displacement_field_2d(&spec.grid, mu),
            Problem::Displacement3d => steady::displacement_field_3d(&spec.grid, mu),
            _ => unreachable!("transient handled above"),
        };
        (Vec::new(), vec![row])
    };
    for row in &mut rows {
        apply_holes(spec, row);
    }
    let mut fields = Array2::zeros((rows.len(), spec.dof()));
    for (r, row) in rows.iter().enumerate() {
        fields.row_mut(r).assign(row);
    }
    if fields.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!(
            "snapshot family {} at mu {mu:?}",
            spec.problem.name()
        )));
    }
    Ok((timestamps, fields))
}

/// Training vs held-out-test membership of one sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitLabel {
    Train,
    Test,
}

/// All snapshots for one parameter point.
#[derive(Debug, Clone)]
pub struct Sample {
    pub mu: Vec<f64>,
    /// Empty for steady families.
    pub timestamps: Vec<f64>,
    /// One snapshot per row.
    pub fields: Array2<f64>,
    pub split: SplitLabel,
    /// Row indices (within `fields`) held out for validation during
    /// training. Only train samples carry entries.
    pub validation_rows: Vec<usize>,
}

/// A full generated dataset for one problem.
#[derive(Debug, Clone)]
pub struct SnapshotSet {
    pub spec: ProblemSpec,
    pub samples: Vec<Sample>,
}

impl SnapshotSet {
    pub fn dof(&self) -> usize {
        self.spec.dof()
    }

    pub fn train_samples(&self) -> impl Iterator<Item = &Sample> {
        self.samples.iter().filter(|s| s.split == SplitLabel::Train)
    }

    pub fn test_samples(&self) -> impl Iterator<Item = &Sample> {
        self.samples.iter().filter(|s| s.split == SplitLabel::Test)
    }

    /// Stack all training rows (sample order, time-major inside a sample)
    /// and return them with the global validation row indices.
    pub fn train_matrix(&self) -> (Array2<f64>, Vec<usize>) {
        let total: usize = self.train_samples().map(|s| s.fields.nrows()).sum();
        let mut rows = Array2::zeros((total, self.dof()));
        let mut val = Vec::new();
        let mut offset = 0;
        for sample in self.train_samples() {
            for r in 0..sample.fields.nrows() {
                rows.row_mut(offset + r).assign(&sample.fields.row(r));
            }
            val.extend(sample.validation_rows.iter().map(|&r| offset + r));
            offset += sample.fields.nrows();
        }
        (rows, val)
    }

    /// Interpolation inputs aligned with `train_matrix` rows: `[t, μ...]`
    /// for transient families, `[μ...]` for steady ones.
    pub fn train_inputs(&self) -> Array2<f64> {
        let d = self.input_dim();
        let total: usize = self.train_samples().map(|s| s.fields.nrows()).sum();
        let mut out = Array2::zeros((total, d));
        let mut offset = 0;
        for sample in self.train_samples() {
            for r in 0..sample.fields.nrows() {
                let mut col = 0;
                if self.spec.problem.is_transient() {
                    out[[offset + r, 0]] = sample.timestamps[r];
                    col = 1;
                }
                for (k, &m) in sample.mu.iter().enumerate() {
                    out[[offset + r, col + k]] = m;
                }
            }
            offset += sample.fields.nrows();
        }
        out
    }

    /// Interpolation input rows for one sample (uses its own timestamps).
    pub fn sample_inputs(&self, sample: &Sample) -> Array2<f64> {
        let d = self.input_dim();
        let n = sample.fields.nrows();
        let mut out = Array2::zeros((n, d));
        for r in 0..n {
            let mut col = 0;
            if self.spec.problem.is_transient() {
                out[[r, 0]] = sample.timestamps[r];
                col = 1;
            }
            for (k, &m) in sample.mu.iter().enumerate() {
                out[[r, col + k]] = m;
            }
        }
        out
    }

    /// Width of the interpolation input: parameters plus time if transient.
    pub fn input_dim(&self) -> usize {
        self.spec.problem.param_dim() + usize::from(self.spec.problem.is_transient())
    }
}

/// How to place parameter points in the box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleMode {
    /// Evenly spaced including endpoints (tensor grid across 2-D boxes,
    /// ~√M per axis). M = 1 degenerates to the box midpoint.
    Uniform,
    /// Seeded uniform draws.
    Random { seed: u64 },
}

/// Place `m` parameter points. Uniform placement over a 2-D box uses a
/// round(√m) × round(√m) tensor grid, so the returned count is the nearest
/// square; 1-D and Random placement return exactly `m`.
pub fn sample_parameters(problem: Problem, m: usize, mode: SampleMode) -> Result<Vec<Vec<f64>>> {
    if m == 0 {
        return Err(Error::InvalidConfig("cannot sample 0 parameter points".into()));
    }
    let bx = problem.param_box();
    match mode {
        SampleMode::Uniform => {
            let axis_points = |(lo, hi): (f64, f64), k: usize| -> Vec<f64> {
                if k == 1 {
                    vec![0.5 * (lo + hi)]
                } else {
                    (0..k)
                        .map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64)
                        .collect()
                }
            };
            match bx.len() {
                1 => Ok(axis_points(bx[0], m).into_iter().map(|v| vec![v]).collect()),
                2 => {
                    let per_axis = ((m as f64).sqrt().round() as usize).max(1);
                    let a = axis_points(bx[0], per_axis);
                    let b = axis_points(bx[1], per_axis);
                    let mut out = Vec::with_capacity(per_axis * per_axis);
                    for &x in &a {
                        for &y in &b {
                            out.push(vec![x, y]);
                        }
                    }
                    Ok(out)
                }
                d => Err(Error::InvalidConfig(format!("unsupported parameter dimension {d}"))),
            }
        }
        SampleMode::Random { seed } => {
            let mut rng = SeededRng::new(seed);
            Ok((0..m)
                .map(|_| bx.iter().map(|&(lo, hi)| rng.uniform(lo, hi)).collect())
                .collect())
        }
    }
}

/// Generate a complete dataset: uniformly placed training samples, randomly
/// placed test samples (redrawn on exact collision), and a seeded 5%
/// validation-row holdout across all training rows.
pub fn assemble_set(spec: &ProblemSpec, m_train: usize, m_test: usize, seed: u64) -> Result<SnapshotSet> {
    spec.validate()?;
    if m_train < 2 {
        return Err(Error::InvalidConfig(format!(
            "need at least 2 training samples, got {m_train}"
        )));
    }
    let train_mus = sample_parameters(spec.problem, m_train, SampleMode::Uniform)?;

    let mut test_mus: Vec<Vec<f64>> = Vec::with_capacity(m_test);
    if m_test > 0 {
        let bx = spec.problem.param_box();
        let mut rng = SeededRng::substream(seed, 0x0001_0000);
        for _ in 0..m_test {
            let mut attempts = 0;
            loop {
                let candidate: Vec<f64> = bx.iter().map(|&(lo, hi)| rng.uniform(lo, hi)).collect();
                let clash = train_mus.iter().chain(test_mus.iter()).any(|m| m == &candidate);
                if !clash {
                    test_mus.push(candidate);
                    break;
                }
                attempts += 1;
                if attempts > 10_000 {
                    return Err(Error::InvalidConfig(
                        "could not draw a test parameter distinct from the training grid".into(),
                    ));
                }
            }
        }
    }

    let mut samples = Vec::with_capacity(train_mus.len() + test_mus.len());
    for mu in &train_mus {
        let (timestamps, fields) = generate(spec, mu)?;
        samples.push(Sample {
            mu: mu.clone(),
            timestamps,
            fields,
            split: SplitLabel::Train,
            validation_rows: Vec::new(),
        });
    }
    for mu in &test_mus {
        let (timestamps, fields) = generate(spec, mu)?;
        samples.push(Sample {
            mu: mu.clone(),
            timestamps,
            fields,
            split: SplitLabel::Test,
            validation_rows: Vec::new(),
        });
    }

    // Global validation holdout over all training rows.
    let total_train_rows: usize = samples
        .iter()
        .filter(|s| s.split == SplitLabel::Train)
        .map(|s| s.fields.nrows())
        .sum();
    let n_val = ((total_train_rows as f64 * 0.05).floor() as usize).max(1);
    let mut order: Vec<usize> = (0..total_train_rows).collect();
    let mut rng = SeededRng::substream(seed, 0x0002_0000);
    rng.shuffle(&mut order);
    let mut chosen: Vec<usize> = order[..n_val.min(total_train_rows)].to_vec();
    chosen.sort_unstable();

    let mut offset = 0;
    let mut cursor = 0;
    for sample in samples.iter_mut().filter(|s| s.split == SplitLabel::Train) {
        let end = offset + sample.fields.nrows();
        while cursor < chosen.len() && chosen[cursor] < end {
            sample.validation_rows.push(chosen[cursor] - offset);
            cursor += 1;
        }
        offset = end;
    }

    Ok(SnapshotSet {
        spec: spec.clone(),
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec(problem: Problem) -> ProblemSpec {
        let mut spec = ProblemSpec::defaults(problem);
        match problem {
            Problem::TransportVelocity | Problem::TransportDiffusivity => {
                spec.grid.nx = 12;
                spec.grid.ny = 8;
                spec.tau = 0.02;
                spec.record_stride = 8;
            }
            Problem::ThermalConvection => {
                spec.grid.nx = 10;
                spec.grid.ny = 10;
                spec.tau = 0.01;
                spec.record_stride = 4;
            }
            Problem::Displacement2d => {
                spec.grid.nx = 8;
                spec.grid.ny = 6;
            }
            Problem::Displacement3d => {
                spec.grid.nx = 4;
                spec.grid.ny = 4;
                spec.grid.nz = 4;
            }
        }
        spec
    }

    #[test]
    fn uniform_1d_sampling_matches_reference() {
        let pts = sample_parameters(Problem::TransportDiffusivity, 3, SampleMode::Uniform).unwrap();
        let flat: Vec<f64> = pts.iter().map(|p| p[0]).collect();
        assert_eq!(flat, vec![0.1, 0.55, 1.0]);
        let single = sample_parameters(Problem::TransportVelocity, 1, SampleMode::Uniform).unwrap();
        assert_eq!(single, vec![vec![15.0]]);
    }

    #[test]
    fn uniform_2d_sampling_builds_tensor_grid() {
        let pts = sample_parameters(Problem::Displacement3d, 9, SampleMode::Uniform).unwrap();
        assert_eq!(pts.len(), 9);
        assert_eq!(pts[0], vec![0.1, 0.1]);
        assert_eq!(pts[8], vec![0.9, 0.9]);
        assert_eq!(pts[4], vec![0.5, 0.5]);
        // M=100 rounds to a 10×10 grid.
        let pts = sample_parameters(Problem::Displacement2d, 100, SampleMode::Uniform).unwrap();
        assert_eq!(pts.len(), 100);
    }

    #[test]
    fn random_sampling_is_seeded_and_in_box() {
        let a = sample_parameters(Problem::ThermalConvection, 10, SampleMode::Random { seed: 5 }).unwrap();
        let b = sample_parameters(Problem::ThermalConvection, 10, SampleMode::Random { seed: 5 }).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|p| (350.0..=450.0).contains(&p[0])));
        let c = sample_parameters(Problem::ThermalConvection, 10, SampleMode::Random { seed: 6 }).unwrap();
        assert_ne!(a, c);
        assert!(sample_parameters(Problem::ThermalConvection, 0, SampleMode::Uniform).is_err());
    }

    #[test]
    fn transient_generation_shape_and_bounds() {
        for problem in [Problem::TransportVelocity, Problem::TransportDiffusivity, Problem::ThermalConvection] {
            let spec = small_spec(problem);
            let mu = sample_parameters(problem, 1, SampleMode::Uniform).unwrap();
            let (ts, fields) = generate(&spec, &mu[0]).unwrap();
            assert!(ts.len() >= 2, "{}", problem.name());
            assert_eq!(fields.nrows(), ts.len());
            assert_eq!(fields.ncols(), spec.dof());
            assert!(ts.windows(2).all(|w| w[1] > w[0]));
            assert!(
                fields.iter().all(|&v| (-1e-12..=1.0 + 1e-12).contains(&v)),
                "{} out of [0,1]",
                problem.name()
            );
        }
    }

    #[test]
    fn time_step_counts_vary_with_the_parameter() {
        let spec = small_spec(Problem::TransportDiffusivity);
        let (ts_a, _) = generate(&spec, &[0.1]).unwrap();
        let (ts_b, _) = generate(&spec, &[1.0]).unwrap();
        assert_ne!(ts_a.len(), ts_b.len());
    }

    #[test]
    fn convection_velocity_is_divergence_free() {
        let spec = small_spec(Problem::ThermalConvection);
        let sim = transport_simulation(&spec, &[450.0]).unwrap();
        assert!(sim.max_divergence() < 1e-10);
    }

    #[test]
    fn hotter_circulation_shifts_the_plume() {
        // The transported temperature centroid moves monotonically with the
        // circulation-strength parameter.
        let spec = small_spec(Problem::ThermalConvection);
        let centroid_x = |mu: f64| -> f64 {
            let (_, fields) = generate(&spec, &[mu]).unwrap();
            let last = fields.row(fields.nrows() - 1);
            let g = &spec.grid;
            let mut num = 0.0;
            let mut den = 0.0;
            for j in 0..g.ny {
                for i in 0..g.nx {
                    let x = (i as f64 + 0.5) * g.dx();
                    let v = last[j * g.nx + i];
                    num += v * x;
                    den += v;
                }
            }
            num / den
        };
        let c = [centroid_x(350.0), centroid_x(400.0), centroid_x(450.0)];
        assert!(c[0] < c[1] && c[1] < c[2], "centroids {c:?} not increasing");
    }

    #[test]
    fn out_of_box_parameter_rejected() {
        let spec = small_spec(Problem::TransportVelocity);
        assert!(generate(&spec, &[4.9]).is_err());
        assert!(generate(&spec, &[25.1]).is_err());
        assert!(generate(&spec, &[5.0, 1.0]).is_err());
    }

    #[test]
    fn holes_zero_masked_cells_only() {
        let mut spec = small_spec(Problem::TransportVelocity);
        spec.holes = vec![HoleSpec {
            x0: 0.5,
            x1: 1.0,
            y0: 0.25,
            y1: 0.75,
        }];
        let (_, masked) = generate(&spec, &[15.0]).unwrap();
        spec.holes.clear();
        let (_, open) = generate(&spec, &[15.0]).unwrap();
        let g = &spec.grid;
        let mut masked_cells = 0;
        for j in 0..g.ny {
            for i in 0..g.nx {
                let (x, y) = ((i as f64 + 0.5) * g.dx(), (j as f64 + 0.5) * g.dy());
                let inside = x >= 0.5 && x <= 1.0 && y >= 0.25 && y <= 0.75;
                let idx = j * g.nx + i;
                if inside {
                    masked_cells += 1;
                    assert!(masked.column(idx).iter().all(|&v| v == 0.0));
                } else {
                    assert_eq!(masked.column(idx), open.column(idx));
                }
            }
        }
        assert!(masked_cells > 0);
    }

    #[test]
    fn assemble_counts_rows_and_validation_share() {
        let spec = small_spec(Problem::Displacement2d);
        let set = assemble_set(&spec, 9, 4, 11).unwrap();
        assert_eq!(set.train_samples().count(), 9);
        assert_eq!(set.test_samples().count(), 4);
        let (rows, val) = set.train_matrix();
        assert_eq!(rows.nrows(), 9); // steady: one row per sample
        assert_eq!(val.len(), 1); // max(1, floor(9·0.05))
        // Transient case: 5% of all rows.
        let spec = small_spec(Problem::TransportVelocity);
        let set = assemble_set(&spec, 3, 1, 11).unwrap();
        let (rows, val) = set.train_matrix();
        let expect_val = ((rows.nrows() as f64 * 0.05).floor() as usize).max(1);
        assert_eq!(val.len(), expect_val);
        assert!(val.iter().all(|&i| i < rows.nrows()));
        let mut sorted = val.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), val.len());
    }

    #[test]
    fn assemble_is_deterministic_and_test_mus_avoid_grid() {
        let spec = small_spec(Problem::TransportDiffusivity);
        let a = assemble_set(&spec, 4, 3, 99).unwrap();
        let b = assemble_set(&spec, 4, 3, 99).unwrap();
        for (sa, sb) in a.samples.iter().zip(&b.samples) {
            assert_eq!(sa.mu, sb.mu);
            assert_eq!(sa.fields, sb.fields);
            assert_eq!(sa.validation_rows, sb.validation_rows);
        }
        let train_mus: Vec<_> = a.train_samples().map(|s| s.mu.clone()).collect();
        for t in a.test_samples() {
            assert!(!train_mus.contains(&t.mu));
        }
    }

    #[test]
    fn train_inputs_align_with_rows() {
        let spec = small_spec(Problem::TransportVelocity);
        let set = assemble_set(&spec, 2, 0, 3).unwrap();
        let inputs = set.train_inputs();
        let (rows, _) = set.train_matrix();
        assert_eq!(inputs.nrows(), rows.nrows());
        assert_eq!(inputs.ncols(), 2); // t + one parameter
        // First sample's block carries its own timestamps and μ.
        let first = &set.samples[0];
        for r in 0..first.fields.nrows() {
            assert_eq!(inputs[[r, 0]], first.timestamps[r]);
            assert_eq!(inputs[[r, 1]], first.mu[0]);
        }
        // Steady variant drops the time column.
        let spec = small_spec(Problem::Displacement3d);
        let set = assemble_set(&spec, 4, 0, 3).unwrap();
        assert_eq!(set.train_inputs().ncols(), 2);
        assert_eq!(set.input_dim(), 2);
    }

    #[test]
    fn assemble_rejects_tiny_training_sets() {
        let spec = small_spec(Problem::TransportVelocity);
        assert!(assemble_set(&spec, 1, 1, 0).is_err());
    }
}
