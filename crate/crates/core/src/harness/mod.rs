//! Experiment orchestration behind the `zeitlin` command-line tool.

pub mod basis_check;
pub mod bench;
pub mod blobs;
pub mod convergence;
pub mod io;
mod reference;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use reference::{reference_solution, ReferenceSpec};

use crate::diagnostics::{CsvWriter, DiagnosticsRecord, DEFAULT_K_MAX};
use crate::error::{Error, Result};
use crate::integrators::{self, ButcherTableau, FixedPointConfig, StrangConfig};
use crate::linalg;
use crate::model::Model;
use crate::quantization::{render_field, BasisSet};
use crate::scenarios::ScenarioSpec;
use crate::state::checkpoint::{read_checkpoint, write_checkpoint};
use crate::state::{truncated_eig, MatrixState, SkewHermitianState, SpectralFactorization};

/// Version of the JSON configuration schema understood by this build.
pub const SCHEMA_VERSION: u32 = 1;

/// Largest tolerated `‖U*U − I‖_F` before a run is aborted.
pub const FRAME_DRIFT_LIMIT: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntegratorKind {
    /// Dense isospectral midpoint scheme.
    Iso2,
    /// RK-MK with the explicit Euler tableau on `U` (fixed `S₀`).
    Rkmk1,
    /// RK-MK with Heun's tableau on `U` (fixed `S₀`).
    Rkmk2,
    /// Implicit midpoint on `U` (fixed `S₀`).
    Midpoint,
    /// Strang splitting with time-dependent `S`.
    Strang,
    /// Classical RK4 on the dense equation (reference only; not structure preserving).
    Rk4,
}

impl IntegratorKind {
    pub fn name(self) -> &'static str {
        match self {
            IntegratorKind::Iso2 => "iso2",
            IntegratorKind::Rkmk1 => "rkmk1",
            IntegratorKind::Rkmk2 => "rkmk2",
            IntegratorKind::Midpoint => "midpoint",
            IntegratorKind::Strang => "strang",
            IntegratorKind::Rk4 => "rk4",
        }
    }

    pub fn is_factored(self) -> bool {
        matches!(self, IntegratorKind::Rkmk1 | IntegratorKind::Rkmk2 | IntegratorKind::Midpoint | IntegratorKind::Strang)
    }
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}

fn default_diag_every() -> usize {
    1
}

fn default_k_max() -> usize {
    DEFAULT_K_MAX
}

fn default_grid() -> [usize; 2] {
    [65, 128]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub scenario: ScenarioSpec,
    /// Must equal `scenario.N` when given.
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Rank of the initial approximation; defaults to `N`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_trunc: Option<usize>,
    pub dt: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub integrator: IntegratorKind,
    #[serde(default)]
    pub fixed_point: FixedPointConfig,
    #[serde(default = "default_diag_every")]
    pub diag_every: usize,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Checkpoint of a reference state at time `T`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub snapshot_times: Vec<f64>,
    /// `[n_theta, n_phi]` of field snapshots.
    #[serde(default = "default_grid")]
    pub field_grid: [usize; 2],
}

impl RunConfig {
    pub fn new(scenario: ScenarioSpec, integrator: IntegratorKind, dt: f64, t_final: f64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            scenario,
            n: None,
            r: None,
            n_trunc: None,
            dt,
            t_final,
            integrator,
            fixed_point: FixedPointConfig::default(),
            diag_every: 1,
            k_max: DEFAULT_K_MAX,
            output_dir: None,
            reference: None,
            snapshot_times: Vec::new(),
            field_grid: default_grid(),
        }
    }

    pub fn n(&self) -> usize {
        self.scenario.n
    }

    pub fn rank(&self) -> usize {
        self.r.unwrap_or(self.scenario.n)
    }

    pub fn validate(&self) -> Result<()> {
        check_schema(self.schema_version)?;
        self.scenario.validate()?;
        let n = self.n();
        if let Some(m) = self.n {
            if m != n {
                return Err(Error::Config(format!("N = {m} disagrees with scenario N = {n}")));
            }
        }
        let r = self.rank();
        if r == 0 || r > n {
            return Err(Error::Config(format!("r = {r} outside 1..={n}")));
        }
        if let Some(t) = self.n_trunc {
            if t == 0 || t >= n {
                return Err(Error::Config(format!("n-trunc = {t} outside 1..={}", n - 1)));
            }
        }
        step_count(self.dt, self.t_final)?;
        self.fixed_point.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.diag_every == 0 || self.k_max == 0 {
            return Err(Error::Config("diag-every and k-max must be at least 1".into()));
        }
        if self.snapshot_times.iter().any(|&t| !(0.0..=self.t_final * (1.0 + 1e-12)).contains(&t)) {
            return Err(Error::Config("snapshot times must lie in [0, T]".into()));
        }
        if self.field_grid[0] < 2 || self.field_grid[1] < 1 {
            return Err(Error::Config("field grid needs n_theta >= 2 and n_phi >= 1".into()));
        }
        Ok(())
    }
}

pub(crate) fn check_schema(v: u32) -> Result<()> {
    if v != SCHEMA_VERSION {
        return Err(Error::Config(format!("unsupported schema-version {v} (this build reads {SCHEMA_VERSION})")));
    }
    Ok(())
}

/// Number of steps `T / Δt`; `T` must be a whole multiple of `Δt`.
pub fn step_count(dt: f64, t_final: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) || !(t_final >= dt && t_final.is_finite()) {
        return Err(Error::Config(format!("need dt > 0 and T >= dt (got dt = {dt}, T = {t_final})")));
    }
    let steps = (t_final / dt).round();
    if (steps * dt - t_final).abs() > 1e-9 * t_final {
        return Err(Error::Config(format!("T = {t_final} is not a multiple of dt = {dt}")));
    }
    Ok(steps as usize)
}

/// Initial state for an integrator: dense `W₀` (or its best rank-`r`
/// approximation) for the dense schemes, spectral factors otherwise.
pub fn initial_state(w0: &SkewHermitianState, kind: IntegratorKind, r: usize) -> Result<MatrixState> {
    let n = w0.n();
    if kind.is_factored() {
        return Ok(MatrixState::Factored(truncated_eig(w0, r)?));
    }
    if r == n {
        Ok(MatrixState::Dense(w0.clone()))
    } else {
        Ok(MatrixState::Dense(truncated_eig(w0, r)?.reconstruct()))
    }
}

/// Advances one state with one scheme.
pub struct Stepper {
    model: Model,
    kind: IntegratorKind,
    fixed_point: FixedPointConfig,
    strang: StrangConfig,
    state: MatrixState,
    pub fixed_point_iterations: usize,
}

impl Stepper {
    pub fn new(model: Model, kind: IntegratorKind, fixed_point: FixedPointConfig, state: MatrixState) -> Result<Self> {
        if state.n() != model.n() {
            return Err(Error::shape(format!("N = {}", model.n()), format!("N = {}", state.n())));
        }
        if kind.is_factored() != matches!(state, MatrixState::Factored(_)) {
            return Err(Error::Config(format!("{} needs a {} state", kind.name(), if kind.is_factored() { "factored" } else { "dense" })));
        }
        Ok(Self {
            model,
            kind,
            fixed_point,
            strang: StrangConfig {
                tableau: ButcherTableau::heun(),
                fixed_point,
            },
            state,
            fixed_point_iterations: 0,
        })
    }

    pub fn state(&self) -> &MatrixState {
        &self.state
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn into_state(self) -> MatrixState {
        self.state
    }

    pub fn step(&mut self, dt: f64) -> Result<()> {
        let m = &self.model;
        let next = match (&self.state, self.kind) {
            (MatrixState::Dense(w), IntegratorKind::Iso2) => {
                let (w, rep) = integrators::iso2_step(m, w, dt, &self.fixed_point)?;
                self.fixed_point_iterations += rep.n_fixed_point_iters;
                MatrixState::Dense(w)
            }
            (MatrixState::Dense(w), IntegratorKind::Rk4) => MatrixState::Dense(integrators::rk4_step(m, w, dt)?),
            (MatrixState::Factored(f), IntegratorKind::Rkmk1 | IntegratorKind::Rkmk2) => {
                let tableau = if self.kind == IntegratorKind::Rkmk1 { ButcherTableau::euler() } else { ButcherTableau::heun() };
                let u = integrators::rkmk_step(m, &f.u.view(), &f.s.view(), dt, &tableau)?;
                factored(u, f.s.clone())?
            }
            (MatrixState::Factored(f), IntegratorKind::Midpoint) => {
                let (u, rep) = integrators::midpoint_stiefel_step(m, &f.u.view(), &f.s.view(), dt, &self.fixed_point)?;
                self.fixed_point_iterations += rep.n_fixed_point_iters;
                factored(u, f.s.clone())?
            }
            (MatrixState::Factored(f), IntegratorKind::Strang) => {
                let (g, rep) = integrators::strang_step(m, f, dt, &self.strang)?;
                self.fixed_point_iterations += rep.n_fixed_point_iters;
                check_frame(&g.u)?;
                MatrixState::Factored(g)
            }
            _ => unreachable!("state kind checked in Stepper::new"),
        };
        self.state = next;
        Ok(())
    }
}

fn check_frame(u: &linalg::CMat) -> Result<()> {
    let drift = linalg::orthonormality_defect(&u.view());
    if !(drift <= FRAME_DRIFT_LIMIT) {
        return Err(Error::Internal(format!("frame lost orthonormality (‖U*U − I‖ = {drift:e})")));
    }
    Ok(())
}

fn factored(u: linalg::CMat, s: linalg::CMat) -> Result<MatrixState> {
    check_frame(&u)?;
    Ok(MatrixState::Factored(SpectralFactorization::from_trusted(u, s)))
}

/// Paths and headline numbers of a finished `simulate` run.
#[derive(Clone, Debug)]
pub struct SimulateSummary {
    pub csv: PathBuf,
    pub checkpoint: PathBuf,
    pub manifest: PathBuf,
    pub snapshots: Vec<PathBuf>,
    pub steps: usize,
    pub final_state: MatrixState,
    pub records: Vec<DiagnosticsRecord>,
    pub fixed_point_iterations: usize,
    pub wall_time: Duration,
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

/// Integrates the configured scenario and writes diagnostics, the final
/// checkpoint, optional field snapshots and a manifest into `out_dir`.
pub fn run_simulate(cfg: &RunConfig, out_dir: &Path) -> Result<SimulateSummary> {
    cfg.validate()?;
    ensure_dir(out_dir)?;
    let start = Instant::now();
    let n = cfg.n();
    let steps = step_count(cfg.dt, cfg.t_final)?;
    let hash = cfg.scenario.canonical_hash();
    let tag = &hash[..12];

    let w0 = cfg.scenario.build()?;
    let model = Model::truncated(n, cfg.n_trunc)?;
    let state = initial_state(&w0, cfg.integrator, cfg.rank())?;
    let reference = match &cfg.reference {
        Some(p) => {
            let (h, s) = read_checkpoint(p)?;
            if h.n != n {
                return Err(Error::Config(format!("reference has N = {}, run has N = {n}", h.n)));
            }
            if let Some(t) = h.time {
                if (t - cfg.t_final).abs() > 1e-9 * cfg.t_final.max(1.0) {
                    return Err(Error::Config(format!("reference is at t = {t}, run ends at T = {}", cfg.t_final)));
                }
            }
            Some(s)
        }
        None => None,
    };

    let initial_spectrum = crate::diagnostics::spectrum_of(&state)?;
    let mut stepper = Stepper::new(model, cfg.integrator, cfg.fixed_point, state)?;

    let csv_path = out_dir.join(format!("diagnostics-{tag}.csv"));
    let mut csv = CsvWriter::new(BufWriter::new(File::create(&csv_path)?), cfg.k_max)?;
    let mut records = Vec::new();

    let mut snapshot_steps: Vec<(usize, f64)> = cfg
        .snapshot_times
        .iter()
        .map(|&t| ((t / cfg.dt).round() as usize, t))
        .collect();
    snapshot_steps.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let basis = if snapshot_steps.is_empty() { None } else { Some(BasisSet::new(n)?) };
    let mut snapshots = Vec::new();

    let mut record = |k: usize, stepper: &Stepper, csv: &mut CsvWriter<_>| -> Result<()> {
        let t = k as f64 * cfg.dt;
        let refs = if k == steps { reference.as_ref() } else { None };
        let rec = DiagnosticsRecord::compute(stepper.model(), stepper.state(), t, cfg.k_max, &initial_spectrum, refs, start.elapsed())?;
        csv.write(&rec)?;
        records.push(rec);
        Ok(())
    };
    let mut snapshot = |k: usize, stepper: &Stepper| -> Result<()> {
        for &(_, t) in snapshot_steps.iter().filter(|(s, _)| *s == k) {
            let dense = stepper.state().to_dense();
            let grid = render_field(basis.as_ref().expect("basis built"), &dense, cfg.field_grid[0], cfg.field_grid[1])?;
            let path = out_dir.join(format!("field-{tag}-t{:.6}.bin", t));
            io::write_field_grid(&path, &grid, t, n)?;
            snapshots.push(path);
        }
        Ok(())
    };

    record(0, &stepper, &mut csv)?;
    snapshot(0, &stepper)?;
    for k in 1..=steps {
        stepper.step(cfg.dt)?;
        if k % cfg.diag_every == 0 || k == steps {
            record(k, &stepper, &mut csv)?;
        }
        snapshot(k, &stepper)?;
    }
    csv.into_inner()?;

    let ckpt_path = out_dir.join(format!("final-{tag}.ckpt"));
    write_checkpoint(&ckpt_path, stepper.state(), &hash, Some(steps as f64 * cfg.dt))?;

    let mut manifest = io::Manifest::new("simulate", cfg)?;
    manifest.add_output(out_dir, &csv_path)?;
    manifest.add_output(out_dir, &ckpt_path)?;
    for p in &snapshots {
        manifest.add_output(out_dir, p)?;
    }
    let manifest_path = manifest.write(out_dir)?;
    log::info!("simulate: {steps} steps of {} in {:.3} s", cfg.integrator.name(), start.elapsed().as_secs_f64());

    let fixed_point_iterations = stepper.fixed_point_iterations;
    Ok(SimulateSummary {
        csv: csv_path,
        checkpoint: ckpt_path,
        manifest: manifest_path,
        snapshots,
        steps,
        final_state: stepper.into_state(),
        records,
        fixed_point_iterations,
        wall_time: start.elapsed(),
    })
}

/// Integrates `state` for `steps` steps without writing anything.
pub fn integrate(model: &Model, kind: IntegratorKind, fp: FixedPointConfig, state: MatrixState, dt: f64, steps: usize) -> Result<MatrixState> {
    let mut s = Stepper::new(model.clone(), kind, fp, state)?;
    for _ in 0..steps {
        s.step(dt)?;
    }
    Ok(s.into_state())
}

/// Caps BLAS threads; `None` leaves the library default.
pub fn set_blas_threads(n: Option<usize>) {
    extern "C" {
        fn openblas_set_num_threads(num: std::os::raw::c_int);
    }
    if let Some(n) = n {
        let n = n.clamp(1, i32::MAX as usize) as std::os::raw::c_int;
        // SAFETY: plain setter exported by the linked OpenBLAS.
        unsafe { openblas_set_num_threads(n) };
    }
}

/// Least-squares fit of `ln y = a + b ln x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_loglog(x: &[f64], y: &[f64]) -> Option<LogLogFit> {
    if x.len() != y.len() || x.len() < 2 || x.iter().chain(y).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let m = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / m, ly.iter().sum::<f64>() / m);
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = ly.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LogLogFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}
