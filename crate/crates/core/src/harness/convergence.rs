//! Error-versus-step-size studies against a fine dense reference.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{check_schema, default_schema, fit_loglog, initial_state, integrate, io, reference_solution, step_count, IntegratorKind, LogLogFit, ReferenceSpec};
use crate::diagnostics::frobenius_error;
use crate::error::{Error, Result};
use crate::integrators::FixedPointConfig;
use crate::model::Model;
use crate::scenarios::ScenarioSpec;
use crate::state::checkpoint::read_checkpoint;
use crate::state::MatrixState;

/// Errors below this fraction of `‖W_ref‖_F` are treated as roundoff.
pub const ROUNDOFF_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ConvergenceConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub scenario: ScenarioSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_trunc: Option<usize>,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub dts: Vec<f64>,
    pub integrators: Vec<IntegratorKind>,
    /// Defaults to `min(dts) / 100`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_dt: Option<f64>,
    /// Precomputed reference checkpoint at `T`; replaces the RK4 run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<PathBuf>,
    #[serde(default)]
    pub fixed_point: FixedPointConfig,
}

impl ConvergenceConfig {
    pub fn new(scenario: ScenarioSpec, t_final: f64, dts: Vec<f64>, integrators: Vec<IntegratorKind>) -> Self {
        Self {
            schema_version: super::SCHEMA_VERSION,
            scenario,
            r: None,
            n_trunc: None,
            t_final,
            dts,
            integrators,
            reference_dt: None,
            reference: None,
            fixed_point: FixedPointConfig::default(),
        }
    }

    fn dt_ref(&self) -> f64 {
        self.reference_dt.unwrap_or_else(|| self.dts.iter().copied().fold(f64::INFINITY, f64::min) / 100.0)
    }

    pub fn validate(&self) -> Result<()> {
        check_schema(self.schema_version)?;
        self.scenario.validate()?;
        let n = self.scenario.n;
        let r = self.r.unwrap_or(n);
        if r == 0 || r > n {
            return Err(Error::Config(format!("r = {r} outside 1..={n}")));
        }
        if self.dts.len() < 3 {
            return Err(Error::Config("a convergence study needs at least 3 step sizes".into()));
        }
        if self.integrators.is_empty() {
            return Err(Error::Config("no integrators selected".into()));
        }
        for &dt in &self.dts {
            step_count(dt, self.t_final)?;
        }
        if self.reference.is_none() {
            step_count(self.dt_ref(), self.t_final)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub integrator: IntegratorKind,
    pub dt: f64,
    pub error: f64,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderFit {
    pub integrator: IntegratorKind,
    /// `None` when every error sits at roundoff level.
    pub fit: Option<LogLogFit>,
}

#[derive(Clone, Debug)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    pub orders: Vec<OrderFit>,
    pub reference_norm: f64,
    pub csv: Option<PathBuf>,
}

impl ConvergenceReport {
    pub fn slope(&self, kind: IntegratorKind) -> Option<f64> {
        self.orders.iter().find(|o| o.integrator == kind).and_then(|o| o.fit.map(|f| f.slope))
    }

    pub fn errors(&self, kind: IntegratorKind) -> Vec<(f64, f64)> {
        self.rows.iter().filter(|r| r.integrator == kind).map(|r| (r.dt, r.error)).collect()
    }
}

/// Runs every integrator at every step size and fits the observed orders.
/// With `out_dir` it writes `convergence.csv`, `orders.json`, the reference
/// cache and a manifest.
pub fn run_convergence(cfg: &ConvergenceConfig, out_dir: Option<&Path>) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let n = cfg.scenario.n;
    let r = cfg.r.unwrap_or(n);
    let reference = match &cfg.reference {
        Some(p) => read_checkpoint(p)?.1.to_dense(),
        None => {
            let spec = ReferenceSpec {
                scenario: cfg.scenario.clone(),
                n_trunc: cfg.n_trunc,
                dt: cfg.dt_ref(),
                t_final: cfg.t_final,
            };
            reference_solution(&spec, out_dir.map(|d| d.join("reference")).as_deref())?
        }
    };
    if reference.n() != n {
        return Err(Error::Config(format!("reference has N = {}, scenario has N = {n}", reference.n())));
    }
    let reference_norm = reference.frobenius_norm();
    let reference = MatrixState::Dense(reference);

    let model = Model::truncated(n, cfg.n_trunc)?;
    let w0 = cfg.scenario.build()?;
    let mut rows = Vec::new();
    for &kind in &cfg.integrators {
        let start_state = initial_state(&w0, kind, r)?;
        for &dt in &cfg.dts {
            let start = Instant::now();
            let fin = integrate(&model, kind, cfg.fixed_point, start_state.clone(), dt, step_count(dt, cfg.t_final)?)?;
            let wall_ms = start.elapsed().as_secs_f64() * 1e3;
            let error = frobenius_error(&fin, &reference)?;
            log::info!("{} dt={dt:e}: error {error:e}", kind.name());
            rows.push(ConvergenceRow {
                integrator: kind,
                dt,
                error,
                wall_ms,
            });
        }
    }

    let floor = ROUNDOFF_FLOOR * reference_norm.max(1.0);
    let orders = cfg
        .integrators
        .iter()
        .map(|&kind| {
            let (x, y): (Vec<f64>, Vec<f64>) = rows.iter().filter(|r| r.integrator == kind).map(|r| (r.dt, r.error)).unzip();
            let fit = if y.iter().all(|&e| e <= floor) { None } else { fit_loglog(&x, &y) };
            OrderFit { integrator: kind, fit }
        })
        .collect();

    let mut report = ConvergenceReport {
        rows,
        orders,
        reference_norm,
        csv: None,
    };
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        let csv = dir.join("convergence.csv");
        let mut f = BufWriter::new(File::create(&csv)?);
        writeln!(f, "integrator,dt,error,wall_ms")?;
        for r in &report.rows {
            writeln!(f, "{},{:e},{:e},{:.3}", r.integrator.name(), r.dt, r.error, r.wall_ms)?;
        }
        f.flush()?;
        drop(f);
        let orders = dir.join("orders.json");
        std::fs::write(&orders, serde_json::to_vec_pretty(&report.orders)?)?;
        let mut m = io::Manifest::new("convergence", cfg)?;
        m.add_output(dir, &csv)?;
        m.add_output(dir, &orders)?;
        m.write(dir)?;
        report.csv = Some(csv);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::ScenarioKind;

    #[test]
    fn stationary_state_reports_no_slope() {
        let mut sc = ScenarioSpec::random_spectrum(6, 1);
        sc.kind = ScenarioKind::Diagonal;
        sc.spectrum_range = [0.01, 1.0];
        let cfg = ConvergenceConfig::new(sc, 0.4, vec![0.1, 0.2, 0.4], vec![IntegratorKind::Iso2, IntegratorKind::Rkmk2]);
        let rep = run_convergence(&cfg, None).unwrap();
        assert!(rep.rows.iter().all(|r| r.error < 1e-12 * rep.reference_norm.max(1.0)));
        assert_eq!(rep.slope(IntegratorKind::Iso2), None);
        assert_eq!(rep.slope(IntegratorKind::Rkmk2), None);
    }

    #[test]
    fn too_few_step_sizes_is_a_config_error() {
        let cfg = ConvergenceConfig::new(ScenarioSpec::random_spectrum(4, 1), 1.0, vec![0.1, 0.2], vec![IntegratorKind::Iso2]);
        assert!(matches!(run_convergence(&cfg, None), Err(Error::Config(_))));
    }
}
