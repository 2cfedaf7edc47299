//! The vortex-blob comparison: dense Iso2 against the two low-rank models.

use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{check_schema, default_schema, initial_state, io, reference_solution, step_count, IntegratorKind, ReferenceSpec, Stepper};
use crate::diagnostics::{casimirs_of, frobenius_error, hamiltonian_of, DEFAULT_K_MAX};
use crate::error::{Error, Result};
use crate::integrators::FixedPointConfig;
use crate::model::Model;
use crate::scenarios::{ScenarioKind, ScenarioSpec};
use crate::state::MatrixState;

fn default_rank() -> usize {
    4
}

fn default_diag_every() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct BlobsConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub scenario: ScenarioSpec,
    #[serde(default = "default_rank")]
    pub r: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_trunc: Option<usize>,
    pub dt: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
    /// Defaults to `dt / 100`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_dt: Option<f64>,
    #[serde(default)]
    pub fixed_point: FixedPointConfig,
    #[serde(default = "default_diag_every")]
    pub diag_every: usize,
}

impl BlobsConfig {
    pub fn new(n: usize, seed: u64, dt: f64, t_final: f64) -> Self {
        Self {
            schema_version: super::SCHEMA_VERSION,
            scenario: ScenarioSpec::vortex_blobs(n, seed),
            r: default_rank(),
            n_trunc: None,
            dt,
            t_final,
            reference_dt: None,
            fixed_point: FixedPointConfig::default(),
            diag_every: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_schema(self.schema_version)?;
        self.scenario.validate()?;
        if self.scenario.kind != ScenarioKind::VortexBlobs {
            return Err(Error::Config("blobs needs a vortex-blobs scenario".into()));
        }
        if self.r == 0 || self.r > self.scenario.n {
            return Err(Error::Config(format!("r = {} outside 1..={}", self.r, self.scenario.n)));
        }
        if self.diag_every == 0 {
            return Err(Error::Config("diag-every must be at least 1".into()));
        }
        step_count(self.dt, self.t_final)?;
        step_count(self.reference_dt.unwrap_or(self.dt / 100.0), self.t_final)?;
        Ok(())
    }
}

/// One column of the comparison table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlobColumn {
    pub label: String,
    pub integrator: IntegratorKind,
    /// `‖W_ref(T) − Ω(T)‖_F`.
    pub final_error: f64,
    /// `N/(4π) · max_τ |H(W₀) − H(Ω(t_τ))|`.
    pub hamiltonian_error: f64,
    /// `max_{τ,k} |C_k(Ω(t_τ)) − C_k(Ω(0))| / max(|C_k(Ω(0))|, 1)`.
    pub casimir_drift: f64,
    pub runtime_s: f64,
    #[serde(skip)]
    pub final_state: Option<MatrixState>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BlobsReport {
    pub columns: Vec<BlobColumn>,
    /// `‖Y_rkmk2(T) − W_iso2(T)‖_F`.
    pub lowrank_dense_gap: f64,
}

impl BlobsReport {
    pub fn column(&self, kind: IntegratorKind) -> &BlobColumn {
        self.columns.iter().find(|c| c.integrator == kind).expect("column present")
    }

    pub fn table_csv(&self) -> String {
        let mut s = String::from("quantity");
        for c in &self.columns {
            s.push(',');
            s.push_str(&c.label);
        }
        s.push('\n');
        type Getter = fn(&BlobColumn) -> f64;
        let rows: [(&str, Getter); 4] = [
            ("final_frobenius_error", |c| c.final_error),
            ("max_normalized_hamiltonian_error", |c| c.hamiltonian_error),
            ("max_casimir_drift", |c| c.casimir_drift),
            ("runtime_s", |c| c.runtime_s),
        ];
        for (name, get) in rows {
            s.push_str(name);
            for c in &self.columns {
                s.push_str(&format!(",{:e}", get(c)));
            }
            s.push('\n');
        }
        s
    }
}

fn run_column(cfg: &BlobsConfig, model: &Model, label: String, kind: IntegratorKind, reference: &MatrixState) -> Result<BlobColumn> {
    let w0 = cfg.scenario.build()?;
    let n = w0.n();
    let r = if kind.is_factored() { cfg.r } else { n };
    let steps = step_count(cfg.dt, cfg.t_final)?;
    let start = Instant::now();
    let state = initial_state(&w0, kind, r)?;
    let h0 = hamiltonian_of(model, &MatrixState::Dense(w0))?;
    let c0 = casimirs_of(&state, DEFAULT_K_MAX)?;
    let mut stepper = Stepper::new(model.clone(), kind, cfg.fixed_point, state)?;
    let (mut h_err, mut c_drift) = (0.0f64, 0.0f64);
    for k in 1..=steps {
        stepper.step(cfg.dt)?;
        if k % cfg.diag_every == 0 || k == steps {
            h_err = h_err.max((hamiltonian_of(model, stepper.state())? - h0).abs());
            for (a, b) in casimirs_of(stepper.state(), DEFAULT_K_MAX)?.iter().zip(&c0) {
                c_drift = c_drift.max((a - b).abs() / b.abs().max(1.0));
            }
        }
    }
    let runtime_s = start.elapsed().as_secs_f64();
    let final_error = frobenius_error(stepper.state(), reference)?;
    Ok(BlobColumn {
        label,
        integrator: kind,
        final_error,
        hamiltonian_error: n as f64 / (4.0 * std::f64::consts::PI) * h_err,
        casimir_drift: c_drift,
        runtime_s,
        final_state: Some(stepper.into_state()),
    })
}

/// Runs the three columns and, with `out_dir`, writes `table1.csv`,
/// `blobs.json` and a manifest.
pub fn run_blobs(cfg: &BlobsConfig, out_dir: Option<&Path>) -> Result<BlobsReport> {
    cfg.validate()?;
    let model = Model::truncated(cfg.scenario.n, cfg.n_trunc)?;
    let spec = ReferenceSpec {
        scenario: cfg.scenario.clone(),
        n_trunc: cfg.n_trunc,
        dt: cfg.reference_dt.unwrap_or(cfg.dt / 100.0),
        t_final: cfg.t_final,
    };
    let reference = MatrixState::Dense(reference_solution(&spec, out_dir.map(|d| d.join("reference")).as_deref())?);

    let r = cfg.r;
    let columns = vec![
        run_column(cfg, &model, "Zeitlin with Iso2".into(), IntegratorKind::Iso2, &reference)?,
        run_column(cfg, &model, format!("Rec({r}) with S0"), IntegratorKind::Rkmk2, &reference)?,
        run_column(cfg, &model, format!("Rec({r}) with S(t)"), IntegratorKind::Strang, &reference)?,
    ];
    let lowrank_dense_gap = frobenius_error(columns[1].final_state.as_ref().expect("kept"), columns[0].final_state.as_ref().expect("kept"))?;
    let report = BlobsReport { columns, lowrank_dense_gap };

    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        let table = dir.join("table1.csv");
        fs::write(&table, report.table_csv())?;
        let json = dir.join("blobs.json");
        fs::write(&json, serde_json::to_vec_pretty(&report)?)?;
        let mut m = io::Manifest::new("blobs", cfg)?;
        m.add_output(dir, &table)?;
        m.add_output(dir, &json)?;
        m.write(dir)?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_blob_table_has_three_columns() {
        let mut cfg = BlobsConfig::new(8, 5, 0.01, 0.05);
        cfg.scenario.amplitude = 1.0;
        let dir = tempfile::tempdir().unwrap();
        let rep = run_blobs(&cfg, Some(dir.path())).unwrap();
        let text = fs::read_to_string(dir.path().join("table1.csv")).unwrap();
        assert_eq!(text.lines().next().unwrap(), "quantity,Zeitlin with Iso2,Rec(4) with S0,Rec(4) with S(t)");
        assert_eq!(text.lines().count(), 5);
        assert!(rep.columns[1].casimir_drift < 1e-10);
        assert!(rep.lowrank_dense_gap.is_finite());
    }

    #[test]
    fn rejects_other_scenarios() {
        let mut cfg = BlobsConfig::new(8, 5, 0.01, 0.05);
        cfg.scenario.kind = ScenarioKind::RandomSpectrum;
        assert!(matches!(run_blobs(&cfg, None), Err(Error::Config(_))));
    }
}
