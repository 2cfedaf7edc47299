use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{integrate, io, step_count, IntegratorKind};
use crate::error::Result;
use crate::integrators::FixedPointConfig;
use crate::model::Model;
use crate::scenarios::ScenarioSpec;
use crate::state::checkpoint::{read_checkpoint, write_checkpoint};
use crate::state::{MatrixState, SkewHermitianState};

/// Everything that determines a dense RK4 reference trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ReferenceSpec {
    pub scenario: ScenarioSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_trunc: Option<usize>,
    pub dt: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
}

impl ReferenceSpec {
    pub fn key(&self) -> Result<String> {
        io::json_hash(self)
    }
}

/// Dense RK4 solution at `T`. With a cache directory the checkpoint is
/// reused when its sidecar records the same key, and written otherwise.
pub fn reference_solution(spec: &ReferenceSpec, cache: Option<&Path>) -> Result<SkewHermitianState> {
    let key = spec.key()?;
    let tag = &key[..16];
    if let Some(dir) = cache {
        let ckpt = dir.join(format!("reference-{tag}.ckpt"));
        let side = dir.join(format!("reference-{tag}.json"));
        if ckpt.exists() && side.exists() {
            let recorded: serde_json::Value = serde_json::from_slice(&fs::read(&side)?)?;
            if recorded.get("input_hash").and_then(|v| v.as_str()) == Some(key.as_str()) {
                let (_, state) = read_checkpoint(&ckpt)?;
                log::info!("reusing reference {}", ckpt.display());
                return Ok(state.to_dense());
            }
        }
    }

    let steps = step_count(spec.dt, spec.t_final)?;
    let model = Model::truncated(spec.scenario.n, spec.n_trunc)?;
    let w0 = spec.scenario.build()?;
    let out = integrate(&model, IntegratorKind::Rk4, FixedPointConfig::default(), MatrixState::Dense(w0), spec.dt, steps)?;

    if let Some(dir) = cache {
        fs::create_dir_all(dir)?;
        let ckpt = dir.join(format!("reference-{tag}.ckpt"));
        write_checkpoint(&ckpt, &out, &spec.scenario.canonical_hash(), Some(spec.t_final))?;
        let mut manifest = io::Manifest::new("reference", spec)?;
        manifest.add_output(dir, &ckpt)?;
        fs::write(dir.join(format!("reference-{tag}.json")), serde_json::to_vec_pretty(&manifest)?)?;
    }
    Ok(out.to_dense())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cache_is_reused_only_for_matching_key() {
        let dir = tempfile::tempdir().unwrap();
        let mut scenario = ScenarioSpec::random_spectrum(4, 2);
        scenario.spectrum_range = [0.1, 1.0];
        let spec = ReferenceSpec {
            scenario,
            n_trunc: None,
            dt: 0.01,
            t_final: 0.05,
        };
        let a = reference_solution(&spec, Some(dir.path())).unwrap();
        let b = reference_solution(&spec, Some(dir.path())).unwrap();
        assert_eq!(a, b);
        let mut other = spec.clone();
        other.dt = 0.005;
        assert_ne!(other.key().unwrap(), spec.key().unwrap());
        let c = reference_solution(&other, Some(dir.path())).unwrap();
        assert!(crate::diagnostics::dense_error(&a, &c) < 1e-8);
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 4);
    }
}
