//! Run artifacts: manifests, content hashes and field-grid files.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::quantization::FieldGrid;

pub const FIELD_FORMAT: &str = "zeitlin-field";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of the canonical JSON form of any serializable value.
pub fn json_hash<T: Serialize>(value: &T) -> Result<String> {
    Ok(sha256_hex(&serde_json::to_vec(value)?))
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let mut hasher = Sha256::new();
    let mut f = File::open(path)?;
    let mut buf = [0u8; 1 << 16];
    loop {
        let k = f.read(&mut buf)?;
        if k == 0 {
            break;
        }
        hasher.update(&buf[..k]);
    }
    Ok(hex::encode(hasher.finalize()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Written next to every run's outputs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub created_at: String,
    /// SHA-256 of the canonical JSON of `config`.
    pub input_hash: String,
    pub config: serde_json::Value,
    pub outputs: Vec<OutputEntry>,
}

impl Manifest {
    pub fn new<T: Serialize>(command: &str, config: &T) -> Result<Self> {
        Ok(Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            created_at: chrono::Utc::now().to_rfc3339(),
            input_hash: json_hash(config)?,
            config: serde_json::to_value(config)?,
            outputs: Vec::new(),
        })
    }

    /// Records `path` (relative to `dir` in the manifest) with its hash.
    pub fn add_output(&mut self, dir: &Path, path: &Path) -> Result<()> {
        let rel = path.strip_prefix(dir).unwrap_or(path);
        self.outputs.push(OutputEntry {
            path: rel.to_string_lossy().into_owned(),
            sha256: file_sha256(path)?,
            bytes: fs::metadata(path)?.len(),
        });
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.json");
        let mut f = BufWriter::new(File::create(&path)?);
        serde_json::to_writer_pretty(&mut f, self)?;
        f.write_all(b"\n")?;
        f.flush()?;
        Ok(path)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub format: String,
    pub n_theta: usize,
    pub n_phi: usize,
    pub time: f64,
    #[serde(rename = "N")]
    pub n: usize,
}

/// JSON header line, then `n_theta · n_phi` little-endian `f64` in row-major
/// (θ-major) order.
pub fn write_field_grid(path: &Path, grid: &FieldGrid, time: f64, n: usize) -> Result<()> {
    let header = FieldHeader {
        format: FIELD_FORMAT.into(),
        n_theta: grid.n_theta,
        n_phi: grid.n_phi,
        time,
        n,
    };
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut f, &header)?;
    f.write_all(b"\n")?;
    for v in grid.values.iter() {
        f.write_all(&v.to_le_bytes())?;
    }
    f.flush()?;
    Ok(())
}

pub fn read_field_grid(path: &Path) -> Result<(FieldHeader, Vec<f64>)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut line = String::new();
    r.read_line(&mut line)?;
    let header: FieldHeader = serde_json::from_str(line.trim_end())?;
    if header.format != FIELD_FORMAT {
        return Err(Error::Format(format!("not a field grid file ({})", header.format)));
    }
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != 8 * header.n_theta * header.n_phi {
        return Err(Error::Format(format!(
            "field payload has {} bytes, expected {}",
            bytes.len(),
            8 * header.n_theta * header.n_phi
        )));
    }
    let values = bytes.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes"))).collect();
    Ok((header, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantization::{render_coefficients, CoefficientVector, HarmonicIndex};
    use crate::linalg::c;

    #[test]
    fn field_grid_round_trip() {
        let n = 5;
        let mut coeffs = CoefficientVector::zeros(n);
        coeffs.set(HarmonicIndex::new(2, 0, n).unwrap(), c(1.0, 0.0));
        let grid = render_coefficients(&coeffs, 9, 12).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.bin");
        write_field_grid(&path, &grid, 0.25, n).unwrap();
        let (h, vals) = read_field_grid(&path).unwrap();
        assert_eq!((h.n_theta, h.n_phi, h.time, h.n), (9, 12, 0.25, n));
        assert_eq!(vals, grid.values.iter().copied().collect::<Vec<_>>());
    }

    #[test]
    fn manifest_hashes_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.txt");
        fs::write(&p, b"abc").unwrap();
        let mut m = Manifest::new("test", &serde_json::json!({"x": 1})).unwrap();
        m.add_output(dir.path(), &p).unwrap();
        assert_eq!(m.outputs[0].path, "a.txt");
        assert_eq!(m.outputs[0].sha256, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        m.write(dir.path()).unwrap();
    }
}
