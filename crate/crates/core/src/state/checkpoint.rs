//! Checkpoint container.
//!
//! Layout: one line of compact UTF-8 JSON (the header) terminated by `\n`,
//! followed by the raw payload as little-endian `f64` pairs `(re, im)` in
//! row-major order. A dense checkpoint carries the `N × N` matrix; a
//! factored one carries `U` (`N × r`) then `S` (`r × r`).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{MatrixState, SkewHermitianState, SpectralFactorization};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};

pub const FORMAT_NAME: &str = "zeitlin-checkpoint";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckpointKind {
    Dense,
    Factored,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format: String,
    pub version: u32,
    pub kind: CheckpointKind,
    #[serde(rename = "N")]
    pub n: usize,
    pub r: usize,
    pub dtype: String,
    pub layout: String,
    pub created_at: String,
    pub scenario_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<f64>,
}

impl CheckpointHeader {
    pub fn for_state(state: &MatrixState, scenario_hash: &str, time: Option<f64>) -> Self {
        let (kind, r) = match state {
            MatrixState::Dense(w) => (CheckpointKind::Dense, w.n()),
            MatrixState::Factored(f) => (CheckpointKind::Factored, f.rank()),
        };
        Self {
            format: FORMAT_NAME.to_string(),
            version: FORMAT_VERSION,
            kind,
            n: state.n(),
            r,
            dtype: "complex128".to_string(),
            layout: "row-major".to_string(),
            created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            scenario_hash: scenario_hash.to_string(),
            time,
        }
    }
}

pub fn write_checkpoint(path: &Path, state: &MatrixState, scenario_hash: &str, time: Option<f64>) -> Result<CheckpointHeader> {
    let header = CheckpointHeader::for_state(state, scenario_hash, time);
    let mut out = BufWriter::new(File::create(path)?);
    write_to(&mut out, &header, state)?;
    out.flush()?;
    Ok(header)
}

pub fn read_checkpoint(path: &Path) -> Result<(CheckpointHeader, MatrixState)> {
    let mut input = BufReader::new(File::open(path)?);
    read_from(&mut input)
}

/// Reads only the header line.
pub fn read_header(path: &Path) -> Result<CheckpointHeader> {
    let mut input = BufReader::new(File::open(path)?);
    read_header_from(&mut input)
}

pub fn write_to<W: Write>(out: &mut W, header: &CheckpointHeader, state: &MatrixState) -> Result<()> {
    serde_json::to_writer(&mut *out, header)?;
    out.write_all(b"\n")?;
    match state {
        MatrixState::Dense(w) => write_matrix(out, w.matrix())?,
        MatrixState::Factored(f) => {
            write_matrix(out, &f.u)?;
            write_matrix(out, &f.s)?;
        }
    }
    Ok(())
}

pub fn read_from<R: BufRead>(input: &mut R) -> Result<(CheckpointHeader, MatrixState)> {
    let header = read_header_from(input)?;
    let (n, r) = (header.n, header.r);
    let state = match header.kind {
        CheckpointKind::Dense => {
            let w = read_matrix(input, n, n)?;
            MatrixState::Dense(
                SkewHermitianState::new(w).map_err(|e| Error::Format(format!("dense payload: {e}")))?,
            )
        }
        CheckpointKind::Factored => {
            if r == 0 || r > n {
                return Err(Error::Format(format!("factored checkpoint with r = {r}, N = {n}")));
            }
            let u = read_matrix(input, n, r)?;
            let s = read_matrix(input, r, r)?;
            let drift = linalg::orthonormality_defect(&u.view());
            if drift > 1e-8 {
                return Err(Error::Format(format!("frame is not orthonormal (drift {drift:e})")));
            }
            MatrixState::Factored(SpectralFactorization::from_trusted(u, s))
        }
    };
    let mut rest = [0u8; 1];
    if input.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after payload".into()));
    }
    Ok((header, state))
}

fn read_header_from<R: BufRead>(input: &mut R) -> Result<CheckpointHeader> {
    let mut line = Vec::new();
    input.read_until(b'\n', &mut line)?;
    if line.last() != Some(&b'\n') {
        return Err(Error::Format("missing header line".into()));
    }
    line.pop();
    let header: CheckpointHeader =
        serde_json::from_slice(&line).map_err(|e| Error::Format(format!("header: {e}")))?;
    if header.format != FORMAT_NAME || header.version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported container {} v{}", header.format, header.version)));
    }
    if header.dtype != "complex128" || header.layout != "row-major" {
        return Err(Error::Format(format!("unsupported dtype/layout {}/{}", header.dtype, header.layout)));
    }
    Ok(header)
}

fn write_matrix<W: Write>(out: &mut W, m: &CMat) -> Result<()> {
    let (rows, cols) = m.dim();
    let mut buf = Vec::with_capacity(rows * cols * 16);
    for i in 0..rows {
        for j in 0..cols {
            let z = m[[i, j]];
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    out.write_all(&buf)?;
    Ok(())
}

fn read_matrix<R: Read>(input: &mut R, rows: usize, cols: usize) -> Result<CMat> {
    let mut buf = vec![0u8; rows * cols * 16];
    input
        .read_exact(&mut buf)
        .map_err(|e| Error::Format(format!("truncated payload: {e}")))?;
    let data: Vec<C64> = buf
        .chunks_exact(16)
        .map(|ch| {
            let re = f64::from_le_bytes(ch[..8].try_into().expect("8-byte slice"));
            let im = f64::from_le_bytes(ch[8..].try_into().expect("8-byte slice"));
            C64::new(re, im)
        })
        .collect();
    CMat::from_shape_vec((rows, cols), data).map_err(|e| Error::Internal(e.to_string()))
}
