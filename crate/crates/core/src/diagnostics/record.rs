use std::f64::consts::PI;
use std::io::Write;
use std::time::Duration;

use crate::error::Result;
use crate::linalg::C64;
use crate::model::Model;
use crate::state::MatrixState;

use super::{casimirs_of, frobenius_error, hamiltonian_of, spectrum_of};

/// One diagnostics sample along a trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsRecord {
    pub time: f64,
    pub hamiltonian: f64,
    pub casimirs: Vec<f64>,
    /// Sorted by modulus, descending.
    pub eigenvalues: Vec<C64>,
    /// `ℓ∞` distance of `eigenvalues` from the initial spectrum.
    pub eig_drift: f64,
    pub frobenius_error_vs_reference: Option<f64>,
    pub wall_time: Duration,
}

impl DiagnosticsRecord {
    /// Samples `state`; `initial_spectrum` is the sorted spectrum at `t = 0`.
    pub fn compute(
        model: &Model,
        state: &MatrixState,
        time: f64,
        k_max: usize,
        initial_spectrum: &[C64],
        reference: Option<&MatrixState>,
        wall_time: Duration,
    ) -> Result<Self> {
        let eigenvalues = spectrum_of(state)?;
        let eig_drift = if initial_spectrum.is_empty() {
            0.0
        } else {
            initial_spectrum.iter().zip(&eigenvalues).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
        };
        Ok(Self {
            time,
            hamiltonian: hamiltonian_of(model, state)?,
            casimirs: casimirs_of(state, k_max)?,
            eigenvalues,
            eig_drift,
            frobenius_error_vs_reference: reference.map(|r| frobenius_error(state, r)).transpose()?,
            wall_time,
        })
    }

    /// `N/(4π) · H`, the normalization used when comparing energies across `N`.
    pub fn hamiltonian_normalized(&self) -> f64 {
        self.eigenvalues.len() as f64 / (4.0 * PI) * self.hamiltonian
    }

    pub fn to_csv_row(&self) -> String {
        let mut fields = vec![fmt(self.time), fmt(self.hamiltonian), fmt(self.hamiltonian_normalized())];
        fields.extend(self.casimirs.iter().map(|&c| fmt(c)));
        fields.push(fmt(self.eig_drift));
        fields.push(self.frobenius_error_vs_reference.map(fmt).unwrap_or_default());
        fields.push(format!("{:.3}", self.wall_time.as_secs_f64() * 1e3));
        fields.join(",")
    }
}

/// Shortest representation that reads back to the same `f64`; `-0` prints as `0e0`.
fn fmt(x: f64) -> String {
    format!("{:e}", if x == 0.0 { 0.0 } else { x })
}

/// `time,H,H_normalized,C1..Ck,eig_drift,frob_err,wall_ms`.
pub fn csv_header(k_max: usize) -> String {
    let mut cols = vec!["time".to_string(), "H".into(), "H_normalized".into()];
    cols.extend((1..=k_max).map(|k| format!("C{k}")));
    cols.extend(["eig_drift".to_string(), "frob_err".into(), "wall_ms".into()]);
    cols.join(",")
}

/// Writes the header on creation, then one LF-terminated row per record.
pub struct CsvWriter<W: Write> {
    out: W,
    k_max: usize,
}

impl<W: Write> CsvWriter<W> {
    pub fn new(mut out: W, k_max: usize) -> Result<Self> {
        writeln!(out, "{}", csv_header(k_max))?;
        Ok(Self { out, k_max })
    }

    pub fn write(&mut self, rec: &DiagnosticsRecord) -> Result<()> {
        debug_assert_eq!(rec.casimirs.len(), self.k_max);
        writeln!(self.out, "{}", rec.to_csv_row())?;
        Ok(())
    }

    pub fn into_inner(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::SkewHermitianState;

    #[test]
    fn header_and_row_have_matching_columns() {
        let n = 4;
        let model = Model::new(n).unwrap();
        let w = MatrixState::Dense(SkewHermitianState::zeros(n));
        let rec = DiagnosticsRecord::compute(&model, &w, 0.5, 3, &[], Some(&w), Duration::from_millis(2)).unwrap();
        let mut csv = CsvWriter::new(Vec::new(), 3).unwrap();
        csv.write(&rec).unwrap();
        let text = String::from_utf8(csv.into_inner().unwrap()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "time,H,H_normalized,C1,C2,C3,eig_drift,frob_err,wall_ms");
        assert_eq!(lines[1].split(',').count(), lines[0].split(',').count());
        assert!(lines[1].starts_with("5e-1,0e0,0e0,"));
        assert!(text.ends_with('\n') && !text.contains('\r'));
    }
}
