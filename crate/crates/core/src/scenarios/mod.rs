//! Initial conditions: random matrices with a prescribed spectrum and the
//! four-vortex-blob state.
//!
//! Randomness comes from ChaCha20 seeded with `seed`. Each consumer reads its
//! own stream (`set_stream`) so adding draws to one never shifts another:
//! stream 0 feeds the Gaussian matrix, stream `16 + 3j + q` feeds blob `j`'s
//! coefficient `q ∈ {a, b, c}` (one `f64` in `[0, 1)` each).

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{self, adjoint, c, CMat, I};
use crate::quantization::{basis_matrix, HarmonicIndex};
use crate::state::SkewHermitianState;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    RandomSpectrum,
    VortexBlobs,
    /// Diagonal (zonal) state with the random-spectrum eigenvalues; stationary.
    Diagonal,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct BlobOptions {
    /// Use the literal `Rᵀ B R` and project to skew-Hermitian afterwards.
    #[serde(default)]
    pub transpose: bool,
    /// Subtract `(tr W / N) I`; this raises the rank from `blob_count` to full.
    #[serde(default)]
    pub remove_trace: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    #[serde(rename = "N")]
    pub n: usize,
    pub seed: u64,
    #[serde(default = "default_range")]
    pub spectrum_range: [f64; 2],
    #[serde(default = "default_blob_count")]
    pub blob_count: usize,
    /// Exponent scale is `amplitude · √N`.
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default)]
    pub blob_options: BlobOptions,
}

fn default_range() -> [f64; 2] {
    [1e-11, 10.0]
}

fn default_blob_count() -> usize {
    4
}

fn default_amplitude() -> f64 {
    100.0
}

impl ScenarioSpec {
    pub fn random_spectrum(n: usize, seed: u64) -> Self {
        Self {
            kind: ScenarioKind::RandomSpectrum,
            n,
            seed,
            spectrum_range: default_range(),
            blob_count: default_blob_count(),
            amplitude: default_amplitude(),
            blob_options: BlobOptions::default(),
        }
    }

    pub fn vortex_blobs(n: usize, seed: u64) -> Self {
        Self {
            kind: ScenarioKind::VortexBlobs,
            ..Self::random_spectrum(n, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Config(format!("scenario needs N >= 2 (got {})", self.n)));
        }
        match self.kind {
            ScenarioKind::RandomSpectrum | ScenarioKind::Diagonal => {
                let [lo, hi] = self.spectrum_range;
                if !(lo > 0.0 && hi > lo && hi.is_finite()) {
                    return Err(Error::Config(format!("spectrum range must satisfy 0 < lo < hi (got [{lo}, {hi}])")));
                }
            }
            ScenarioKind::VortexBlobs => {
                if self.blob_count == 0 {
                    return Err(Error::Config("blob-count must be at least 1".into()));
                }
                if !self.amplitude.is_finite() {
                    return Err(Error::Config("blob amplitude must be finite".into()));
                }
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON serialization, as lowercase hex.
    pub fn canonical_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("scenario serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn build(&self) -> Result<SkewHermitianState> {
        self.validate()?;
        match self.kind {
            ScenarioKind::RandomSpectrum => random_spectrum_ic(self),
            ScenarioKind::VortexBlobs => vortex_blob_ic(self),
            ScenarioKind::Diagonal => {
                let mu = spectrum_grid(self.n, self.spectrum_range[0], self.spectrum_range[1]);
                let w = Array2::from_shape_fn((self.n, self.n), |(i, j)| if i == j { c(0.0, mu[i]) } else { c(0.0, 0.0) });
                Ok(SkewHermitianState::from_trusted(w))
            }
        }
    }
}

/// Signed eigenvalue moduli: `|μ_j|` equally spaced on `[lo, hi]` with the
/// sign pattern `+ − − +` repeated, then the last entry shifted so `Σ μ = 0`.
/// The pattern cancels exactly on an arithmetic grid when `4 | N`, leaving
/// only roundoff for the shift.
pub fn spectrum_grid(n: usize, lo: f64, hi: f64) -> Vec<f64> {
    let step = if n > 1 { (hi - lo) / (n - 1) as f64 } else { 0.0 };
    let mut mu: Vec<f64> = (0..n)
        .map(|j| {
            let m = lo + step * j as f64;
            if matches!(j % 4, 1 | 2) {
                -m
            } else {
                m
            }
        })
        .collect();
    let total: f64 = mu.iter().sum();
    if let Some(last) = mu.last_mut() {
        *last -= total;
    }
    mu
}

/// Haar-distributed unitary from a complex Gaussian matrix, QR with the
/// phases of `diag R` moved into `Q`.
pub fn haar_unitary(n: usize, rng: &mut ChaCha20Rng) -> Result<CMat> {
    let mut g = CMat::zeros((n, n));
    for z in g.iter_mut() {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *z = c(re, im) * std::f64::consts::FRAC_1_SQRT_2;
    }
    let (mut q, r) = linalg::qr(&g.view())?;
    for (j, mut col) in q.columns_mut().into_iter().enumerate() {
        let d = r[[j, j]];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c(1.0, 0.0) };
        col.mapv_inplace(|z| z * phase);
    }
    Ok(q)
}

/// `Q diag(iμ) Q*` for a Haar-random `Q` drawn from stream 0 of `seed`.
pub fn prescribed_spectrum(mu: &[f64], seed: u64) -> Result<SkewHermitianState> {
    let n = mu.len();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(0);
    let q = haar_unitary(n, &mut rng)?;
    let scaled = Array2::from_shape_fn((n, n), |(i, j)| q[[i, j]] * c(0.0, mu[j]));
    let w = scaled.dot(&adjoint(&q.view()));
    Ok(SkewHermitianState::from_trusted(linalg::skew_part(&w.view())))
}

pub fn random_spectrum_ic(spec: &ScenarioSpec) -> Result<SkewHermitianState> {
    if spec.kind != ScenarioKind::RandomSpectrum {
        return Err(Error::Config("random_spectrum_ic needs a random-spectrum scenario".into()));
    }
    spec.validate()?;
    let mu = spectrum_grid(spec.n, spec.spectrum_range[0], spec.spectrum_range[1]);
    prescribed_spectrum(&mu, spec.seed)
}

fn uniform(seed: u64, stream: u64) -> f64 {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.random::<f64>()
}

/// Skew-Hermitian generator `i a (T₁₁ − T₁,₋₁) − b (T₁₁ + T₁,₋₁) + i c T₁₀`.
pub fn blob_generator(n: usize, a: f64, b: f64, cc: f64) -> Result<CMat> {
    let t = |m: i64| -> Result<CMat> { Ok(basis_matrix(n, HarmonicIndex::new(1, m, n)?)?.to_dense()) };
    let (tp, t0, tm) = (t(1)?, t(0)?, t(-1)?);
    Ok((&tp - &tm) * (I * a) - (&tp + &tm) * c(b, 0.0) + t0 * (I * cc))
}

/// `W₀ = 2i Σ_j R_j* B R_j` with `R_j = exp(amplitude √N · generator_j)` and
/// `B = e_N e_Nᵀ`.
pub fn vortex_blob_ic(spec: &ScenarioSpec) -> Result<SkewHermitianState> {
    if spec.kind != ScenarioKind::VortexBlobs {
        return Err(Error::Config("vortex_blob_ic needs a vortex-blobs scenario".into()));
    }
    spec.validate()?;
    let n = spec.n;
    let scale = spec.amplitude * (n as f64).sqrt();
    let mut w = CMat::zeros((n, n));
    for j in 0..spec.blob_count as u64 {
        let [a, b, cc] = [0, 1, 2].map(|q| uniform(spec.seed, 16 + 3 * j + q));
        let gen = blob_generator(n, a, b, cc)? * c(scale, 0.0);
        let defect = linalg::skew_defect(&gen.view());
        if defect > 1e-12 * linalg::frob_norm(&gen.view()).max(1.0) {
            return Err(Error::Internal(format!("blob generator is not skew-Hermitian ({defect:e})")));
        }
        let r = linalg::expm_skew(&gen.view())?;
        // Row N of R; R* B R = v* v with v = e_Nᵀ R.
        let v = r.row(n - 1);
        for ((i, k), z) in w.indexed_iter_mut() {
            let left = if spec.blob_options.transpose { v[i] } else { v[i].conj() };
            *z += c(0.0, 2.0) * left * v[k];
        }
    }
    let mut w = linalg::skew_part(&w.view());
    if spec.blob_options.remove_trace {
        let shift = linalg::trace(&w.view()) / n as f64;
        for k in 0..n {
            w[[k, k]] -= shift;
        }
    }
    Ok(SkewHermitianState::from_trusted(w))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_traceless_and_spans_range() {
        let mu = spectrum_grid(16, 1e-11, 10.0);
        assert!(mu.iter().sum::<f64>().abs() < 1e-12);
        let mut moduli: Vec<f64> = mu.iter().map(|m| m.abs()).collect();
        moduli.sort_by(f64::total_cmp);
        for (j, m) in moduli.iter().enumerate() {
            let want = 1e-11 + (10.0 - 1e-11) * j as f64 / 15.0;
            assert!((m - want).abs() < 1e-12, "{j}: {m} vs {want}");
        }
    }

    #[test]
    fn random_spectrum_is_skew_traceless_and_deterministic() {
        let spec = ScenarioSpec::random_spectrum(8, 42);
        let w = random_spectrum_ic(&spec).unwrap();
        assert!(linalg::skew_defect(&w.view()) < 1e-12 * w.frobenius_norm());
        assert!(w.trace().norm() < 1e-12);
        assert_eq!(w, random_spectrum_ic(&spec).unwrap());
        let other = random_spectrum_ic(&ScenarioSpec::random_spectrum(8, 43)).unwrap();
        assert!(linalg::frob_dist(&w.view(), &other.view()) > 1.0);
    }

    #[test]
    fn haar_unitary_is_unitary() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let q = haar_unitary(9, &mut rng).unwrap();
        assert!(linalg::orthonormality_defect(&q.view()) < 1e-13);
    }

    #[test]
    fn blobs_have_rank_equal_to_count() {
        let spec = ScenarioSpec::vortex_blobs(16, 7);
        let w = vortex_blob_ic(&spec).unwrap();
        assert!(linalg::skew_defect(&w.view()) < 1e-12 * w.frobenius_norm());
        let s = linalg::sorted_skew_spectrum(&w.view()).unwrap();
        let rank = s.iter().filter(|z| z.norm() > 1e-10 * s[0].norm()).count();
        assert_eq!(rank, 4);
        // tr W = 2i Σ ‖v_j‖² = 8i
        assert!((w.trace() - c(0.0, 8.0)).norm() < 1e-10);

        let no_trace = ScenarioSpec {
            blob_options: BlobOptions { remove_trace: true, transpose: false },
            ..spec.clone()
        };
        assert!(vortex_blob_ic(&no_trace).unwrap().trace().norm() < 1e-12);
    }

    #[test]
    fn hash_depends_on_content() {
        let a = ScenarioSpec::random_spectrum(8, 1);
        let b = ScenarioSpec::random_spectrum(8, 2);
        assert_eq!(a.canonical_hash(), a.clone().canonical_hash());
        assert_ne!(a.canonical_hash(), b.canonical_hash());
        let json = serde_json::to_string(&a).unwrap();
        assert!(json.contains("\"kind\":\"random-spectrum\"") && json.contains("\"N\":8"));
        let back: ScenarioSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, a);
    }
}
