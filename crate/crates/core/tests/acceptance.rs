//! Acceptance suite: one PASS/FAIL line per criterion, then a single assertion.

mod common;

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use ndarray::Array1;

use common::{basis_exact, casimir_by_powers, frob, laplacian_dense, random_skew, trace};
use zeitlin_core::diagnostics::{csv_header, hamiltonian, hamiltonian_of};
use zeitlin_core::harness::bench::{run_bench, BenchConfig, BenchKind};
use zeitlin_core::harness::blobs::{run_blobs, BlobsConfig};
use zeitlin_core::harness::convergence::{run_convergence, ConvergenceConfig};
use zeitlin_core::harness::{run_simulate, set_blas_threads, IntegratorKind, RunConfig, Stepper};
use zeitlin_core::integrators::FixedPointConfig;
use zeitlin_core::linalg::{self, c, CMat, C64};
use zeitlin_core::quantization::BasisSet;
use zeitlin_core::scenarios::ScenarioSpec;
use zeitlin_core::state::checkpoint::{read_checkpoint, write_checkpoint};
use zeitlin_core::state::{truncated_eig, truncated_eig_detailed, MatrixState, SkewHermitianState};
use zeitlin_core::stream::{solve_stream, solve_stream_truncated, truncate_diagonals, LaplacianBlocks, TruncationOrder};
use zeitlin_core::Model;

type Verdict = (bool, String);

struct Outcome {
    id: u32,
    passed: bool,
}

/// Writes straight to stderr so the lines show even when output is captured.
fn report(line: &str) {
    let _ = writeln!(std::io::stderr().lock(), "{line}");
}

fn run(id: u32, name: &str, limit_s: Option<f64>, f: impl FnOnce() -> Verdict) -> Outcome {
    let start = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(f));
    let secs = start.elapsed().as_secs_f64();
    let (mut passed, mut detail) = result.unwrap_or_else(|e| {
        let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default();
        (false, format!("panicked: {msg}"))
    });
    if let Some(limit) = limit_s {
        if secs > limit {
            passed = false;
            detail.push_str(&format!("; over the {limit} s budget"));
        }
    }
    report(&format!("criterion {id:>2} {} {name}: {detail} [{secs:.1} s]", if passed { "PASS" } else { "FAIL" }));
    Outcome { id, passed }
}

fn c1_basis_validity() -> Verdict {
    let mut gram_err = 0.0f64;
    let mut off_support = 0.0f64;
    let mut oracle_err = 0.0f64;
    for n in [8usize, 16, 32] {
        let basis = BasisSet::new(n).unwrap();
        let mats: Vec<CMat> = basis.iter().map(|t| t.to_dense()).collect();
        let mut stacked = CMat::zeros((n * n, mats.len()));
        for (k, t) in mats.iter().enumerate() {
            stacked.column_mut(k).assign(&Array1::from_iter(t.iter().copied()));
        }
        let gram = linalg::adjoint(&stacked.view()).dot(&stacked) * c(4.0 * std::f64::consts::PI / n as f64, 0.0);
        for ((a, b), z) in gram.indexed_iter() {
            let target = if a == b { 1.0 } else { 0.0 };
            gram_err = gram_err.max((z - c(target, 0.0)).norm());
        }
        for t in basis.iter() {
            let m = t.index.m;
            let lap = laplacian_dense(&t.to_dense());
            for ((i, j), z) in lap.indexed_iter() {
                if j as i64 - i as i64 != m {
                    off_support = off_support.max(z.norm());
                }
            }
            let exact = basis_exact(n, t.index.ell, m);
            oracle_err = oracle_err.max(frob(&(t.to_dense() - exact)));
        }
    }
    (
        gram_err < 1e-10 && off_support < 1e-15 && oracle_err < 1e-12,
        format!("max Gram error {gram_err:.2e}, off-support {off_support:.1e}, entries vs exact 3j {oracle_err:.2e}"),
    )
}

fn c2_laplacian_identity() -> Verdict {
    let mut worst = 0.0f64;
    for n in 2..=32usize {
        let basis = BasisSet::new(n).unwrap();
        for t in basis.iter() {
            let dense = t.to_dense();
            let ev = (t.index.ell * (t.index.ell + 1)) as f64;
            let resid = laplacian_dense(&dense) + dense.mapv(|z| z * ev);
            let scale = if t.index.ell == 0 { 1.0 } else { ev * frob(&dense) };
            worst = worst.max(frob(&resid) / scale);
        }
    }
    let mut kernel = 0.0f64;
    for n in [8usize, 16, 32] {
        let ii = linalg::identity(n).mapv(|z| z * c(0.0, 1.0));
        let blocks = LaplacianBlocks::new(n).unwrap();
        kernel = kernel.max(frob(&laplacian_dense(&ii))).max(frob(&solve_stream(&blocks, &ii.view()).unwrap()));
    }
    (worst < 1e-9 && kernel == 0.0, format!("max relative residual {worst:.2e} over N = 2..32, kernel residual {kernel:e}"))
}

fn c3_stream_inverse() -> Verdict {
    let mut worst = 0.0f64;
    let mut worst_trace = 0.0f64;
    for n in [8usize, 32] {
        let blocks = LaplacianBlocks::new(n).unwrap();
        for seed in 0..100u64 {
            let w = random_skew(n, 1000 * n as u64 + seed).into_matrix();
            let p = solve_stream(&blocks, &w.view()).unwrap();
            let target = &w - &(linalg::identity(n) * (trace(&w) / n as f64));
            worst = worst.max(frob(&(laplacian_dense(&p) - target)) / frob(&w));
            worst_trace = worst_trace.max(trace(&p).norm());
        }
    }
    (worst < 1e-11 && worst_trace < 1e-12, format!("max relative residual {worst:.2e}, max |tr P| {worst_trace:.1e} over 200 states"))
}

fn c4_convergence_orders() -> Verdict {
    use IntegratorKind::*;
    let mut cfg = ConvergenceConfig::new(
        ScenarioSpec::random_spectrum(16, 1),
        1.0,
        vec![0.025, 0.0125, 0.00625, 0.003125],
        vec![Rkmk1, Rkmk2, Iso2, Strang],
    );
    cfg.reference_dt = Some(1e-5);
    let rep = run_convergence(&cfg, None).unwrap();
    let bands = [(Rkmk1, 0.8, 1.2), (Rkmk2, 1.8, 2.2), (Iso2, 1.8, 2.2), (Strang, 1.8, 2.2)];
    let mut ok = true;
    let mut parts = Vec::new();
    for (k, lo, hi) in bands {
        let s = rep.slope(k).unwrap_or(f64::NAN);
        ok &= (lo..=hi).contains(&s);
        parts.push(format!("{} {s:.3}", k.name()));
    }
    (ok, format!("slopes {}", parts.join(", ")))
}

fn spectrum_drift_dense(w0: &[C64], w: &SkewHermitianState) -> f64 {
    let now = linalg::sorted_skew_spectrum(&w.view()).unwrap();
    w0.iter().zip(&now).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
}

fn c5_isospectrality() -> Verdict {
    let n = 16;
    let w0 = ScenarioSpec::random_spectrum(n, 2).build().unwrap();
    let model = Model::new(n).unwrap();
    let fp = FixedPointConfig::default();
    let spec0 = linalg::sorted_skew_spectrum(&w0.view()).unwrap();
    let mut st = Stepper::new(model.clone(), IntegratorKind::Iso2, fp, MatrixState::Dense(w0.clone())).unwrap();
    let mut iso = 0.0f64;
    for _ in 0..1000 {
        st.step(1e-2).unwrap();
        iso = iso.max(spectrum_drift_dense(&spec0, &st.state().to_dense()));
    }
    let mut low = Vec::new();
    for kind in [IntegratorKind::Rkmk2, IntegratorKind::Midpoint] {
        let f = truncated_eig(&w0, 8).unwrap();
        let y0 = linalg::sorted_skew_spectrum(&f.reconstruct().view()).unwrap();
        let mut st = Stepper::new(model.clone(), kind, fp, MatrixState::Factored(f)).unwrap();
        let mut d = 0.0f64;
        for _ in 0..1000 {
            st.step(1e-2).unwrap();
            d = d.max(spectrum_drift_dense(&y0, &st.state().to_dense()));
        }
        low.push(d);
    }
    (
        iso < 1e-8 && low.iter().all(|&d| d < 1e-10),
        format!("iso2 drift {iso:.2e}, rkmk2 (r = 8) {:.2e}, midpoint (r = 8) {:.2e}", low[0], low[1]),
    )
}

fn c6_casimir_identity() -> Verdict {
    let n = 16;
    let w = ScenarioSpec::random_spectrum(n, 3).build().unwrap();
    let scale4 = 4.0 * std::f64::consts::PI / n as f64;
    let mut worst = 0.0f64;
    for r in [4usize, 8, 12] {
        let t = truncated_eig_detailed(&w, r).unwrap();
        let y = t.factors.reconstruct();
        for k in 1..=5usize {
            let diff = casimir_by_powers(w.matrix(), k) - casimir_by_powers(y.matrix(), k);
            let tail: C64 = t.eigenvalues[r..].iter().map(|l| l.powi(k as i32)).sum::<C64>() * scale4;
            let size: f64 = t.eigenvalues.iter().map(|l| l.norm().powi(k as i32)).sum::<f64>() * scale4;
            worst = worst.max((diff.norm() - tail.norm()).abs() / size.max(1.0));
        }
    }
    (worst < 1e-12, format!("max | |C_k(W) - C_k(Y)| - tail | / scale = {worst:.2e} for r in 4, 8, 12 and k <= 5"))
}

fn c7_c11_blobs() -> (Verdict, Verdict) {
    let cfg = BlobsConfig::new(32, 0, 1e-2, 10.0);
    let rep = run_blobs(&cfg, None).unwrap();
    let iso = rep.column(IntegratorKind::Iso2);
    let s0 = rep.column(IntegratorKind::Rkmk2);
    let st = rep.column(IntegratorKind::Strang);
    let c7 = (
        rep.lowrank_dense_gap <= 10.0 * iso.final_error,
        format!("||Y_rkmk2 - W_iso2|| = {:.3e} vs 10 x iso2 error {:.3e}", rep.lowrank_dense_gap, 10.0 * iso.final_error),
    );
    let labels: Vec<&str> = rep.columns.iter().map(|c| c.label.as_str()).collect();
    let header_ok = labels == ["Zeitlin with Iso2", "Rec(4) with S0", "Rec(4) with S(t)"];
    let c11 = (
        header_ok && s0.casimir_drift < 1e-10 && st.casimir_drift < 1e-10 && st.hamiltonian_error <= 10.0 * s0.hamiltonian_error,
        format!(
            "errors {:.2e} / {:.2e} / {:.2e}; H drift {:.2e} / {:.2e} / {:.2e}; Casimir drift S0 {:.1e}, S(t) {:.1e}; runtimes {:.2} / {:.2} / {:.2} s",
            iso.final_error,
            s0.final_error,
            st.final_error,
            iso.hamiltonian_error,
            s0.hamiltonian_error,
            st.hamiltonian_error,
            s0.casimir_drift,
            st.casimir_drift,
            iso.runtime_s,
            s0.runtime_s,
            st.runtime_s
        ),
    );
    (c7, c11)
}

fn c8_midpoint_equivalence() -> Verdict {
    let n = 8;
    let w0 = ScenarioSpec::random_spectrum(n, 4).build().unwrap();
    let model = Model::new(n).unwrap();
    let fp = FixedPointConfig { tol: 1e-14, ..Default::default() };
    let mut a = Stepper::new(model.clone(), IntegratorKind::Iso2, fp, MatrixState::Dense(w0.clone())).unwrap();
    let mut b = Stepper::new(model, IntegratorKind::Midpoint, fp, MatrixState::Factored(truncated_eig(&w0, n).unwrap())).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        a.step(1e-2).unwrap();
        b.step(1e-2).unwrap();
        worst = worst.max(linalg::frob_dist(&a.state().to_dense().view(), &b.state().to_dense().view()));
    }
    (worst < 1e-10, format!("max trajectory distance {worst:.2e} over 100 steps"))
}

fn c9_truncated_stream() -> Verdict {
    let n = 16;
    let blocks = LaplacianBlocks::new(n).unwrap();
    let w = random_skew(n, 77);
    let full = solve_stream(&blocks, &w.view()).unwrap();
    let band = solve_stream_truncated(&blocks, &w.view(), TruncationOrder::new(n - 1, n).unwrap()).unwrap().to_dense();
    let h_full = hamiltonian(&Model::new(n).unwrap(), &w.view()).unwrap();
    let h_band = hamiltonian(&Model::truncated(n, Some(n - 1)).unwrap(), &w.view()).unwrap();
    let bitwise = full == band && h_full.to_bits() == h_band.to_bits();

    // T_Ñ commutes with Δ_N, checked with the oracle Laplacian.
    let mut comm = 0.0f64;
    for nt in [1usize, 4, 9] {
        let t = TruncationOrder::new(nt, n).unwrap();
        let x = random_skew(n, nt as u64).into_matrix();
        let lhs = laplacian_dense(&truncate_diagonals(&x.view(), t));
        let rhs = truncate_diagonals(&laplacian_dense(&x).view(), t);
        comm = comm.max(frob(&(lhs - rhs)) / frob(&x));
    }

    let w0 = ScenarioSpec::random_spectrum(n, 1).build().unwrap();
    let model = Model::truncated(n, Some(4)).unwrap();
    let h0 = hamiltonian_of(&model, &MatrixState::Dense(w0.clone())).unwrap();
    let drift = |dt: f64| {
        let mut st = Stepper::new(model.clone(), IntegratorKind::Iso2, FixedPointConfig::default(), MatrixState::Dense(w0.clone())).unwrap();
        let mut d = 0.0f64;
        for _ in 0..(1.0 / dt).round() as usize {
            st.step(dt).unwrap();
            d = d.max((hamiltonian_of(&model, st.state()).unwrap() - h0).abs());
        }
        d
    };
    let ratio = drift(0.02) / drift(0.01);
    (
        bitwise && comm < 1e-12 && (3.5..=4.5).contains(&ratio),
        format!("N-1 truncation bitwise {bitwise}, commutation defect {comm:.1e}, H drift ratio on halving dt {ratio:.3}"),
    )
}

fn c10_complexity() -> Verdict {
    set_blas_threads(Some(1));
    let cases = [
        (BenchKind::Stream, vec![128, 256, 512, 1024], 1.7, 2.3),
        (BenchKind::StreamTruncated, vec![128, 256, 512, 1024], 0.8, 1.4),
        (BenchKind::Iso2, vec![64, 128, 256, 512], 2.6, 3.4),
        (BenchKind::Rkmk2, vec![128, 256, 512, 1024], 1.7, 2.3),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (kind, sizes, lo, hi) in cases {
        let rep = run_bench(&BenchConfig::new(kind, sizes)).unwrap();
        let s = rep.slope().unwrap_or(f64::NAN);
        ok &= (lo..=hi).contains(&s);
        parts.push(format!("{} {s:.2}", kind.name()));
    }
    (ok, format!("slopes {}", parts.join(", ")))
}

fn c12_round_trip() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let w = random_skew(12, 5);
    let f = truncated_eig(&w, 5).unwrap();
    let mut exact = true;
    for (name, s) in [("d.ckpt", MatrixState::Dense(w)), ("f.ckpt", MatrixState::Factored(f))] {
        let p = dir.path().join(name);
        write_checkpoint(&p, &s, "abc", Some(1.5)).unwrap();
        let (_, back) = read_checkpoint(&p).unwrap();
        let bits = |m: &MatrixState| -> Vec<u64> {
            match m {
                MatrixState::Dense(d) => d.matrix().iter().flat_map(|z| [z.re.to_bits(), z.im.to_bits()]).collect(),
                MatrixState::Factored(g) => g.u.iter().chain(g.s.iter()).flat_map(|z| [z.re.to_bits(), z.im.to_bits()]).collect(),
            }
        };
        exact &= bits(&s) == bits(&back);
    }

    let mut sc = ScenarioSpec::random_spectrum(6, 9);
    sc.spectrum_range = [0.1, 1.0];
    let mut cfg = RunConfig::new(sc, IntegratorKind::Rkmk2, 0.05, 0.5);
    cfg.r = Some(3);
    let strip = |p: &std::path::Path| -> Vec<String> {
        std::fs::read_to_string(p).unwrap().lines().map(|l| l.rsplit_once(',').unwrap().0.to_string()).collect()
    };
    let a = run_simulate(&cfg, &dir.path().join("a")).unwrap();
    let b = run_simulate(&cfg, &dir.path().join("b")).unwrap();
    let text = std::fs::read_to_string(&a.csv).unwrap();
    let header_ok = text.lines().next() == Some(csv_header(5).as_str())
        && csv_header(5) == "time,H,H_normalized,C1,C2,C3,C4,C5,eig_drift,frob_err,wall_ms";
    let same = strip(&a.csv) == strip(&b.csv) && a.csv.file_name() == b.csv.file_name();
    (
        exact && header_ok && same,
        format!("checkpoints bit-exact {exact}, CSV header stable {header_ok}, rerun identical apart from wall_ms {same}"),
    )
}

#[test]
fn acceptance_criteria() {
    let mut out = Vec::new();
    out.push(run(1, "basis validity", Some(30.0), c1_basis_validity));
    out.push(run(2, "Laplacian spectral identity", Some(30.0), c2_laplacian_identity));
    out.push(run(3, "stream solver inverse", Some(10.0), c3_stream_inverse));
    out.push(run(4, "convergence orders", Some(300.0), c4_convergence_orders));
    out.push(run(5, "isospectrality", Some(120.0), c5_isospectrality));
    out.push(run(6, "Casimir error identity", Some(10.0), c6_casimir_identity));
    let start = Instant::now();
    let blobs = catch_unwind(AssertUnwindSafe(c7_c11_blobs));
    let blob_secs = start.elapsed().as_secs_f64();
    let (c7, c11) = match blobs {
        Ok(v) => (Some(v.0), Some(v.1)),
        Err(_) => (None, None),
    };
    let failed = || (false, "blob run panicked".to_string());
    out.push(run(7, "rank exactness", Some(300.0 - blob_secs), || c7.unwrap_or_else(failed)));
    out.push(run(8, "midpoint / Iso2 equivalence", None, c8_midpoint_equivalence));
    out.push(run(9, "truncated-stream consistency", None, c9_truncated_stream));
    out.push(run(10, "complexity exponents", Some(900.0), c10_complexity));
    out.push(run(11, "blob comparison table", None, || c11.unwrap_or_else(failed)));
    out.push(run(12, "round-trip I/O", None, c12_round_trip));
    report(&format!("blob runs (criteria 7 and 11) took {blob_secs:.1} s"));
    let failed: Vec<u32> = out.iter().filter(|o| !o.passed).map(|o| o.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
