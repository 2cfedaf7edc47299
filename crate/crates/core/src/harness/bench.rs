//! Timing of the hot kernels across problem sizes, with log-log slope fits.

use std::hint::black_box;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{fit_loglog, LogLogFit};
use crate::error::{Error, Result};
use crate::integrators::{self, ButcherTableau, FixedPointConfig};
use crate::model::Model;
use crate::scenarios::ScenarioSpec;
use crate::state::truncated_eig;
use crate::stream::TruncationOrder;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchKind {
    Stream,
    StreamTruncated,
    Iso2,
    Rkmk2,
    Midpoint,
}

impl BenchKind {
    pub fn name(self) -> &'static str {
        match self {
            BenchKind::Stream => "stream",
            BenchKind::StreamTruncated => "stream-truncated",
            BenchKind::Iso2 => "iso2",
            BenchKind::Rkmk2 => "rkmk2",
            BenchKind::Midpoint => "midpoint",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct BenchConfig {
    pub kind: BenchKind,
    pub sizes: Vec<usize>,
    #[serde(default = "default_reps")]
    pub reps: usize,
    /// Frame width for the low-rank kernels.
    #[serde(default = "default_rank")]
    pub r: usize,
    /// Diagonal truncation for `stream-truncated`.
    #[serde(default = "default_n_trunc")]
    pub n_trunc: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Each timed sample repeats the kernel until it spans at least this long.
    #[serde(default = "default_min_sample_ms")]
    pub min_sample_ms: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_reps() -> usize {
    5
}
fn default_rank() -> usize {
    4
}
fn default_n_trunc() -> usize {
    8
}
fn default_dt() -> f64 {
    1e-3
}
fn default_min_sample_ms() -> f64 {
    20.0
}

impl BenchConfig {
    pub fn new(kind: BenchKind, sizes: Vec<usize>) -> Self {
        Self {
            kind,
            sizes,
            reps: default_reps(),
            r: default_rank(),
            n_trunc: default_n_trunc(),
            dt: default_dt(),
            min_sample_ms: default_min_sample_ms(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sizes.len() < 4 {
            return Err(Error::Config("bench needs at least 4 sizes".into()));
        }
        if self.sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("bench sizes must be strictly increasing".into()));
        }
        if self.reps == 0 || !(self.dt > 0.0) {
            return Err(Error::Config("bench needs reps >= 1 and dt > 0".into()));
        }
        let n0 = self.sizes[0];
        match self.kind {
            BenchKind::StreamTruncated if self.n_trunc == 0 || self.n_trunc >= n0 => {
                Err(Error::Config(format!("n-trunc = {} must lie in 1..{n0}", self.n_trunc)))
            }
            BenchKind::Rkmk2 | BenchKind::Midpoint if self.r == 0 || self.r > n0 => Err(Error::Config(format!("r = {} must lie in 1..={n0}", self.r))),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub kind: BenchKind,
    pub sizes: Vec<usize>,
    /// Median time per kernel call; for `iso2` per fixed-point iteration.
    pub runtimes: Vec<Duration>,
    /// Mean fixed-point iterations per call (1 for explicit kernels).
    pub iterations: Vec<f64>,
    pub fit: Option<LogLogFit>,
}

impl BenchReport {
    pub fn slope(&self) -> Option<f64> {
        self.fit.map(|f| f.slope)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("kind,N,seconds,iterations\n");
        for ((n, t), it) in self.sizes.iter().zip(&self.runtimes).zip(&self.iterations) {
            s.push_str(&format!("{},{n},{:e},{it}\n", self.kind.name(), t.as_secs_f64()));
        }
        s
    }
}

type Kernel = Box<dyn FnMut() -> Result<usize>>;

/// One calibrated kernel per size; `inner` calls make up one sample.
struct Timed {
    f: Kernel,
    inner: usize,
    samples: Vec<f64>,
    units: usize,
    calls: usize,
}

impl Timed {
    fn new(mut f: Kernel, min_sample: Duration) -> Result<Self> {
        f()?;
        let t = Instant::now();
        f()?;
        let once = t.elapsed().max(Duration::from_nanos(1));
        let inner = ((min_sample.as_secs_f64() / once.as_secs_f64()).ceil() as usize).max(1);
        Ok(Timed { f, inner, samples: Vec::new(), units: 0, calls: 0 })
    }

    fn median(&self) -> f64 {
        let mut v = self.samples.clone();
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    }

    fn sample(&mut self) -> Result<()> {
        let t = Instant::now();
        let mut units = 0;
        for _ in 0..self.inner {
            units += (self.f)()?;
        }
        self.samples.push(t.elapsed().as_secs_f64() / units.max(1) as f64);
        self.units += units;
        self.calls += self.inner;
        Ok(())
    }
}

fn kernel(cfg: &BenchConfig, n: usize) -> Result<Kernel> {
    let mut sc = ScenarioSpec::random_spectrum(n, cfg.seed);
    sc.spectrum_range = [1e-3, 1.0];
    let w = sc.build()?;
    let model = Model::new(n)?;
    let fp = FixedPointConfig::default();
    let (dt, r) = (cfg.dt, cfg.r);
    Ok(match cfg.kind {
        BenchKind::Stream => Box::new(move || {
            black_box(crate::stream::solve_stream(model.blocks(), &w.view())?);
            Ok(1)
        }),
        BenchKind::StreamTruncated => {
            let trunc = TruncationOrder::new(cfg.n_trunc, n)?;
            Box::new(move || {
                black_box(crate::stream::solve_stream_truncated(model.blocks(), &w.view(), trunc)?);
                Ok(1)
            })
        }
        BenchKind::Iso2 => Box::new(move || {
            let (out, rep) = integrators::iso2_step(&model, &w, dt, &fp)?;
            black_box(out);
            Ok(rep.n_fixed_point_iters.max(1))
        }),
        BenchKind::Rkmk2 => {
            let f = truncated_eig(&w, r)?;
            let heun = ButcherTableau::heun();
            Box::new(move || {
                black_box(integrators::rkmk_step(&model, &f.u.view(), &f.s.view(), dt, &heun)?);
                Ok(1)
            })
        }
        BenchKind::Midpoint => {
            let f = truncated_eig(&w, r)?;
            Box::new(move || {
                let (u, rep) = integrators::midpoint_stiefel_step(&model, &f.u.view(), &f.s.view(), dt, &fp)?;
                black_box(u);
                Ok(rep.n_fixed_point_iters.max(1))
            })
        }
    })
}

/// Times every size `reps` times and keeps the median time per work unit (a
/// fixed-point iteration for the implicit schemes, one call otherwise). Rounds
/// sweep all sizes so a slow stretch of the machine hits each size alike.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport> {
    cfg.validate()?;
    let min_sample = Duration::from_secs_f64(cfg.min_sample_ms * 1e-3);
    let mut timed = cfg.sizes.iter().map(|&n| Timed::new(kernel(cfg, n)?, min_sample)).collect::<Result<Vec<_>>>()?;
    for _ in 0..cfg.reps {
        for t in &mut timed {
            t.sample()?;
        }
    }
    let runtimes: Vec<Duration> = timed.iter().map(|t| Duration::from_secs_f64(t.median())).collect();
    let iterations: Vec<f64> = timed.iter().map(|t| t.units as f64 / t.calls as f64).collect();
    for ((n, t), it) in cfg.sizes.iter().zip(&runtimes).zip(&iterations) {
        log::info!("bench {} N={n}: {:.3e} s/unit, {it:.2} units/call", cfg.kind.name(), t.as_secs_f64());
    }
    let x: Vec<f64> = cfg.sizes.iter().map(|&n| n as f64).collect();
    let y: Vec<f64> = runtimes.iter().map(Duration::as_secs_f64).collect();
    Ok(BenchReport {
        kind: cfg.kind,
        sizes: cfg.sizes.clone(),
        runtimes,
        iterations,
        fit: fit_loglog(&x, &y),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bench_runs_and_rejects_bad_sizes() {
        let mut cfg = BenchConfig::new(BenchKind::Stream, vec![8, 12, 16, 20]);
        cfg.reps = 2;
        cfg.min_sample_ms = 0.5;
        let rep = run_bench(&cfg).unwrap();
        assert_eq!(rep.runtimes.len(), 4);
        assert!(rep.slope().unwrap().is_finite());
        assert!(rep.to_csv().lines().count() == 5);
        cfg.sizes = vec![8, 8, 16, 20];
        assert!(run_bench(&cfg).is_err());
    }
}
