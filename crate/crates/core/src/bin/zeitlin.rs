use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use zeitlin_core::harness::basis_check::basis_check;
use zeitlin_core::harness::bench::{run_bench, BenchConfig, BenchKind};
use zeitlin_core::harness::blobs::{run_blobs, BlobsConfig};
use zeitlin_core::harness::convergence::{run_convergence, ConvergenceConfig};
use zeitlin_core::harness::{run_simulate, set_blas_threads, RunConfig};
use zeitlin_core::{Error, Result};

#[derive(Parser)]
#[command(name = "zeitlin", version, about = "Structure-preserving simulation of the Zeitlin model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides the configuration).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Scenario seed (overrides the configuration).
    #[arg(long)]
    seed: Option<u64>,
    /// BLAS thread count.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one scenario and write diagnostics.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Comma-separated times at which to write field snapshots.
        #[arg(long, value_delimiter = ',')]
        snapshot_times: Option<Vec<f64>>,
    },
    /// Error against a fine reference for a ladder of step sizes.
    Convergence {
        #[command(flatten)]
        common: Common,
    },
    /// Kernel timings and fitted complexity exponents.
    Bench {
        #[command(flatten)]
        common: Common,
        /// Kernel to time when no configuration is given.
        #[arg(long, value_enum)]
        kind: Option<BenchArg>,
        /// Comma-separated sizes when no configuration is given.
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        #[arg(long)]
        reps: Option<usize>,
    },
    /// Dense versus low-rank comparison on the vortex-blob scenario.
    Blobs {
        #[command(flatten)]
        common: Common,
    },
    /// Orthonormality and Laplacian checks of the quantized basis.
    BasisCheck {
        #[arg(long, value_delimiter = ',', default_value = "8,16,32")]
        sizes: Vec<usize>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum BenchArg {
    Stream,
    StreamTruncated,
    Iso2,
    Rkmk2,
    Midpoint,
}

impl From<BenchArg> for BenchKind {
    fn from(b: BenchArg) -> Self {
        match b {
            BenchArg::Stream => BenchKind::Stream,
            BenchArg::StreamTruncated => BenchKind::StreamTruncated,
            BenchArg::Iso2 => BenchKind::Iso2,
            BenchArg::Rkmk2 => BenchKind::Rkmk2,
            BenchArg::Midpoint => BenchKind::Midpoint,
        }
    }
}

fn load<T: DeserializeOwned>(path: Option<&Path>) -> Result<T> {
    let path = path.ok_or_else(|| Error::Config("--config is required".into()))?;
    let text = fs::read_to_string(path).map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn out_dir(common: &Common, from_config: Option<&Path>) -> PathBuf {
    common.output.clone().or_else(|| from_config.map(Path::to_path_buf)).unwrap_or_else(|| PathBuf::from("output"))
}

fn print_json(v: &serde_json::Value) -> Result<()> {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{}", serde_json::to_string_pretty(v)?)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { common, snapshot_times } => {
            set_blas_threads(common.threads);
            let mut cfg: RunConfig = load(common.config.as_deref())?;
            if let Some(seed) = common.seed {
                cfg.scenario.seed = seed;
            }
            if let Some(t) = snapshot_times {
                cfg.snapshot_times = t;
            }
            let dir = out_dir(&common, cfg.output_dir.as_deref());
            let s = run_simulate(&cfg, &dir)?;
            print_json(&serde_json::json!({
                "steps": s.steps,
                "csv": s.csv,
                "checkpoint": s.checkpoint,
                "manifest": s.manifest,
                "snapshots": s.snapshots,
                "fixed_point_iterations": s.fixed_point_iterations,
                "wall_s": s.wall_time.as_secs_f64(),
            }))
        }
        Command::Convergence { common } => {
            set_blas_threads(common.threads);
            let mut cfg: ConvergenceConfig = load(common.config.as_deref())?;
            if let Some(seed) = common.seed {
                cfg.scenario.seed = seed;
            }
            let dir = out_dir(&common, None);
            let rep = run_convergence(&cfg, Some(&dir))?;
            print_json(&serde_json::to_value(&rep.orders)?)
        }
        Command::Bench { common, kind, sizes, reps } => {
            // Timings are only comparable on one thread unless asked otherwise.
            set_blas_threads(Some(common.threads.unwrap_or(1)));
            let mut cfg: BenchConfig = match (&common.config, kind) {
                (Some(p), _) => load(Some(p))?,
                (None, Some(k)) => BenchConfig::new(k.into(), sizes.clone().unwrap_or_else(|| vec![64, 128, 256, 512])),
                (None, None) => return Err(Error::Config("bench needs --config or --kind".into())),
            };
            if let Some(s) = sizes {
                cfg.sizes = s;
            }
            if let Some(r) = reps {
                cfg.reps = r;
            }
            if let Some(seed) = common.seed {
                cfg.seed = seed;
            }
            let rep = run_bench(&cfg)?;
            let dir = out_dir(&common, None);
            fs::create_dir_all(&dir)?;
            fs::write(dir.join(format!("bench-{}.csv", cfg.kind.name())), rep.to_csv())?;
            print_json(&serde_json::to_value(&rep)?)
        }
        Command::Blobs { common } => {
            set_blas_threads(common.threads);
            let mut cfg: BlobsConfig = load(common.config.as_deref())?;
            if let Some(seed) = common.seed {
                cfg.scenario.seed = seed;
            }
            let dir = out_dir(&common, None);
            let rep = run_blobs(&cfg, Some(&dir))?;
            write!(std::io::stdout().lock(), "{}", rep.table_csv())?;
            Ok(())
        }
        Command::BasisCheck { sizes, output } => {
            let mut all = Vec::new();
            for n in sizes {
                all.push(basis_check(n)?);
            }
            let failed: Vec<usize> = all.iter().filter(|c| !c.passes()).map(|c| c.n).collect();
            let v = serde_json::to_value(&all)?;
            if let Some(dir) = output {
                fs::create_dir_all(&dir)?;
                fs::write(dir.join("basis-check.json"), serde_json::to_vec_pretty(&v)?)?;
            }
            print_json(&v)?;
            if failed.is_empty() {
                Ok(())
            } else {
                Err(Error::Internal(format!("basis check failed for N = {failed:?}")))
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
