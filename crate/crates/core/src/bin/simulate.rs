use clap::{Parser, ValueEnum};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use swce::harness::{run_experiment, write_outputs, EstimatorKind, ExperimentConfig, ExperimentKind};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EstimatorArg {
    Nfcfgs,
    Fcfgs,
    Both,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ExperimentArg {
    Nmse,
    Mismatch,
    Census,
    Cvprobe,
}

/// Runs a channel-estimation experiment and writes results.csv and results.json.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Args {
    /// Experiment description (JSON or TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    #[arg(long)]
    trials: Option<usize>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    estimator: Option<EstimatorArg>,
    #[arg(long, value_enum)]
    experiment: Option<ExperimentArg>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Print the resolved configuration as JSON and exit.
    #[arg(long)]
    print_config: bool,
}

fn resolve(args: &Args) -> swce::Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(s) = args.seed {
        cfg.master_seed = s;
    }
    if let Some(e) = args.estimator {
        cfg.estimators = match e {
            EstimatorArg::Nfcfgs => vec![EstimatorKind::Nfcfgs],
            EstimatorArg::Fcfgs => vec![EstimatorKind::Fcfgs],
            EstimatorArg::Both => vec![EstimatorKind::Nfcfgs, EstimatorKind::Fcfgs],
        };
    }
    if let Some(x) = args.experiment {
        cfg.kind = match x {
            ExperimentArg::Nmse => ExperimentKind::Nmse,
            ExperimentArg::Mismatch => ExperimentKind::Mismatch,
            ExperimentArg::Census => ExperimentKind::Census,
            ExperimentArg::Cvprobe => ExperimentKind::Cvprobe,
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Writes to stdout, treating a closed pipe (e.g. `| head`) as success.
fn emit(text: &str) -> swce::Result<()> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
            Err(swce::Error::Io { path: "<stdout>".into(), source: e })
        }
        _ => Ok(()),
    }
}

fn run(args: Args) -> swce::Result<()> {
    let cfg = resolve(&args)?;
    if args.print_config {
        emit(&(serde_json::to_string_pretty(&cfg)? + "\n"))?;
        return Ok(());
    }
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| swce::Error::InvalidConfig(format!("thread pool: {e}")))?;
    }
    let out = run_experiment(&cfg)?;
    write_outputs(&cfg, &out, &args.out)?;
    emit(&out.table.to_csv_string())?;
    eprintln!("wrote {}", args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
