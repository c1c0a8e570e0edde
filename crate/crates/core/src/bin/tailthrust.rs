use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use tailthrust::cli::{run, Command, ModelConfig, RunConfig};

#[derive(Parser)]
#[command(
    name = "tailthrust",
    version,
    about = "Thrust model, force-sensor design and force-trace analysis for undulating tail propulsors"
)]
struct Args {
    /// TOML file with model, sensor, filter and sweep overrides
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for output files
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Steady-state cycles averaged per test
    #[arg(long, global = true, default_value_t = 5)]
    n_cycles: usize,
    /// Report thrust toward the locomotion direction as positive
    #[arg(long, global = true)]
    report_propulsive: bool,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Reactive thrust of the configured wave kinematics
    Simulate,
    /// Reactive thrust from a centerline CSV (frame,time_s,s_m,x_m,y_m)
    Estimate { centerline: PathBuf },
    /// Filter a measured trace and compute per-cycle peak and average force
    Analyze { manifest: PathBuf },
    /// Dual-cantilever sensor design report and response curve
    Sensor,
    /// Least-squares calibration from a force_N,rep,voltage_V CSV
    Calibrate { data: PathBuf },
    /// Aggregate a results table, or run a synthetic f-DC sweep if none is given
    Sweep { results: Option<PathBuf> },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match try_main() {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn try_main() -> anyhow::Result<String> {
    let args = Args::parse();
    let command = match args.command {
        Cmd::Simulate => Command::Simulate,
        Cmd::Estimate { centerline } => Command::Estimate { centerline },
        Cmd::Analyze { manifest } => Command::Analyze { manifest },
        Cmd::Sensor => Command::Sensor,
        Cmd::Calibrate { data } => Command::Calibrate { data },
        Cmd::Sweep { results } => Command::Sweep { results },
    };
    let mut cfg = RunConfig::new(command);
    if let Some(path) = &args.config {
        cfg.model = ModelConfig::load(path).with_context(|| format!("loading config {}", path.display()))?;
    }
    cfg.out_dir = args.out;
    cfg.seed = args.seed;
    cfg.n_cycles = args.n_cycles;
    cfg.report_propulsive = args.report_propulsive;
    Ok(run(&cfg)?)
}
