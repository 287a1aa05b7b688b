use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use elastic_core::cli::{cmd_estimate, cmd_sweep, EstimateRequest, SweepOptions};
use elastic_core::{run_scenario_to_files, Error, ScenarioConfig};

const EXIT_NOT_CONVERGED: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "elastic-sim", version, about = "Elastic core-count control driven by communication efficiency")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write its trace and summary.
    Run {
        config: PathBuf,
        /// Trace CSV output; defaults to `output.trace` in the scenario.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Summary output; defaults to `output.summary` in the scenario.
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Overrides the workload and cluster seeds.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Estimate the core count for a measured communication efficiency.
    Estimate {
        #[arg(long)]
        cores: u32,
        #[arg(long)]
        ce: f64,
        #[arg(long)]
        ce_min: f64,
        #[arg(long)]
        ce_max: f64,
        #[arg(long, default_value_t = 2.0)]
        rate: f64,
        #[arg(long, default_value_t = 15)]
        min_cores: u32,
        #[arg(long, default_value_t = 240)]
        max_cores: u32,
    },
    /// Tabulate CE, LB and PE of the scenario workload over core counts.
    Sweep {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        cores: Vec<u32>,
        /// Switch off imbalance and noise.
        #[arg(long)]
        noiseless: bool,
        #[arg(long)]
        first_step: Option<u64>,
        #[arg(long)]
        steps: Option<u64>,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Protocol(_) | Error::Consistency(_) | Error::Sequencing { .. } | Error::DegenerateWindow(_)) => {
            EXIT_RUNTIME
        }
        _ => EXIT_USAGE,
    }
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Run {
            config,
            trace,
            summary,
            seed,
        } => {
            let mut scenario = ScenarioConfig::load(&config)?;
            if let Some(seed) = seed {
                scenario = scenario.with_seed(seed);
            }
            let trace = trace
                .or_else(|| scenario.output.trace.clone())
                .ok_or_else(|| anyhow!("no trace path: pass --trace or set output.trace"))?;
            let summary_path = summary
                .or_else(|| scenario.output.summary.clone())
                .ok_or_else(|| anyhow!("no summary path: pass --summary or set output.summary"))?;
            let summary = run_scenario_to_files(&scenario, &trace, &summary_path)?;
            print!("{}", summary.to_key_values());
            Ok(if summary.converged { 0 } else { EXIT_NOT_CONVERGED })
        }
        Command::Estimate {
            cores,
            ce,
            ce_min,
            ce_max,
            rate,
            min_cores,
            max_cores,
        } => {
            let report = cmd_estimate(&EstimateRequest {
                cores,
                ce,
                ce_min,
                ce_max,
                rate_of_change: rate,
                min_cores,
                max_cores,
            })?;
            if report.ce_clamped {
                eprintln!("warning: measured CE {ce} is not below 1; estimating from CE = 1 - 1e-9");
            }
            print!("{report}");
            Ok(0)
        }
        Command::Sweep {
            config,
            cores,
            noiseless,
            first_step,
            steps,
            output,
        } => {
            let scenario = ScenarioConfig::load(&config)?;
            let table = cmd_sweep(
                &scenario,
                &SweepOptions {
                    cores,
                    noiseless,
                    first_step,
                    steps_per_point: steps,
                },
            )?;
            match output {
                Some(path) => std::fs::write(&path, table.to_csv())
                    .with_context(|| format!("writing {}", path.display()))?,
                None => print!("{}", table.to_csv()),
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
