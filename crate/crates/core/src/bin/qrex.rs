use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qrex::harness::{emit_csv, run_experiment, verify_suite, ExperimentConfig, ExperimentKind, Scale};
use qrex::Error;

const EXIT_CONFIG: u8 = 1;
const EXIT_VERIFY: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(
    name = "qrex",
    version,
    about = "Q-learning with online target learning and reverse experience replay"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment over several seeds and write a CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override a config key, e.g. `--set eta=0.1`. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Number of seeds (overrides the config).
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check the structural identities on random instances.
    Verify {
        #[arg(long)]
        full: bool,
    },
    /// List the built-in experiments.
    ListExperiments,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Parse(_) | Error::Model(_) | Error::Dimension { .. } => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

fn run(config: PathBuf, mut set: Vec<String>, seeds: Option<usize>, jobs: usize, out: PathBuf) -> Result<(), Error> {
    if let Some(n) = seeds {
        set.push(format!("seeds={n}"));
    }
    if let Ok(seed) = std::env::var("QREX_MASTER_SEED") {
        let seed: u64 = seed
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("QREX_MASTER_SEED `{seed}` is not an integer")))?;
        set.push(format!("base_seed={seed}"));
    }
    let text = std::fs::read_to_string(&config)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", config.display())))?;
    let cfg = ExperimentConfig::parse(&text, &set)?;
    let result = run_experiment(&cfg, jobs)?;
    emit_csv(&result, &out)?;
    let diverged = result.diverged_seeds();
    if !diverged.is_empty() {
        eprintln!(
            "{} of {} runs diverged: {diverged:?}",
            diverged.len(),
            result.runs.len()
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            set,
            seeds,
            jobs,
            out,
        } => match run(config, set, seeds, jobs, out) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(exit_code(&e))
            }
        },
        Command::Verify { full } => {
            let scale = if full { Scale::Full } else { Scale::Quick };
            match verify_suite(scale) {
                Ok(report) => {
                    for check in &report {
                        println!("{check}");
                    }
                    if report.iter().all(|c| c.passed()) {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(EXIT_VERIFY)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_RUNTIME)
                }
            }
        }
        Command::ListExperiments => {
            for kind in ExperimentKind::ALL {
                println!("{:<15} {}", kind.name(), kind.summary());
            }
            ExitCode::SUCCESS
        }
    }
}
