use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use triharm::{parse_config, run_experiment, verify_suite, ExperimentSpec, RunError};

/// Two-solution experiments for the sixth-order p(x)-Kirchhoff problem.
#[derive(Debug, Parser)]
#[command(name = "triharm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run hypotheses, geometry and both solvers; write CSVs and report.txt.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the verification battery and print the pass/fail table.
    Verify {
        #[arg(long, env = "TRIHARM_SEED", default_value_t = 7)]
        seed: u64,
    },
    /// Print the geometry constants of a configuration as CSV.
    Geometry { config: PathBuf },
}

const EXIT_UNCERTIFIED: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_IO: u8 = 3;

fn load(path: &PathBuf) -> Result<ExperimentSpec, ExitCode> {
    let text = fs::read_to_string(path).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        ExitCode::from(EXIT_IO)
    })?;
    parse_config(&text).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        ExitCode::from(EXIT_INPUT)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out } => {
            let spec = match load(&config) {
                Ok(s) => s,
                Err(code) => return code,
            };
            match run_experiment(&spec, &out) {
                Ok(o) if o.certified => {
                    println!("certified; results in {}", out.display());
                    ExitCode::SUCCESS
                }
                Ok(o) => {
                    println!("failure: {}", o.clause.unwrap_or("unknown"));
                    if let Some(d) = o.detail {
                        eprintln!("{d}");
                    }
                    ExitCode::from(EXIT_UNCERTIFIED)
                }
                Err(RunError::Config(e)) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_INPUT)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_IO)
                }
            }
        }
        Command::Verify { seed } => {
            let report = verify_suite(seed);
            print!("{}", report.render());
            if report.all_passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_UNCERTIFIED)
            }
        }
        Command::Geometry { config } => {
            let spec = match load(&config) {
                Ok(s) => s,
                Err(code) => return code,
            };
            match triharm::run::geometry_only(&spec) {
                Ok(Ok(csv)) => {
                    print!("{csv}");
                    ExitCode::SUCCESS
                }
                Ok(Err((clause, detail))) => {
                    println!("failure: {clause}");
                    eprintln!("{detail}");
                    ExitCode::from(EXIT_UNCERTIFIED)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_INPUT)
                }
            }
        }
    }
}
