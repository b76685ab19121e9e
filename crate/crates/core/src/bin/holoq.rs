use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use holoq::cli::{self, verify, ExperimentConfig};

#[derive(Parser)]
#[command(name = "holoq", version, about = "Non-Hermitian holonomy experiments")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Output directory; overrides `output.dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
    /// Run the built-in self-checks.
    Verify {
        /// Only check one module.
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(verify::MODULES))]
        filter: Option<String>,
    },
}

fn main() -> ExitCode {
    let args = Args::parse();
    let code = match args.command {
        Command::Run { config, out, quiet } => run(&config, out, quiet),
        Command::Verify { filter } => match verify::run_suites(filter.as_deref()) {
            Ok(checks) => {
                for c in &checks {
                    println!("{}", c.line());
                }
                if checks.iter().all(|c| c.passed) {
                    0
                } else {
                    cli::EXIT_INVARIANT_FAILURE
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                e.exit_code()
            }
        },
    };
    ExitCode::from(code as u8)
}

fn run(path: &std::path::Path, out: Option<PathBuf>, quiet: bool) -> i32 {
    let config = match std::fs::read_to_string(path)
        .map_err(holoq::error::Error::from)
        .and_then(|text| ExperimentConfig::from_json(&text))
    {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            return 2;
        }
    };
    let dir = out
        .or_else(|| config.output.dir.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    match cli::run(&config, Some(&dir)) {
        Ok(report) => {
            if !quiet {
                for c in &report.checks {
                    println!("{}", c.line());
                }
                for w in &report.warnings {
                    println!("warning: {w}");
                }
                println!(
                    "{} in {:.2}s, results in {}",
                    if report.passed { "passed" } else { "FAILED" },
                    report.wall_time_s,
                    dir.display()
                );
            }
            report.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
