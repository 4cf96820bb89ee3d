//! Command-line harness for the proximal subgradient splitting experiments.
//!
//! Exit codes: 0 all certificates pass, 1 a certificate failed, 2 config or
//! parse error, 3 runtime contract violation.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use proxsplit::harness;

#[derive(Parser)]
#[command(
    name = "proxsplit",
    about = "Proximal subgradient splitting: runs, stepsize sweeps, and certificate checks",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory for artifacts (overrides PROXSPLIT_OUT).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config and check its certificates.
    Run {
        /// Path to the experiment TOML.
        config: PathBuf,
    },
    /// Run the config once per value of a scalar parameter.
    Sweep {
        config: PathBuf,
        /// Dotted path of the scalar to vary, e.g. rule.rate.
        #[arg(long)]
        param: String,
        /// Comma-separated values, e.g. 0.51,0.75,1.0.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Re-check certificates on a previously written trace CSV.
    Check {
        /// Trace CSV produced by `run`.
        trace: PathBuf,
        /// The experiment TOML that produced it.
        config: PathBuf,
    },
    /// List the problem families available to configs.
    ListProblems,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out_root = cli.out.unwrap_or_else(harness::output_root);
    let result = match cli.command {
        Command::Run { config } => harness::run_experiment(&config, &out_root).map(|outcome| {
            print!("{}", outcome.summary_lines());
            println!("problem: {}", outcome.problem_name);
            println!("trace:   {}", outcome.trace_path.display());
            println!("report:  {}", outcome.report_path.display());
            outcome.all_passed()
        }),
        Command::Sweep { config, param, values } => {
            harness::sweep(&config, &param, &values, &out_root).map(|outcome| {
                for (value, run) in &outcome.runs {
                    println!(
                        "{param}={value}: best_value={:.6e}{}  certificates={}",
                        run.best_value,
                        run.final_gap
                            .map(|g| format!(" best_gap={g:.6e}"))
                            .unwrap_or_default(),
                        if run.all_passed() { "pass" } else { "FAIL" }
                    );
                }
                println!("combined: {}", outcome.combined_csv_path.display());
                println!("summary:  {}", outcome.summary_path.display());
                outcome.all_passed()
            })
        }
        Command::Check { trace, config } => harness::check(&trace, &config).map(|(outcome, _)| {
            print!("{}", outcome.summary_lines());
            outcome.all_passed()
        }),
        Command::ListProblems => {
            for (name, description) in harness::list_problems() {
                println!("{name:<24} {description}");
            }
            Ok(true)
        }
    };
    match result {
        Ok(true) => ExitCode::from(0),
        Ok(false) => {
            eprintln!("one or more certificates failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
