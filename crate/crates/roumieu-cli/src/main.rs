//! Command line front end: `roumieu run` executes a JSON config through the
//! suite runner and writes a deterministic report plus CSV tables;
//! `roumieu explain` renders a written report as annotated plain text.
//!
//! Exit codes: 0 when everything passed, 1 when a suite recorded a broken
//! expectation, 2 for configuration or execution errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use roumieu::exec::Parallelism;
use roumieu::runner::{self, SUITE_ORDER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ParallelArg {
    Auto,
    Sequential,
}

impl From<ParallelArg> for Parallelism {
    fn from(p: ParallelArg) -> Parallelism {
        match p {
            ParallelArg::Auto => Parallelism::Auto,
            ParallelArg::Sequential => Parallelism::Sequential,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "roumieu",
    about = "Numerical suites for Roumieu-class weight sequences, approximate units, and sequential convolution",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the suites configured in a JSON file and write report + CSVs.
    Run {
        /// Path to the run configuration (JSON).
        config: PathBuf,
        /// Output directory for report.json and CSV tables.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Comma-separated suite subset overriding the config's own list.
        #[arg(long, value_delimiter = ',')]
        suites: Vec<String>,
        /// Kernel execution strategy.
        #[arg(long, value_enum, default_value_t = ParallelArg::Auto)]
        parallel: ParallelArg,
    },
    /// Render a written report.json as annotated plain text.
    Explain {
        /// Path to a report written by `run`.
        report: PathBuf,
    },
}

fn run(cmd: Command) -> anyhow::Result<bool> {
    match cmd {
        Command::Run {
            config,
            out,
            suites,
            parallel,
        } => {
            let mut cfg = runner::load_config(&config)?;
            if !suites.is_empty() {
                for s in &suites {
                    anyhow::ensure!(
                        SUITE_ORDER.contains(&s.as_str()),
                        "unknown suite \"{s}\"; expected one of {SUITE_ORDER:?}"
                    );
                }
                cfg.suites = suites;
            }
            let output = runner::execute(&cfg, parallel.into())?;
            runner::write_output(&output, &out)?;
            for (name, suite) in &output.report.suites {
                println!(
                    "{} {}: {}",
                    if suite.pass { "PASS" } else { "FAIL" },
                    name,
                    suite.verdict
                );
            }
            println!(
                "{} overall in {} ms; report at {}",
                if output.report.pass { "PASS" } else { "FAIL" },
                output.report.total_duration_ms,
                out.join("report.json").display()
            );
            Ok(output.report.pass)
        }
        Command::Explain { report } => {
            let text = std::fs::read_to_string(&report)?;
            let value: serde_json::Value = serde_json::from_str(&text)?;
            print!("{}", runner::explain(&value));
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
