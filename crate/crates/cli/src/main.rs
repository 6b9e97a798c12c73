// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gig_cli::{cmd_attribute, cmd_axioms, cmd_benchmark, cmd_train, CliError, Overrides, RunConfig};

/// Geodesic path attributions on the half-moons task.
#[derive(Parser)]
#[command(name = "gig", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the classifier and write model.json and train_report.csv.
    Train(Common),
    /// Write one attribution CSV per method for the test set.
    Attribute(Common),
    /// Run the purity sweep and write CSV tables and SVG figures.
    Benchmark(Common),
    /// Report completeness and strong-completeness residuals per method.
    Axioms(Common),
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (must exist).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated method tags, e.g. `ig,geodesic_knn`.
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    noise: Option<f64>,
    /// Model file for attribute and axioms.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Use only the first N test points.
    #[arg(long)]
    points: Option<usize>,
}

impl From<Common> for Overrides {
    fn from(c: Common) -> Self {
        Self {
            config: c.config,
            seed: c.seed,
            out: c.out,
            methods: c.methods,
            noise: c.noise,
            model: c.model,
            points: c.points,
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Train(c) => {
            let config = RunConfig::load(&c.into())?;
            println!("{}", cmd_train(&config)?);
        }
        Command::Attribute(c) => {
            let config = RunConfig::load(&c.into())?;
            for path in cmd_attribute(&config)? {
                println!("{}", path.display());
            }
        }
        Command::Benchmark(c) => {
            let config = RunConfig::load(&c.into())?;
            let output = cmd_benchmark(&config, std::io::stderr())?;
            println!("method,auc_purity,stderr");
            for s in output.summary {
                println!("{},{:.4},{:.4}", s.method, s.auc_purity, s.stderr);
            }
        }
        Command::Axioms(c) => {
            let config = RunConfig::load(&c.into())?;
            println!("method,completeness_median,completeness_p95,strong_median,strong_p95,output_change_median");
            for (m, s) in cmd_axioms(&config)? {
                println!(
                    "{m},{:.3e},{:.3e},{:.3e},{:.3e},{:.3e}",
                    s.completeness_median, s.completeness_p95, s.strong_median, s.strong_p95, s.output_change_median
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
