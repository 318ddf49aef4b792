mod config;
mod run;

use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Exit codes: 0 success, 2 configuration error, 3 runtime/estimator error.
#[derive(Parser)]
#[command(
    name = "mapsens",
    version,
    about = "Sensitivity analysis of map-valued models: Sobol' index maps, Vorob'ev, universal and HSIC indices"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured analyses and write CSV/JSON artifacts.
    Run {
        /// TOML run configuration.
        config: PathBuf,
        /// Override the configured output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a configuration without evaluating the model.
    Validate {
        /// TOML run configuration.
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config, out } => cmd_run(&config, out),
        Command::Validate { config } => cmd_validate(&config),
    }
}

fn load(path: &Path) -> Result<config::RunConfig, ExitCode> {
    config::load(path).map_err(|e| {
        eprintln!("config error: {e}");
        ExitCode::from(2)
    })
}

fn cmd_validate(path: &Path) -> ExitCode {
    let cfg = match load(path) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let report = cfg.validate();
    for n in &report.notes {
        println!("note: {n}");
    }
    if report.ok() {
        println!(
            "config ok: {} inputs, {} analyses, output -> {}",
            cfg.inputs.len(),
            cfg.analyses.len(),
            cfg.output.dir.display()
        );
        ExitCode::SUCCESS
    } else {
        for p in &report.problems {
            println!("problem: {p}");
        }
        ExitCode::from(2)
    }
}

fn cmd_run(path: &Path, out: Option<PathBuf>) -> ExitCode {
    let cfg = match load(path) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let report = cfg.validate();
    if !report.ok() {
        for p in &report.problems {
            eprintln!("config error: {p}");
        }
        return ExitCode::from(2);
    }
    let out_dir = out.unwrap_or_else(|| cfg.output.dir.clone());
    match run::run(&cfg, &out_dir) {
        Ok(summary) => {
            for a in &summary.analyses {
                match &a.error {
                    None => println!("{}: ok ({} model evaluations)", a.method, a.evaluations),
                    Some(e) => println!("{}: error: {e}", a.method),
                }
            }
            println!(
                "wrote {} index rows and {} p-value rows under {}",
                summary.index_rows,
                summary.pvalue_rows,
                out_dir.display()
            );
            if summary.all_ok() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            }
        }
        Err(e) => {
            eprintln!("run error: {e}");
            ExitCode::from(3)
        }
    }
}
