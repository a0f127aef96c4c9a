use std::path::PathBuf;
use std::process::ExitCode;

use adiaphase_core::cli::{self, Experiment, OutputFormat};
use adiaphase_core::Error;
use clap::Parser;

/// Adiabatic evolution, Berry phase and phase-consistency experiments.
#[derive(Debug, Parser)]
#[command(name = "adiaphase", version)]
struct Args {
    /// Experiment to run.
    #[arg(value_enum)]
    experiment: Experiment,
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Write the report here instead of stdout (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format (overrides the config).
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    /// Grid size K (overrides the config).
    #[arg(long)]
    steps: Option<usize>,
    /// Suppress the summary on stderr.
    #[arg(long)]
    quiet: bool,
}

fn execute(args: &Args) -> Result<(), Error> {
    let mut config = cli::load_config(&args.config)?.with_experiment(args.experiment)?;
    if let Some(steps) = args.steps {
        config.steps = steps;
    }
    if let Some(format) = args.format {
        config.output.format = format;
    }
    if let Some(out) = &args.out {
        config.output.path = Some(out.clone());
    }
    let report = cli::run(&config)?;
    let body = cli::render(&report, config.output.format);
    match &config.output.path {
        Some(path) => std::fs::write(path, body)?,
        None => print!("{body}"),
    }
    if !args.quiet {
        eprintln!(
            "adiaphase {}: {} in {:.3} s",
            report.tool_version, report.experiment, report.wall_time_s
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("adiaphase: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
