use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use fracwave_cli::commands::{cmd_bench, cmd_compare, cmd_converge, cmd_run};
use fracwave_cli::config::{RawConfig, RunConfig};
use fracwave_cli::output::{emit, render_csv};

/// Variable-order time-fractional wave equation solvers (TSS and FDAC).
#[derive(Parser, Debug)]
#[command(name = "fracwave", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve once and report error and timing; optionally write snapshots.
    Run(ConfigArgs),
    /// Refinement study with observed convergence rates.
    Converge(ConfigArgs),
    /// Wall-clock scaling of both solvers with log-log slopes.
    Bench(ConfigArgs),
    /// TSS vs FDAC equivalence sweep over dimensions, orders, N and m.
    Compare(ConfigArgs),
}

#[derive(Args, Debug)]
struct ConfigArgs {
    /// Config file of `key = value` lines.
    #[arg(short, long, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Override a config key (repeatable), e.g. `--set N=2^10`.
    #[arg(short, long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Shorthand for `--set output=FILE`.
    #[arg(short, long, value_name = "FILE")]
    output: Option<PathBuf>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut raw = match &self.config {
            Some(path) => RawConfig::from_file(path)?,
            None => RawConfig::default(),
        };
        for assignment in &self.set {
            raw.set(assignment)?;
        }
        if let Some(out) = &self.output {
            raw.set(&format!("output={}", out.display()))?;
        }
        raw.resolve()
    }
}

/// Exit status when `compare` finds a difference above tolerance.
const EXIT_MISMATCH: u8 = 2;

fn execute(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.resolve()?;
            let out = cmd_run(&cfg)?;
            for (path, text) in &out.snapshots {
                std::fs::write(path, text).with_context(|| format!("writing snapshot {}", path.display()))?;
            }
            emit(&render_csv(&out.rows), cfg.output.as_deref())?;
        }
        Command::Converge(args) => {
            let cfg = args.resolve()?;
            let rows = cmd_converge(&cfg)?;
            emit(&render_csv(&rows), cfg.output.as_deref())?;
        }
        Command::Bench(args) => {
            let cfg = args.resolve()?;
            let report = cmd_bench(&cfg)?;
            emit(&render_csv(&report.rows), cfg.output.as_deref())?;
            eprint!("{}", report.summary());
        }
        Command::Compare(args) => {
            let cfg = args.resolve()?;
            let report = cmd_compare(&cfg)?;
            emit(&render_csv(&report.rows), cfg.output.as_deref())?;
            eprintln!("max relative difference {:.3e} (tolerance {:.1e})", report.worst, report.tolerance);
            if !report.passed() {
                eprintln!("error: TSS and FDAC disagree beyond tolerance");
                return Ok(ExitCode::from(EXIT_MISMATCH));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
