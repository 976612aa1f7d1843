use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use multispan_qkd::cli::{exit_code, run, Command};
use multispan_qkd::config::resolve;

/// Key rates for CV-QKD over amplified multispan links.
#[derive(Parser)]
#[command(version)]
struct Args {
    #[command(subcommand)]
    command: Sub,
}

#[derive(clap::Args)]
struct Input {
    /// Optional config file (`key = value` lines, `[section]` headers)
    /// followed by `--key=value` overrides.
    #[arg(allow_hyphen_values = true, trailing_var_arg = true, value_name = "CONFIG] [--KEY=VALUE")]
    args: Vec<String>,
}

#[derive(Subcommand)]
enum Sub {
    /// Optimized rates with the whole link untrusted.
    KgrUnconditional(Input),
    /// Optimized rates and key ratios with one untrusted span.
    KgrComposable(Input),
    /// Largest excess noise with a positive optimized rate.
    MaxNoise(Input),
    /// Holevo-capacity upper bound for phase-insensitive links.
    Ultimate(Input),
    /// Finite-span vs continuous-amplification channel parameters.
    ContinuousLimit(Input),
    /// Runs the oracle suites.
    Selfcheck(Input),
}

fn main() -> ExitCode {
    let args = Args::parse();
    let (cmd, input) = match args.command {
        Sub::KgrUnconditional(i) => (Command::KgrUnconditional, i),
        Sub::KgrComposable(i) => (Command::KgrComposable, i),
        Sub::MaxNoise(i) => (Command::MaxNoise, i),
        Sub::Ultimate(i) => (Command::Ultimate, i),
        Sub::ContinuousLimit(i) => (Command::ContinuousLimit, i),
        Sub::Selfcheck(i) => (Command::SelfCheck, i),
    };
    let (paths, overrides): (Vec<String>, Vec<String>) = input.args.into_iter().partition(|a| !a.starts_with("--"));
    if paths.len() > 1 {
        eprintln!("error: expected at most one config file, got {}", paths.len());
        return ExitCode::from(1);
    }
    let path = paths.into_iter().next().map(PathBuf::from);
    let text = match &path {
        Some(p) => match std::fs::read_to_string(p) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: cannot read {}: {e}", p.display());
                return ExitCode::from(1);
            }
        },
        None => String::new(),
    };
    let result = resolve(&text, &overrides).and_then(|cfg| {
        let stdout = io::stdout();
        let mut out = BufWriter::new(stdout.lock());
        let passed = run(cmd, &cfg, &mut out)?;
        out.flush().map_err(|e| multispan_qkd::Error::Numerical(e.to_string()))?;
        Ok(passed)
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: self-check failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
