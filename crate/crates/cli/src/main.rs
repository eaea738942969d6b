//! `eeep`: synthesize traces, estimate self-similarity, simulate link
//! policies and sweep parameters.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use eeep_core::Policy;

mod commands;
mod config;
mod sweep;

use config::Settings;

#[derive(Parser, Debug)]
#[command(
    name = "eeep",
    version,
    about = "Energy-efficient Ethernet with load prediction"
)]
struct Cli {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one parameter; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Output directory.
    #[arg(long, default_value = "out", global = true)]
    out: PathBuf,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// on, eee, eeep or all.
    #[arg(long, default_value = "all", global = true)]
    policy: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic trace and write it as packets-csv.
    Synth,
    /// Estimate the Hurst parameter of a trace.
    Analyze {
        /// Trace file; defaults to the configured source.
        trace: Option<PathBuf>,
        /// Binning tick in milliseconds.
        #[arg(long)]
        tick: Option<f64>,
    },
    /// Run the selected policies and compare with the closed form.
    Simulate,
    /// Run the cross product of all `sweep.*` axes.
    Sweep,
}

/// What a command produced, beyond its files.
pub enum Outcome {
    Clean,
    /// Report written, but a run overloaded or a sweep point failed.
    Flagged,
}

fn settings(cli: &Cli) -> Result<Settings> {
    let mut s = Settings::default();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        s.apply_text(&text, &path.display().to_string())?;
    }
    for a in &cli.set {
        s.apply_assignment(a)
            .with_context(|| format!("--set {a}"))?;
    }
    if let Some(seed) = cli.seed {
        s.set("seed", &seed.to_string())?;
    }
    Ok(s)
}

fn policies(arg: &str) -> Result<Vec<Policy>> {
    if arg.eq_ignore_ascii_case("all") {
        return Ok(Policy::ALL.to_vec());
    }
    match arg.parse() {
        Ok(p) => Ok(vec![p]),
        Err(_) => bail!("unknown policy {arg:?} (on, eee, eeep, all)"),
    }
}

fn run(cli: Cli) -> Result<Outcome> {
    let mut s = settings(&cli)?;
    let policies = policies(&cli.policy)?;
    std::fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    match cli.command {
        Command::Synth => commands::synth(&s, &cli.out),
        Command::Analyze { trace, tick } => {
            if let Some(t) = trace {
                s.set("trace.file", &t.display().to_string())?;
            }
            if let Some(ms) = tick {
                s.set("analyze.tick_ms", &ms.to_string())?;
            }
            commands::analyze(&s, &cli.out)
        }
        Command::Simulate => commands::simulate(&s, &policies, &cli.out),
        Command::Sweep => sweep::run(&s, &policies, &cli.out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(Outcome::Clean) => ExitCode::SUCCESS,
        Ok(Outcome::Flagged) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
