//! `cachenet`: batch front end for counter analysis, threshold selection,
//! network flows, placement, reductions and simulation.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "cachenet", version, about = "Reinforced-counter caches and cache networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Input file: key=value config, network description or instance.
    #[arg(long = "in", global = true, value_name = "PATH")]
    input: Option<PathBuf>,
    /// Write the main table here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Override a configuration key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
    #[arg(long, global = true)]
    mode: Option<String>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Steady-state metrics of one counter (modes: params, target, calibrate).
    Analyze,
    /// Cost-minimizing threshold (modes: min, sweep).
    Optimize,
    /// Hysteresis sweep over K_h (modes: retune, fixed, recursions).
    Hysteresis,
    /// Flow balance on a network file (modes: solve, flows, provision, occupancy).
    Network,
    /// Static placement on a network file (modes: solve, enumerate, evaluate, export).
    Placement,
    /// Hardness constructions (modes: partition, knapsack, verify).
    Reduce,
    /// Discrete-event simulation (modes: counter, hysteresis, fractional, network).
    Simulate,
}

/// Options shared by every command.
pub struct Ctx {
    pub command: &'static str,
    pub input: Option<PathBuf>,
    pub seed: u64,
    pub sets: Vec<String>,
    pub mode: Option<String>,
}

impl Ctx {
    /// Requested mode, checked against `allowed`; the first entry is the
    /// default.
    pub fn mode(&self, allowed: &[&'static str]) -> anyhow::Result<&'static str> {
        match &self.mode {
            None => Ok(allowed[0]),
            Some(m) => allowed.iter().copied().find(|a| a == m).ok_or_else(|| {
                anyhow::anyhow!("unknown mode '{m}' for {} (one of: {})", self.command, allowed.join(", "))
            }),
        }
    }

    pub fn header(&self, mode: &str, cfg: &config::Config) -> String {
        let mut h = format!("# command={}\n# mode={mode}\n# seed={}\n", self.command, self.seed);
        if let Some(p) = &self.input {
            h.push_str(&format!("# in={}\n", p.display()));
        }
        h.push_str(&cfg.echo());
        h
    }
}

/// Text for the main output, extra files, and the exit status
/// (0 success, 1 infeasible or unstable verdict).
pub struct Outcome {
    pub text: String,
    pub files: Vec<(PathBuf, String)>,
    pub verdict_failed: bool,
}

impl Outcome {
    pub fn ok(text: String) -> Self {
        Self { text, files: Vec::new(), verdict_failed: false }
    }
}

fn run(cli: &Cli) -> anyhow::Result<Outcome> {
    let name = match cli.command {
        Command::Analyze => "analyze",
        Command::Optimize => "optimize",
        Command::Hysteresis => "hysteresis",
        Command::Network => "network",
        Command::Placement => "placement",
        Command::Reduce => "reduce",
        Command::Simulate => "simulate",
    };
    let ctx =
        Ctx { command: name, input: cli.input.clone(), seed: cli.seed, sets: cli.sets.clone(), mode: cli.mode.clone() };
    match cli.command {
        Command::Analyze => commands::single::analyze(&ctx),
        Command::Optimize => commands::single::optimize(&ctx),
        Command::Hysteresis => commands::single::hysteresis(&ctx),
        Command::Network => commands::net::network(&ctx),
        Command::Placement => commands::net::placement(&ctx),
        Command::Reduce => commands::reduce::reduce(&ctx),
        Command::Simulate => commands::simulate::simulate(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match run(&cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    for (path, body) in &outcome.files {
        if let Some(dir) = path.parent() {
            if let Err(e) = std::fs::create_dir_all(dir) {
                eprintln!("error: creating {}: {e}", dir.display());
                return ExitCode::from(2);
            }
        }
        if let Err(e) = std::fs::write(path, body) {
            eprintln!("error: writing {}: {e}", path.display());
            return ExitCode::from(2);
        }
    }
    match &cli.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &outcome.text) {
                eprintln!("error: writing {}: {e}", path.display());
                return ExitCode::from(2);
            }
        }
        None => print!("{}", outcome.text),
    }
    ExitCode::from(if outcome.verdict_failed { 1 } else { 0 })
}
