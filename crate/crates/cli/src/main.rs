//! `qel`: batch driver for the quadrupole packet laboratory.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qel_core::config::RunConfig;

#[derive(Debug, Parser)]
#[command(
    name = "qel",
    version,
    about = "Interior quadrupole packet laboratory",
    after_help = "Every configuration key is also a flag: `--t-final 0.001`, `--lambda0 0.04`, \
                  or `--section.key value` when a key name is shared between sections."
)]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the file and `QEL_OUTPUT_DIR`).
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tangential integral, score constant and strain parity table.
    VerifyKernel,
    /// Build the explicit datum, write its checkpoint and self-entry report.
    MakeData,
    /// Print the self-entry check of the explicit datum.
    SelfEntry,
    /// Evolve and write the diagnostics series.
    Evolve {
        /// Start from a checkpoint instead of the explicit datum.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Run even if the initial self-entry check fails.
        #[arg(long)]
        force: bool,
    },
    /// Integrate the Riccati comparison system.
    CompareOde {
        /// Fit the constants from a PDE series instead of the configuration.
        #[arg(long)]
        series: Option<PathBuf>,
    },
    /// Plot a diagnostics series as SVG files.
    Report {
        /// Series to plot (default: `series.csv` in the output directory).
        #[arg(long)]
        series: Option<PathBuf>,
    },
}

/// Outcome of a subcommand that ran to completion.
pub enum Outcome {
    Pass,
    CheckFailed,
}

type Overrides = Vec<(String, String)>;

/// Pull `--key value` / `--key=value` pairs that name configuration keys out of `args`.
fn split_overrides(args: Vec<String>, cfg: &RunConfig) -> Result<(Vec<String>, Overrides), String> {
    let keys = cfg.keys().map_err(|e| e.to_string())?;
    let is_key = |name: &str| {
        let name = name.replace('-', "_");
        match name.split_once('.') {
            Some((s, k)) => keys.iter().any(|(ks, kk)| ks == s && kk == k),
            None => keys.iter().any(|(_, kk)| *kk == name),
        }
    };
    let mut rest = Vec::with_capacity(args.len());
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    if let Some(bin) = it.next() {
        rest.push(bin);
    }
    while let Some(arg) = it.next() {
        let Some(flag) = arg.strip_prefix("--") else {
            rest.push(arg);
            continue;
        };
        let (name, inline) = match flag.split_once('=') {
            Some((n, v)) => (n.to_string(), Some(v.to_string())),
            None => (flag.to_string(), None),
        };
        if name == "output-dir" || name == "config" || !is_key(&name) {
            rest.push(arg);
            continue;
        }
        let value = match inline {
            Some(v) => v,
            None => it.next().ok_or_else(|| format!("flag --{name} needs a value"))?,
        };
        overrides.push((name, value));
    }
    Ok((rest, overrides))
}

fn resolve_config(cli: &Cli, overrides: &Overrides) -> Result<RunConfig, String> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(|e| e.to_string())?,
        None => RunConfig::default(),
    };
    if let Some(dir) = std::env::var_os("QEL_OUTPUT_DIR") {
        cfg.output.dir = PathBuf::from(dir);
    }
    for (k, v) in overrides {
        cfg.set(k, v).map_err(|e| e.to_string())?;
    }
    if let Some(dir) = &cli.output_dir {
        cfg.output.dir = dir.clone();
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args: Vec<String> = std::env::args().collect();
    let command_line = args.join(" ");
    let (rest, overrides) = match split_overrides(args, &RunConfig::default()) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(rest) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let cfg = match resolve_config(&cli, &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let result = match &cli.command {
        Command::VerifyKernel => commands::verify_kernel(&cfg),
        Command::MakeData => commands::make_data(&cfg, &command_line),
        Command::SelfEntry => commands::self_entry(&cfg),
        Command::Evolve { checkpoint, force } => commands::evolve(&cfg, checkpoint.as_deref(), *force, &command_line),
        Command::CompareOde { series } => commands::compare_ode(&cfg, series.as_deref()),
        Command::Report { series } => report::report(&cfg, series.as_deref()),
    };
    match result {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::CheckFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
