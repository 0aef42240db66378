//! proxescape: run, certify, and sweep saddle-escape experiments from a JSON
//! config. Exit codes: 0 success, 2 config error, 3 runtime solver error
//! (partial outputs are written and flagged).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod output;

use config::{parse_mode, parse_seeds, resolve, ExperimentConfig};

#[derive(Debug)]
pub struct CliError {
    message: String,
    config_stage: bool,
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError { message: msg.into(), config_stage: true }
    }
    pub fn runtime(msg: impl Into<String>) -> Self {
        CliError { message: msg.into(), config_stage: false }
    }
    pub fn from_config_err(e: proxescape::ProxError) -> Self {
        CliError::config(e.to_string())
    }
    pub fn exit_code(&self) -> u8 {
        if self.config_stage {
            2
        } else {
            3
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

#[derive(Parser)]
#[command(name = "proxescape", version, about = "Perturbed proximal saddle-escape experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output root; overrides the config field and PROXESCAPE_OUT_DIR.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Seed list: "a..b" (half-open) or "s1,s2,...". Overrides the config.
    #[arg(long, global = true)]
    seeds: Option<String>,
    /// Stationarity mode: envelope or gradient_mapping. Overrides the config.
    #[arg(long, global = true)]
    mode: Option<String>,
    /// Suppress per-seed progress lines.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed and persist trajectories plus a summary record.
    Run { config: PathBuf },
    /// Certify a single point as an approximate local minimum.
    Certify {
        config: PathBuf,
        /// Comma-separated coordinates, e.g. "-1.0,0.0".
        #[arg(long, allow_hyphen_values = true)]
        point: String,
    },
    /// Map escape fraction over a grid of (r, t_interval, eta).
    Sweep { config: PathBuf },
}

fn load_config(path: &PathBuf) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    ExperimentConfig::from_json(&text)
}

fn parse_point(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| CliError::config(format!("bad point coordinate '{t}'")))
        })
        .collect()
}

fn dispatch(cli: &Cli) -> Result<bool, CliError> {
    let config_path = match &cli.command {
        Command::Run { config } | Command::Certify { config, .. } | Command::Sweep { config } => config,
    };
    let mut config = load_config(config_path)?;
    if let Some(s) = &cli.seeds {
        config.seeds = Some(parse_seeds(s)?);
    }
    if let Some(m) = &cli.mode {
        parse_mode(m)?;
        config.stationarity_mode = Some(m.clone());
    }
    let res = resolve(config)?;
    let root = output::output_root(cli.out_dir.as_deref(), res.config.out_dir.as_deref());
    match &cli.command {
        Command::Run { .. } => {
            let (_, partial) = commands::cmd_run(&res, &root, cli.quiet)?;
            Ok(partial)
        }
        Command::Certify { point, .. } => {
            let pt = parse_point(point)?;
            commands::cmd_certify(&res, &pt, &root, cli.quiet)?;
            Ok(false)
        }
        Command::Sweep { .. } => {
            commands::cmd_sweep(&res, &root, cli.quiet)?;
            Ok(false)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            eprintln!("error: some seeds failed; partial outputs written");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
