mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

use sclab::scattering_control::Mode;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("cannot write {0}: {1}")]
    Io(PathBuf, std::io::Error),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(..) => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Glassbox,
    Outside,
}

#[derive(Debug, Parser)]
#[command(name = "sclab", version, about = "Scattering-control experiments on synthetic media")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (TOML); a manifest from an earlier run also works.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads for commands that scan several cells.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    /// Overrides the config's mode.
    #[arg(long, global = true, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Propagate initial data; write energy history and snapshots.
    Forward,
    /// Run the scattering-control series and its energy report.
    Control,
    /// Harmonic-probe reconstruction of the boundary-normal chart and c.
    ReconstructSpeed,
    /// Wave-packet energy scan for interface depths.
    LocateInterfaces,
    /// Trace one ray through the model.
    TraceRay,
    /// Classify points as regular or not.
    CheckRegularity,
}

fn parse_mode(s: &str) -> Result<Mode, CliError> {
    match s {
        "glassbox" => Ok(Mode::GlassBox),
        "outside" => Ok(Mode::Outside),
        other => Err(CliError::Config(format!(
            "mode must be glassbox or outside, got {other:?}"
        ))),
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let mut cfg = config::load(path)?;
    let mode = match cli.mode {
        Some(ModeArg::Glassbox) => Mode::GlassBox,
        Some(ModeArg::Outside) => Mode::Outside,
        None => parse_mode(cfg.mode.as_deref().unwrap_or("glassbox"))?,
    };
    cfg.mode = Some(mode.name().into());
    cfg.run = None;
    let ctx = commands::Ctx {
        out: &cli.out,
        mode,
        workers: cli.workers,
    };
    match cli.command {
        Command::Forward => commands::forward(&cfg, &ctx),
        Command::Control => commands::control(&cfg, &ctx),
        Command::ReconstructSpeed => commands::reconstruct(&cfg, &ctx),
        Command::LocateInterfaces => commands::locate(&cfg, &ctx),
        Command::TraceRay => commands::trace(&cfg, &ctx),
        Command::CheckRegularity => commands::regularity(&cfg, &ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sclab: {e}");
            ExitCode::from(e.code())
        }
    }
}
