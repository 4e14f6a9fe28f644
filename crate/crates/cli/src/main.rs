use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{error, info};

use vortexloc_cli::{emit_plot_data, run_experiment, ConfigError, ExperimentConfig, RunStatus, Scenario};

#[derive(Parser)]
#[command(name = "vortexloc", version, about = "Point-vortex and vortex-blob localization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single experiment (point vortices, one blob or several blobs).
    Run { config: PathBuf },
    /// Run an epsilon sweep.
    Sweep { config: PathBuf },
    /// Write plot scripts and SVG figures for a finished run.
    Plot { manifest: PathBuf },
    /// Parse and check a configuration without running it.
    Validate { config: PathBuf },
}

fn load(path: &Path) -> Result<ExperimentConfig, ExitCode> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        error!("stage validate: cannot read {}: {e}", path.display());
        ExitCode::from(4)
    })?;
    let cfg = ExperimentConfig::parse(&text).and_then(|c| c.validate().map(|_| c));
    cfg.map_err(|e: ConfigError| {
        error!("stage validate: {e}");
        ExitCode::from(2)
    })
}

fn execute(cfg: &ExperimentConfig) -> ExitCode {
    match run_experiment(cfg) {
        Ok(m) => {
            info!("wrote {} files to {} in {:.1}s", m.outputs.len(), m.output_dir.display(), m.wall_time_seconds);
            if m.status == RunStatus::Partial {
                error!("run incomplete: {}", m.error.as_deref().unwrap_or("unknown"));
                return ExitCode::from(3);
            }
            println!("{}", m.output_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config } => match load(&config) {
            Ok(cfg) if cfg.scenario == Scenario::Sweep => {
                error!("stage validate: sweep configurations run with `vortexloc sweep`");
                ExitCode::from(2)
            }
            Ok(cfg) => execute(&cfg),
            Err(code) => code,
        },
        Command::Sweep { config } => match load(&config) {
            Ok(cfg) if cfg.scenario != Scenario::Sweep => {
                error!("stage validate: scenario is {}, expected sweep", cfg.scenario);
                ExitCode::from(2)
            }
            Ok(cfg) => execute(&cfg),
            Err(code) => code,
        },
        Command::Plot { manifest } => match emit_plot_data(&manifest) {
            Ok(files) => {
                for f in files {
                    println!("{}", f.display());
                }
                ExitCode::SUCCESS
            }
            Err(e) => {
                error!("stage plot: {e}");
                match e {
                    vortexloc_cli::PlotError::Io(_) => ExitCode::from(4),
                    _ => ExitCode::from(2),
                }
            }
        },
        Command::Validate { config } => match load(&config) {
            Ok(cfg) => {
                print!("{}", cfg.serialize());
                ExitCode::SUCCESS
            }
            Err(code) => code,
        },
    }
}
