#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod presets;
mod store;

use config::RunConfig;
use store::RunStatus;

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_INVALID_CONFIG: u8 = 2;
pub const EXIT_PARTIAL: u8 = 3;
pub const EXIT_FAILED: u8 = 4;

#[derive(Parser)]
#[command(name = "rydress", version, about = "Adiabatic Rydberg-dressing gate toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a run configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads for parallel sections.
        #[arg(long, env = "RYDRESS_WORKERS")]
        workers: Option<usize>,
        /// Keep completed sweep points from a previous run in `out`.
        #[arg(long)]
        resume: bool,
    },
    /// Check a configuration without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print a named configuration, or list the names.
    Preset { name: Option<String> },
    /// Recompute the checksums recorded in a run's manifest.
    Verify {
        #[arg(long)]
        out: PathBuf,
    },
}

fn diagnostic(kind: &str, message: &str) {
    eprintln!("{}", serde_json::json!({ "error": kind, "message": message }));
}

fn load(path: &PathBuf) -> Result<RunConfig, ExitCode> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            diagnostic("io", &format!("{}: {e}", path.display()));
            return Err(ExitCode::from(EXIT_ERROR));
        }
    };
    RunConfig::parse(&text).map_err(|e| {
        diagnostic("invalid_config", &e);
        ExitCode::from(EXIT_INVALID_CONFIG)
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run { config, out, workers, resume } => {
            let cfg = match load(&config) {
                Ok(c) => c,
                Err(code) => return code,
            };
            let mut pool = rayon::ThreadPoolBuilder::new();
            if let Some(n) = workers.filter(|&n| n > 0) {
                pool = pool.num_threads(n);
            }
            let pool = match pool.build() {
                Ok(p) => p,
                Err(e) => {
                    diagnostic("workers", &e.to_string());
                    return ExitCode::from(EXIT_ERROR);
                }
            };
            match pool.install(|| commands::run(&cfg, &out, resume)) {
                Ok(m) => {
                    println!("{}", serde_json::json!({ "status": m.status, "files": m.files.len(), "failures": m.failures.len() }));
                    ExitCode::from(match m.status {
                        RunStatus::Complete => EXIT_OK,
                        RunStatus::Partial => EXIT_PARTIAL,
                        RunStatus::Failed => EXIT_FAILED,
                    })
                }
                Err(e) => {
                    diagnostic("run_failed", &format!("{e:#}"));
                    ExitCode::from(EXIT_FAILED)
                }
            }
        }
        Command::Validate { config } => match load(&config) {
            Ok(cfg) => {
                println!("{}", serde_json::json!({ "valid": true, "command": cfg.task.name() }));
                ExitCode::from(EXIT_OK)
            }
            Err(code) => code,
        },
        Command::Preset { name: None } => {
            for n in presets::NAMES {
                println!("{n}");
            }
            ExitCode::from(EXIT_OK)
        }
        Command::Preset { name: Some(name) } => match presets::preset(&name) {
            Some(cfg) => {
                println!("{}", serde_json::to_string_pretty(&cfg).expect("serializable"));
                ExitCode::from(EXIT_OK)
            }
            None => {
                diagnostic("unknown_preset", &name);
                ExitCode::from(EXIT_ERROR)
            }
        },
        Command::Verify { out } => match store::verify(&out) {
            Ok(m) => {
                println!("{}", serde_json::json!({ "verified": m.files.len() }));
                ExitCode::from(EXIT_OK)
            }
            Err(e) => {
                diagnostic("verify_failed", &format!("{e:#}"));
                ExitCode::from(EXIT_FAILED)
            }
        },
    }
}
