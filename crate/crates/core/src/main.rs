use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ptspec::cli::{run, RunOptions};
use ptspec::config::EngineKind;

#[derive(Parser)]
#[command(
    name = "ptspec",
    version,
    about = "Process-tensor spectra of a three-level open system"
)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a JSON configuration.
    Run {
        config: PathBuf,
        /// Directory holding cached process tensors.
        #[arg(long)]
        pt_cache: Option<PathBuf>,
        /// Engine to run (repeatable); overrides the configured list.
        #[arg(long = "engine")]
        engines: Vec<String>,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Rebuild cached process tensors.
        #[arg(long)]
        force_rebuild_pt: bool,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let Command::Run {
        config,
        pt_cache,
        engines,
        output,
        force_rebuild_pt,
    } = Args::parse().command;
    let result = engines
        .iter()
        .map(|e| e.parse::<EngineKind>())
        .collect::<ptspec::Result<Vec<_>>>()
        .and_then(|engines| {
            run(&RunOptions {
                config,
                pt_cache,
                engines,
                output,
                force_rebuild_pt,
            })
        });
    match result {
        Ok(m) => {
            for f in &m.outputs {
                println!("{}", f.file);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let msg = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{msg}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
