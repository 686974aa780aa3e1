//! Command-line front end: configuration, orchestration of the analyses,
//! provenance sidecars and SVG contour rendering.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod commands;
pub mod config;
pub mod contour;
pub mod error;
pub mod provenance;
pub mod render;

use clap::Parser;

use crate::cli::Cli;
use crate::config::RunConfig;
use crate::error::CliError;

fn execute(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let dir = cli.output_dir.clone().unwrap_or_else(|| cfg.resolved_output_dir());
    for path in commands::run(&cli.command, &cfg, dir)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

/// Parses the command line, runs it and returns the process exit code.
pub fn main_entry() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
