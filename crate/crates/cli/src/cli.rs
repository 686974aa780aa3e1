use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::config::Overlay;

#[derive(Debug, Parser)]
#[command(name = "hpa", version, about = "Stability and transient analysis of the ACTH-cortisol delay model")]
pub struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(short, long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, overriding the configuration and HPA_OUTPUT_DIR.
    #[arg(short, long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Target {
    Jacobian,
    Floquet,
    Koopman,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Integrate from a constant history.
    Simulate,
    /// Equilibrium of the model.
    FixedPoint,
    /// One period of the limit cycle.
    LimitCycle,
    /// Stability indicators along the cycle.
    JacobianSweep,
    /// Pseudospectra of the delay pencil at selected base times.
    JacobianGrid,
    /// Multipliers, pseudospectrum and Kreiss constant of the period map.
    Floquet,
    /// Koopman eigenvalues, pseudospectrum, eigenfunctions and Kreiss constant.
    Koopman,
    /// Scan the CRH drive h.
    SweepH {
        #[arg(long, value_enum)]
        target: Target,
    },
    /// Contour plot of a grid CSV as SVG.
    Render {
        /// `re,im,<value>` grid.
        grid: PathBuf,
        /// CSV whose first two columns are eigenvalues to mark.
        #[arg(long)]
        eigs: Option<PathBuf>,
        #[arg(long, value_enum)]
        overlay: Option<Overlay>,
        /// SVG path (default: `<output_dir>/<grid stem>.svg`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Simulate => "simulate",
            Self::FixedPoint => "fixed-point",
            Self::LimitCycle => "limit-cycle",
            Self::JacobianSweep => "jacobian-sweep",
            Self::JacobianGrid => "jacobian-grid",
            Self::Floquet => "floquet",
            Self::Koopman => "koopman",
            Self::SweepH { .. } => "sweep-h",
            Self::Render { .. } => "render",
        }
    }
}
