use hpa_core::dde::DdeError;
use hpa_core::floquet::FloquetError;
use hpa_core::jacobian::JacobianError;
use hpa_core::koopman::KoopmanError;
use hpa_core::numerics::NumericsError;
use thiserror::Error;

/// Failure of a subcommand, grouped by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("did not converge: {0}")]
    NonConvergence(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl CliError {
    /// `2` usage, `3` numeric, `4` non-convergence, `1` anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 2,
            Self::Numeric(_) => 3,
            Self::NonConvergence(_) => 4,
            Self::Io(_) => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

impl From<NumericsError> for CliError {
    fn from(e: NumericsError) -> Self {
        match e {
            NumericsError::NoConvergence { .. } => Self::NonConvergence(e.to_string()),
            NumericsError::InvalidArgument(_) | NumericsError::DimensionMismatch { .. } => Self::Usage(e.to_string()),
            _ => Self::Numeric(e.to_string()),
        }
    }
}

impl From<DdeError> for CliError {
    fn from(e: DdeError) -> Self {
        match e {
            DdeError::InvalidParams(_) | DdeError::InvalidInput(_) | DdeError::StepTooLarge { .. } => {
                Self::Usage(e.to_string())
            }
            DdeError::Divergence { .. } => Self::Numeric(e.to_string()),
            DdeError::NewtonFailed { .. }
            | DdeError::NoLimitCycle { .. }
            | DdeError::PeriodNotConverged { .. }
            | DdeError::ClosureDefect { .. } => Self::NonConvergence(e.to_string()),
        }
    }
}

impl From<JacobianError> for CliError {
    fn from(e: JacobianError) -> Self {
        match e {
            JacobianError::InvalidInput(m) => Self::Usage(m),
            JacobianError::NotStable { .. } => Self::Numeric(e.to_string()),
            JacobianError::NoRoots => Self::NonConvergence(e.to_string()),
            JacobianError::Numerics(n) => n.into(),
            JacobianError::Dde(d) => d.into(),
        }
    }
}

impl From<FloquetError> for CliError {
    fn from(e: FloquetError) -> Self {
        match e {
            FloquetError::InvalidInput(m) => Self::Usage(m),
            FloquetError::Column { source, .. } => source.into(),
            FloquetError::ThresholdInsideSpectrum { .. } => Self::Numeric(e.to_string()),
            FloquetError::Numerics(n) => n.into(),
            FloquetError::Dde(d) => d.into(),
        }
    }
}

impl From<KoopmanError> for CliError {
    fn from(e: KoopmanError) -> Self {
        match e {
            KoopmanError::InvalidInput(m) => Self::Usage(m),
            KoopmanError::Io(m) => Self::Io(m),
            KoopmanError::KMeans(_) => Self::NonConvergence(e.to_string()),
            KoopmanError::EmptyDataset | KoopmanError::ZeroGram | KoopmanError::SpectralRadius { .. } => {
                Self::Numeric(e.to_string())
            }
            KoopmanError::Numerics(n) => n.into(),
            KoopmanError::Dde(d) => d.into(),
        }
    }
}
