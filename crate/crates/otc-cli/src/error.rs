//! Error taxonomy of the front end, mapped onto process exit codes:
//! 2 for configuration problems, 3 for solver failures, 4 for numerical
//! failures during integration or eigenvalue extraction.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Numerical(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl From<otc_core::equilibrium::EquilibriumError> for CliError {
    fn from(e: otc_core::equilibrium::EquilibriumError) -> Self {
        use otc_core::equilibrium::EquilibriumError as E;
        match e {
            E::WrongKind { .. } | E::UnsupportedAssetCount(_) | E::Model(_) => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Solver(e.to_string()),
        }
    }
}

impl From<otc_core::valuation::ValuationError> for CliError {
    fn from(e: otc_core::valuation::ValuationError) -> Self {
        use otc_core::valuation::ValuationError as E;
        match e {
            E::SingularMatrix(_) => CliError::Solver(e.to_string()),
            E::KindMismatch { .. } | E::InvalidInput(_) | E::Model(_) => {
                CliError::Config(e.to_string())
            }
            E::Dynamics(d) => CliError::from(d),
        }
    }
}

impl From<otc_core::dynamics::DynamicsError> for CliError {
    fn from(e: otc_core::dynamics::DynamicsError) -> Self {
        use otc_core::dynamics::DynamicsError as E;
        match e {
            E::InfeasibleDuringIntegration { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<otc_core::stability::StabilityError> for CliError {
    fn from(e: otc_core::stability::StabilityError) -> Self {
        use otc_core::stability::StabilityError as E;
        match e {
            E::NoConvergence(_) => CliError::Numerical(e.to_string()),
            E::WrongKind { .. } => CliError::Config(e.to_string()),
        }
    }
}

impl From<otc_core::mcsim::McError> for CliError {
    fn from(e: otc_core::mcsim::McError) -> Self {
        use otc_core::mcsim::McError as E;
        match e {
            E::InconsistentInitialCounts(_) | E::InvalidInput(_) => CliError::Config(e.to_string()),
            E::TimeGridMismatch { .. } => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<otc_core::ModelError> for CliError {
    fn from(e: otc_core::ModelError) -> Self {
        CliError::Config(e.to_string())
    }
}
