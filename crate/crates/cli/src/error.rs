use lhvbell::data::{ContextError, DataError};
use lhvbell::fit::FitError;
use lhvbell::inequality::InequalityError;
use lhvbell::lhvmodel::ModelError;
use lhvbell::montecarlo::SimulationError;

/// A failed command, split by exit code: bad input or a failed model
/// validation exits 2, a numerical failure exits 3.
#[derive(Debug)]
pub enum CliError {
    Input(anyhow::Error),
    Numeric(anyhow::Error),
}

impl CliError {
    pub fn input(msg: impl std::fmt::Display) -> Self {
        CliError::Input(anyhow::anyhow!("{msg}"))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            CliError::Input(e) | CliError::Numeric(e) => e,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Input(e.into())
    }
}

impl From<ContextError> for CliError {
    fn from(e: ContextError) -> Self {
        CliError::Input(e.into())
    }
}

impl From<FitError> for CliError {
    fn from(e: FitError) -> Self {
        match e {
            FitError::NonUniformGrid | FitError::UnknownExclusion { .. } | FitError::MissingAngle { .. } => {
                CliError::Input(e.into())
            }
            _ => CliError::Numeric(e.into()),
        }
    }
}

impl From<InequalityError> for CliError {
    fn from(e: InequalityError) -> Self {
        match e {
            InequalityError::Fit(f) => f.into(),
            InequalityError::Data(d) => d.into(),
            InequalityError::EtaOutOfRange(_) => CliError::Input(e.into()),
            _ => CliError::Numeric(e.into()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Quadrature(_) => CliError::Numeric(e.into()),
            _ => CliError::Input(e.into()),
        }
    }
}

impl From<SimulationError> for CliError {
    fn from(e: SimulationError) -> Self {
        CliError::Input(e.into())
    }
}
