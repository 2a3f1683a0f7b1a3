use ionsim::chain_statics::StaticsError;
use ionsim::fkim::FkError;
use ionsim::fock_engine::FockError;
use ionsim::foundation::FoundationError;
use ionsim::hopfield::HopfieldError;
use ionsim::phonon_lattice::LatticeError;
use ionsim::relativity::RelativityError;
use ionsim::spin_coupling::CouplingError;
use ionsim::spin_dynamics::SpinError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Capacity(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn schema(path: impl Into<String>, message: impl ToString) -> Self {
        CliError::Schema { path: path.into(), message: message.to_string() }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io { context: context.into(), source }
    }

    pub fn category(&self) -> &'static str {
        match self {
            CliError::Schema { .. } => "schema",
            CliError::Numerical(_) => "numerical",
            CliError::Capacity(_) => "capacity",
            CliError::Io { .. } => "io",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema { .. } => 2,
            CliError::Numerical(_) => 3,
            CliError::Capacity(_) => 4,
            CliError::Io { .. } => 1,
        }
    }
}

// Library errors caused by parameter values are reported against the params table.
fn param(e: impl ToString) -> CliError {
    CliError::schema("params", e)
}

fn numerical(e: impl ToString) -> CliError {
    CliError::Numerical(e.to_string())
}

impl From<FoundationError> for CliError {
    fn from(e: FoundationError) -> Self {
        param(e)
    }
}

impl From<StaticsError> for CliError {
    fn from(e: StaticsError) -> Self {
        match e {
            StaticsError::NoConvergence { .. } | StaticsError::Unstable(_) => numerical(e),
            _ => param(e),
        }
    }
}

impl From<CouplingError> for CliError {
    fn from(e: CouplingError) -> Self {
        match e {
            CouplingError::Dimension { .. } => numerical(e),
            _ => param(e),
        }
    }
}

impl From<SpinError> for CliError {
    fn from(e: SpinError) -> Self {
        match e {
            SpinError::Capacity { .. } => CliError::Capacity(e.to_string()),
            SpinError::Accuracy { .. } | SpinError::Linalg(_) | SpinError::Dimension { .. } => numerical(e),
            _ => param(e),
        }
    }
}

impl From<HopfieldError> for CliError {
    fn from(e: HopfieldError) -> Self {
        match e {
            HopfieldError::Shape { .. } | HopfieldError::Entries => numerical(e),
            _ => param(e),
        }
    }
}

impl From<LatticeError> for CliError {
    fn from(e: LatticeError) -> Self {
        match e {
            LatticeError::Capacity { .. } => CliError::Capacity(e.to_string()),
            LatticeError::Field(_) | LatticeError::Dimension(_) => param(e),
            _ => numerical(e),
        }
    }
}

impl From<FkError> for CliError {
    fn from(e: FkError) -> Self {
        match e {
            FkError::Config(_) | FkError::TooFew(_) => param(e),
            FkError::Statics(s) => s.into(),
            _ => numerical(e),
        }
    }
}

impl From<FockError> for CliError {
    fn from(e: FockError) -> Self {
        match e {
            FockError::Truncation { .. } => CliError::Capacity(e.to_string()),
            FockError::Norm(_) => numerical(e),
            _ => param(e),
        }
    }
}

impl From<RelativityError> for CliError {
    fn from(e: RelativityError) -> Self {
        match e {
            RelativityError::Parameter(_) | RelativityError::Singular => param(e),
            RelativityError::Fock(f) => f.into(),
            _ => numerical(e),
        }
    }
}
