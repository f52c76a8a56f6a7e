use crate::analytics::AnalyticsError;
use crate::corpus::CorpusError;
use crate::embeddings::EmbeddingError;
use crate::eval::EvalError;
use crate::factorization::FactorError;
use crate::hpo::HpoError;
use crate::mlp::MlpError;

/// Failure of a command, classified by the exit code it maps to.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Bad flags, configuration or parameter values.
    #[error("{0}")]
    Usage(String),
    /// Missing, malformed or inconsistent input data.
    #[error("{0}")]
    Data(String),
    /// Anything that goes wrong while computing or writing results.
    #[error("{0}")]
    Runtime(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 1,
            Error::Data(_) => 2,
            Error::Runtime(_) => 3,
        }
    }

    /// Prefixes the message, keeping the classification.
    pub fn context(self, what: impl std::fmt::Display) -> Self {
        match self {
            Error::Usage(m) => Error::Usage(format!("{what}: {m}")),
            Error::Data(m) => Error::Data(format!("{what}: {m}")),
            Error::Runtime(m) => Error::Runtime(format!("{what}: {m}")),
        }
    }

    pub fn io(path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        Error::Runtime(format!("{}: {e}", path.display()))
    }
}

impl From<CorpusError> for Error {
    fn from(e: CorpusError) -> Self {
        Error::Data(e.to_string())
    }
}

impl From<EmbeddingError> for Error {
    fn from(e: EmbeddingError) -> Self {
        Error::Data(e.to_string())
    }
}

impl From<FactorError> for Error {
    fn from(e: FactorError) -> Self {
        match e {
            FactorError::InvalidParams(_) => Error::Usage(e.to_string()),
            FactorError::EmptyInput | FactorError::Shape(_) | FactorError::Embedding(_) => Error::Data(e.to_string()),
            FactorError::Singular { .. } => Error::Runtime(e.to_string()),
        }
    }
}

impl From<MlpError> for Error {
    fn from(e: MlpError) -> Self {
        match e {
            MlpError::InvalidConfig(_) | MlpError::StepOutOfRange { .. } => Error::Usage(e.to_string()),
            MlpError::Shape(_) | MlpError::EmptyData(_) | MlpError::Eval(_) | MlpError::Checkpoint { .. } => {
                Error::Data(e.to_string())
            }
            MlpError::NonFinite(_) => Error::Runtime(e.to_string()),
        }
    }
}

impl From<EvalError> for Error {
    fn from(e: EvalError) -> Self {
        Error::Data(e.to_string())
    }
}

impl From<AnalyticsError> for Error {
    fn from(e: AnalyticsError) -> Self {
        match e {
            AnalyticsError::InvalidParameter(_) => Error::Usage(e.to_string()),
            AnalyticsError::Io(_) => Error::Runtime(e.to_string()),
            _ => Error::Data(e.to_string()),
        }
    }
}

impl From<HpoError> for Error {
    fn from(e: HpoError) -> Self {
        match e {
            HpoError::InvalidSpace(_) | HpoError::Budget(_) => Error::Usage(e.to_string()),
            HpoError::Log { .. } => Error::Data(e.to_string()),
            HpoError::NoTrials => Error::Runtime(e.to_string()),
            HpoError::Training(inner) => inner.into(),
        }
    }
}
