use thiserror::Error;

/// Errors raised anywhere in the library.
///
/// Variants map onto the CLI exit codes through [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid discretization: {0}")]
    InvalidDiscretization(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("parameter outside domain: {0}")]
    Domain(String),

    #[error("missing history: {0}")]
    MissingHistory(String),

    #[error("solver diverged after {iterations} iterations (residual norm {residual_norm:e}){context}")]
    SolverDivergence {
        iterations: usize,
        residual_norm: f64,
        context: String,
    },

    #[error("rank deficiency: {0}")]
    RankDeficient(String),

    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("under-sampling: {0}")]
    UnderSampling(String),

    #[error("ill-conditioned system: {0}")]
    Conditioning(String),

    #[error("missing input: {0}")]
    MissingInput(String),

    #[error("empty training set: {0}")]
    EmptyTraining(String),

    #[error("empty test set: {0}")]
    EmptyTest(String),

    #[error("cardinality: {0}")]
    Cardinality(String),

    #[error("wrong entry point: {0}")]
    WrongEntryPoint(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("training failed: {0}")]
    TrainingFailure(String),

    #[error("undefined AR1 coefficient: {0}")]
    UndefinedCoefficient(String),

    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    #[error("inadmissible bound: {0}")]
    InadmissibleBound(String),

    #[error("incompatible artifacts: {0}")]
    Compatibility(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub fn parse(path: impl AsRef<std::path::Path>, message: impl ToString) -> Self {
        Error::Parse {
            path: path.as_ref().display().to_string(),
            message: message.to_string(),
        }
    }

    /// Process exit status for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::SolverDivergence { .. } => 3,
            Error::TrainingFailure(_) => 4,
            Error::Compatibility(_) => 5,
            _ => 2,
        }
    }
}
