use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid crystal: {}", .0.join("; "))]
    InvalidCrystal(Vec<String>),

    #[error("invalid perturbation: {0}")]
    InvalidPerturbation(String),

    #[error("unknown builtin crystal `{0}`")]
    UnknownBuiltin(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("eigensolver did not converge at xi = {xi:?}")]
    EigenNonConvergence { xi: Vec<f64> },

    #[error("eigensolver did not converge: {0}")]
    SolverNonConvergence(String),

    #[error("contour too close to the spectrum: eigenvalue {eigenvalue} at distance {distance:e}")]
    ContourTooClose { eigenvalue: f64, distance: f64 },

    #[error("operator was not built from the given crystal and perturbation: {0}")]
    ProvenanceMismatch(String),

    #[error("dimension {dimension} exceeds the limit {limit} for {what}")]
    TooLarge {
        what: &'static str,
        dimension: usize,
        limit: usize,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Errors caused by bad input, as opposed to numerical breakdown.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::InvalidCrystal(_)
                | Error::InvalidPerturbation(_)
                | Error::UnknownBuiltin(_)
                | Error::InvalidArgument(_)
                | Error::ProvenanceMismatch(_)
                | Error::Io(_)
        )
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Parse {
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
