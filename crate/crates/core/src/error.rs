use thiserror::Error;

/// Errors raised by the solvers, evaluators and diagnostics.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),

    /// The tensor is not strictly inside the range of the constitutive map.
    /// `distance` is the signed distance estimate to the range boundary
    /// (negative outside the closure).
    #[error("tensor outside the range interior (distance estimate {distance:.3e}, margin {margin:.1e})")]
    OutOfRange { distance: f64, margin: f64 },

    #[error("accuracy target missed in {context}: achieved estimate {estimate:.3e}")]
    Accuracy { context: String, estimate: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    /// Pure Neumann data violating `∫f + ∫g = 0`.
    #[error("incompatible pure-Neumann data: residual {residual:.3e} exceeds tolerance {tolerance:.3e}")]
    Compatibility { residual: f64, tolerance: f64 },

    #[error("boundary datum violates the safety strain condition: {0}")]
    SafetyStrain(String),

    #[error("solver failed: {message}")]
    Solver { message: String, history: Vec<f64> },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("oracle failure: {0}")]
    Oracle(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl Error {
    pub(crate) fn solver(message: impl Into<String>, history: Vec<f64>) -> Self {
        Error::Solver {
            message: message.into(),
            history,
        }
    }

    /// Prefix the message of solver errors with extra context, e.g. the
    /// regularization index that failed.
    pub fn with_context(self, context: &str) -> Self {
        match self {
            Error::Solver { message, history } => Error::Solver {
                message: format!("{context}: {message}"),
                history,
            },
            other => other,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
