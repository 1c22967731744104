use crate::Matrix;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {found}")]
    Dimension {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// The state norm crossed [`crate::integration::DIVERGENCE_GUARD`].
    #[error("divergence at step {step}: state norm {norm:e} exceeds guard")]
    Divergence { step: usize, norm: f64 },

    #[error("singular {what}{}: |det| = {det:e}", time.map(|t| format!(" at t = {t}")).unwrap_or_default())]
    Singular {
        what: &'static str,
        det: f64,
        time: Option<f64>,
        matrix: Box<Matrix>,
    },

    #[error("iteration did not converge: {0}")]
    NoConvergence(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("validation failed for `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Short machine-readable class used by the command line front end.
    pub fn class(&self) -> &'static str {
        match self {
            Error::Dimension { .. } | Error::InvalidArgument(_) | Error::Unsupported(_) => {
                "argument"
            }
            Error::NonFinite(_) | Error::Divergence { .. } | Error::NoConvergence(_) => "numeric",
            Error::Singular { .. } => "singular",
            Error::Parse { .. } | Error::Validation { .. } => "validation",
            Error::Io(_) => "io",
        }
    }

    /// Attach a simulation time stamp to a singularity error.
    pub fn at_time(self, t: f64) -> Self {
        match self {
            Error::Singular {
                what, det, matrix, ..
            } => Error::Singular {
                what,
                det,
                time: Some(t),
                matrix,
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

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension {
            context,
            expected,
            found,
        })
    }
}
