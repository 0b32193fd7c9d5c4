use thiserror::Error;

/// Errors produced by the library and the command-line front end.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in layer {layer}")]
    NonFinite { layer: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite energy at batch index {index}")]
    NonFiniteEnergy { index: usize },

    #[error("diverged at step {step}")]
    Diverged { step: usize },

    #[error("degenerate sample: {0}")]
    Degenerate(String),

    #[error("non-finite state in rollout at m={m}, n={n}, t={t}")]
    NonFiniteState { m: usize, n: usize, t: usize },

    #[error("non-finite gradient: {0}")]
    NonFiniteGradient(String),

    #[error("{path}: {message}")]
    Format { path: String, message: String },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{0}")]
    Usage(String),

    /// Help or version text was printed; not a failure.
    #[error("help requested")]
    Help,
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    /// Short machine-readable category used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Shape(_) => "shape",
            Error::NonFinite { .. } => "non_finite",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::NonFiniteEnergy { .. } => "non_finite_energy",
            Error::Diverged { .. } => "diverged",
            Error::Degenerate(_) => "degenerate",
            Error::NonFiniteState { .. } => "non_finite_state",
            Error::NonFiniteGradient(_) => "non_finite_gradient",
            Error::Format { .. } => "format",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Usage(_) => "usage",
            Error::Help => "help",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
