use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A model parameter violates an invariant. `field` is the config path.
    #[error("{field}: {reason}")]
    InvalidParams { field: String, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("reducible generator: {0}")]
    Reducible(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("non-finite value in {what} at step {step}")]
    NonFinite { what: &'static str, step: usize },

    #[error("degenerate observation correlation (rho = {0})")]
    DegenerateCorrelation(f64),

    #[error("filter mass collapsed to zero at step {step}")]
    FilterCollapse { step: usize },

    #[error("stability bound unattainable: {0}")]
    Stability(String),

    #[error("parameter fingerprint mismatch: {0} vs {1}")]
    FingerprintMismatch(String, String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParams {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
