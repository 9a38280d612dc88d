use thiserror::Error;

/// Errors produced anywhere in the solver pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("convergence failure: {message} (best residual {best_residual:e})")]
    Convergence { message: String, best_residual: f64 },

    #[error("singular shift: zero pivot at row {row}")]
    SingularShift { row: usize },

    #[error("insufficient spectrum: captured weight {captured:.4} below {required:.2}")]
    InsufficientSpectrum { captured: f64, required: f64 },

    #[error("no threshold crossing below F0 = {f0_max:e}")]
    NoThreshold { f0_max: f64 },

    #[error("internal error: {0}")]
    Internal(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for failures caused by the numerics rather than the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Convergence { .. }
                | Error::SingularShift { .. }
                | Error::InsufficientSpectrum { .. }
                | Error::NoThreshold { .. }
        )
    }
}
