use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration or timing invariant does not hold.
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },

    /// A trace file could not be decoded.
    #[error("malformed trace ({field}): {reason}")]
    Format { field: String, reason: String },

    /// A demodulation window has too few samples for a three-parameter fit.
    #[error("degenerate window: {samples} samples (need at least 4)")]
    DegenerateWindow { samples: usize },

    /// The fitted beat amplitude in a window is below the configured floor.
    #[error("low signal in window at {center:.4e} s: amplitude {amplitude:.3e} below floor {floor:.3e}")]
    LowSignal { center: f64, amplitude: f64, floor: f64 },

    #[error("usage error: {0}")]
    Usage(String),

    /// A regression without enough independent abscissae.
    #[error("rank deficient fit: {0}")]
    RankDeficient(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn format(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Format {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
