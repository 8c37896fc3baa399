use alloc::string::String;

/// Errors raised by the learning pipeline and its numerical kernels.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Malformed input: shapes, ranges, asymmetry, non-triangular lengths.
    #[error("validation error: {0}")]
    Validation(String),
    /// A matrix that must be inverted (or inverse-rooted) is too close to singular.
    #[error("conditioning error: {what} (value {value:e})")]
    Conditioning { what: String, value: f64 },
    /// Random fixture generation could not meet its rank requirements.
    #[error("generation error: {0}")]
    Generation(String),
    /// Latent dimension discovery found no usable spectrum.
    #[error("rank discovery error: {0}")]
    Discovery(String),
    /// The quadratic-regression feature space exceeds the configured cap.
    #[error("feature dimension {features} exceeds cap {cap}")]
    FeatureCap { features: usize, cap: usize },
}

impl Error {
    /// True for failures of a numerical nature rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Conditioning { .. } | Error::Discovery(_) | Error::Generation(_))
    }

    pub(crate) fn conditioning(what: impl Into<String>, value: f64) -> Self {
        Error::Conditioning {
            what: what.into(),
            value,
        }
    }
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! bail_validation {
    ($($arg:tt)*) => {
        return Err($crate::error::Error::Validation(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail_validation;
