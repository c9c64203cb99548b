use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed scenario document: {0}")]
    Parse(String),

    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },

    #[error("argument out of range: {0}")]
    Domain(String),

    #[error("interference series did not converge within {terms} terms (relative tolerance {tolerance:e})")]
    Convergence { tolerance: f64, terms: usize },

    #[error("received power is not monotone decreasing on [{from:.2}, {to:.2}] m; coverage inversion refused")]
    NonMonotone { from: f64, to: f64 },

    #[error("no primary transmitter found after {attempts} resampled drops")]
    NoTransmitter { attempts: u32 },
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Configuration and argument errors, as opposed to numerical failures.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parse(_) | Error::Invalid { .. } | Error::Domain(_)
        )
    }

    pub fn is_numeric(&self) -> bool {
        !self.is_validation()
    }
}
