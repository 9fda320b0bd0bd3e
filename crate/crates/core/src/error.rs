use thiserror::Error;

/// Errors raised by model construction, sampling and the estimators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("tail inversion did not converge for log-tail level {level} after {iterations} iterations")]
    InversionFailed { level: f64, iterations: usize },

    #[error("quadrature did not reach tolerance: estimate {estimate}, error {error}")]
    Quadrature { estimate: f64, error: f64 },

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("every one of the {0} simulated excursions was truncated")]
    AllTruncated(u64),

    #[error("no excursion exceeded level {level} in {samples} samples")]
    NoConditioningEvents { level: f64, samples: u64 },

    #[error("exact computation infeasible: {0}")]
    CapOverflow(String),

    #[error("tail underflows log-space range at x = {0}")]
    TailUnderflow(f64),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check(cond: bool, name: &'static str, value: f64, reason: &'static str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason,
        })
    }
}
