use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("{what} = {value} is outside the domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },
    /// A model or configuration parameter violates an invariant.
    #[error("invalid parameter: {0}")]
    Validation(&'static str),
    #[error("{what} did not converge after {iterations} iterations")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
    },
    #[error("covariance matrix is not positive definite (jitter up to {max_jitter:e} tried)")]
    NotPositiveDefinite { max_jitter: f64 },
    #[error("option price {price} is at or below intrinsic value {intrinsic}")]
    BelowIntrinsic { price: f64, intrinsic: f64 },
    #[error("option price {price} is at or above the spot {spot}")]
    AboveSpot { price: f64, spot: f64 },
    #[error("numerical failure: {0}")]
    Numeric(&'static str),
}

impl Error {
    /// True for failures of a numerical procedure on valid input, as
    /// opposed to rejected input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. } | Error::NotPositiveDefinite { .. } | Error::Numeric(_)
        )
    }

    pub(crate) fn domain(what: &'static str, value: f64, domain: &'static str) -> Self {
        Error::Domain {
            what,
            value,
            domain,
        }
    }
}
