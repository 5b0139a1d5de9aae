//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative scheme failed to converge or produced non-finite values.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A Gram matrix is too ill-conditioned to invert at the requested cap.
    /// `admissible` is the largest leading subfamily that stays under the cap.
    #[error(
        "conditioning {cond:.3e} exceeds cap {cap:.3e}; \
         largest admissible truncation: {admissible} functions"
    )]
    Conditioning {
        cond: f64,
        cap: f64,
        admissible: usize,
    },

    /// The Kalman rank condition fails, so control synthesis is refused.
    #[error("system not controllable: {0}")]
    Controllability(String),

    /// Invalid configuration or parameter combination.
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
