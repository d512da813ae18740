use thiserror::Error;

/// Error type for all fallible operations in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("direction is not a unit vector (norm = {norm})")]
    InvalidDirection { norm: f64 },

    #[error("invalid parameter `{name}`: {message}")]
    InvalidParameter { name: &'static str, message: String },

    #[error(
        "sigma = 0: transport derivatives need smooth strictly increasing CDFs, \
         which atomic measures only acquire after Gaussian smoothing"
    )]
    DegenerateSigma,

    #[error("target density underflow at transported point x = {at}")]
    DensityUnderflow { at: f64 },

    #[error(
        "exact transport oracle limit: weights admit no common equal-weight refinement \
         with at most {cap} atoms per side"
    )]
    NonCommensurableWeights { cap: usize },

    #[error(
        "start point is not a lambda-maximizer: max G over the space is {max_g}, \
         G(start) = {start_g}, lambda = {lambda}"
    )]
    StartNotNearMaximal {
        max_g: f64,
        start_g: f64,
        lambda: f64,
    },

    #[error("solver did not stabilize within {max_iter} iterations")]
    NoConvergence { max_iter: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
