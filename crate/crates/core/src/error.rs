use thiserror::Error;

/// Errors raised by the simulation kernels and the CLI front end.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    /// The representative estimation MSE reached the channel variance, so the
    /// link carries no usable channel knowledge. Callers treat the rate as 0.
    #[error("unusable link: max MSE {max_mse} >= channel variance {variance}")]
    UnusableLink { max_mse: f64, variance: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn numeric(msg: impl Into<String>) -> Error {
    Error::NumericFailure(msg.into())
}
