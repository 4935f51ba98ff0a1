use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("data index {index} out of range for {len} data points")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("unsupported model: {0}")]
    UnsupportedModel(&'static str),

    #[error("missing required argument: {0}")]
    MissingArgument(&'static str),

    #[error(
        "approximate control-variate weights need O(N d^2) Hessian work and are not \
         recommended for d = {dim} > {limit}; set the high-dimension override to proceed"
    )]
    DimensionGuard { dim: usize, limit: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical divergence at step {step}")]
    Diverged { step: usize },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
