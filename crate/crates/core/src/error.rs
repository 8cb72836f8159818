use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid size: {0}")]
    InvalidSize(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("negative or non-finite rate {rate} for ({from}, {to})")]
    InvalidRate { from: usize, to: usize, rate: f64 },

    #[error("self-rate ({0}, {0}) is not allowed")]
    SelfRate(usize),

    #[error("duplicate rate entry ({0}, {1})")]
    DuplicateRate(usize, usize),

    #[error("site {site} out of range for {n_sites} sites")]
    SiteOutOfRange { site: usize, n_sites: usize },

    #[error("kernel is reducible; supply a stationary distribution explicitly")]
    UnsupportedReducible,

    #[error("supplied distribution is not stationary (residual {0:e})")]
    NotStationary(f64),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid flip probability {0} (must lie in (0, 1/2])")]
    InvalidLabel(f64),

    #[error("outside the bound's validity range: {0}")]
    OutOfValidity(String),

    #[error("insufficient samples: {got} < {need}")]
    InsufficientSamples { got: usize, need: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
