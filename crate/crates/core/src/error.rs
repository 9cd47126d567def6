use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("mass matrix is not symmetric positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("degenerate series (zero variance)")]
    DegenerateSeries,

    #[error("degenerate chains (zero within-chain variance)")]
    DegenerateChains,

    #[error("non-PD Hessian at q (smallest eigenvalue estimate {0})")]
    NonPdHessian(f64),

    #[error("unknown target {0:?}")]
    UnknownTarget(String),

    #[error("config error at line {line}: {message}")]
    ConfigParse { line: usize, message: String },

    #[error("config error in `{key}`: {message}")]
    ConfigValidation { key: String, message: String },

    #[error("chain {chain}: {source}")]
    Chain {
        chain: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("dimension {dim}: {source}")]
    Metric {
        dim: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}
