use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("model is not causal: largest AR root modulus {max_modulus:.6} exceeds {limit:.6}")]
    NonCausal { max_modulus: f64, limit: f64 },

    #[error("model is not invertible: largest MA root modulus {max_modulus:.6} exceeds {limit:.6}")]
    NonInvertible { max_modulus: f64, limit: f64 },

    #[error("innovation covariance is not positive semidefinite: eigenvalue {eigenvalue:e}")]
    NotPositiveSemidefinite { eigenvalue: f64 },

    #[error("propagation is not contractive: estimated decay ratio {ratio:.6} >= 1")]
    NonContractive { ratio: f64 },

    #[error("degenerate criterion: residual second-moment matrix is singular")]
    DegenerateCriterion,

    #[error("residual covariance is singular")]
    SingularCovariance,

    #[error("retained sample too small: {retained} indices, need more than {required}")]
    SampleTooSmall { retained: usize, required: usize },

    #[error("subset selection collapsed: {retained} indices retained, need more than {required}")]
    SelectionCollapse { retained: usize, required: usize },

    #[error("all {0} replications failed to converge")]
    AllReplicationsFailed(usize),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
