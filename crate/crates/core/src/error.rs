use thiserror::Error;

pub type Result<T> = std::result::Result<T, PopInferError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PopInferError {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("covariance is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("linear map is rank deficient: rank {rank} < {rows} rows")]
    RankDeficient { rank: usize, rows: usize },

    #[error("predictability assumption violated: smallest singular value {min_value} < 1")]
    PredictabilityViolated { min_value: f64 },

    #[error("reference KL divergence {value:e} is too small to normalise by")]
    DegenerateReference { value: f64 },

    #[error("samples have zero spread in output dimension {dim}")]
    DegenerateSamples { dim: usize },

    #[error("predicted density underflows at sample {index}; observed mass lies outside the predicted support")]
    NonFiniteWeight { index: usize },

    #[error("evidence estimate is zero: data unsupported by the prior")]
    ZeroEvidence,

    #[error("rejection sampling accepted no samples")]
    AllRejected,

    #[error("parameter {value} outside the model domain [{lower}, {upper}] (component {component})")]
    DomainViolation {
        component: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl PopInferError {
    pub(crate) fn dims(context: &'static str, expected: usize, found: usize) -> Self {
        PopInferError::DimensionMismatch {
            context,
            expected,
            found,
        }
    }

    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            PopInferError::Config(_) | PopInferError::Io(_) | PopInferError::InvalidArgument(_) => 2,
            PopInferError::DimensionMismatch { .. }
            | PopInferError::NotSymmetric { .. }
            | PopInferError::RankDeficient { .. } => 2,
            PopInferError::PredictabilityViolated { .. } | PopInferError::NonFiniteWeight { .. } => 3,
            _ => 4,
        }
    }
}

impl From<std::io::Error> for PopInferError {
    fn from(e: std::io::Error) -> Self {
        PopInferError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for PopInferError {
    fn from(e: serde_json::Error) -> Self {
        PopInferError::Config(e.to_string())
    }
}
