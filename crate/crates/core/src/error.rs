use thiserror::Error;

pub type Result<T> = std::result::Result<T, VcemError>;

#[derive(Debug, Error)]
pub enum VcemError {
    #[error("size mismatch: expected {expected}, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid stabilizer set: {0}")]
    InvalidStabilizers(String),

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("unsupported gate: {0}")]
    UnsupportedGate(String),

    #[error("operator is not Clifford: {0}")]
    NonClifford(String),

    #[error("resource limit: {0}")]
    ResourceLimit(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl VcemError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        VcemError::InvalidArgument(msg.into())
    }

    pub(crate) fn check_size(expected: usize, actual: usize) -> Result<()> {
        if expected == actual {
            Ok(())
        } else {
            Err(VcemError::SizeMismatch { expected, actual })
        }
    }
}
