use thiserror::Error;

/// Errors raised by tree construction, partitioning, compression and the MVP.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("no particles")]
    NoParticles,
    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),
    #[error("level mismatch: {0} vs {1}")]
    LevelMismatch(u32, u32),
    #[error("singular cross matrix{}", cluster.map(|c| format!(" in cluster {c}")).unwrap_or_default())]
    SingularCrossMatrix { cluster: Option<usize> },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
