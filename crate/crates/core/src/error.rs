use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("stability: {0}")]
    Stability(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("sectoriality: {0}")]
    Sectoriality(String),

    #[error("near-singular resolvent: {0}")]
    NearSingular(String),

    #[error("capability: {0}")]
    Capability(String),

    #[error("domain: {0}")]
    Domain(String),

    #[error("capacity: {0}")]
    Capacity(String),

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
