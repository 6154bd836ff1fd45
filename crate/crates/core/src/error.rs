use thiserror::Error;

use goram_mpc::MpcError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Mpc(#[from] MpcError),
    #[error("vertex id {id} outside 1..={max}")]
    VertexOutOfRange { id: u64, max: u64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("share bundles disagree: {0}")]
    BundleMismatch(String),
    #[error("share file: {0}")]
    Format(String),
    #[error("edge list line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
