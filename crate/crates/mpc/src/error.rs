use thiserror::Error;

use crate::PartyId;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MpcError {
    #[error("shape mismatch: {left} lanes/{left_width} bits vs {right} lanes/{right_width} bits")]
    ShapeMismatch {
        left: usize,
        left_width: u32,
        right: usize,
        right_width: u32,
    },
    #[error("value {value:#x} does not fit in {width} bits")]
    WidthOverflow { value: u64, width: u32 },
    #[error("unsupported lane width {0}")]
    BadWidth(u32),
    #[error("replicated shares disagree between {0} and its successor")]
    Integrity(PartyId),
    #[error("transport: no message queued from {from} to {to}")]
    MissingMessage { from: String, to: String },
    #[error("transport: malformed message ({0})")]
    Malformed(&'static str),
}

pub type Result<T> = std::result::Result<T, MpcError>;
