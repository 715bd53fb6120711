use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("ciphertexts were produced under different parameter sets")]
    ParamMismatch,

    #[error("depth budget exhausted: operation needs level {needed}, budget is {budget}")]
    DepthExhausted { needed: u32, budget: u32 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("layout mismatch: {0}")]
    Layout(String),

    #[error("layer shapes do not chain: {0}")]
    ShapeChain(String),

    #[error("estimated ciphertext memory {estimate_bytes} B exceeds the cap of {cap_bytes} B")]
    CapacityRefused { estimate_bytes: u64, cap_bytes: u64 },

    #[error("range check failed: worst-case magnitude {bound} exceeds {limit}")]
    OverflowRisk { bound: u128, limit: u64 },

    #[error("integer overflow in plaintext oracle")]
    OracleOverflow,

    #[error("malformed input: {0}")]
    Format(String),

    #[error("unknown profile `{0}`")]
    UnknownProfile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            e if e.is_capacity() => ErrorKind::Capacity,
            Error::Io(_) => ErrorKind::Io,
            _ => ErrorKind::Invalid,
        }
    }

    /// True for errors that mean "the request does not fit the resources":
    /// depth, memory cap and overflow certificate refusals.
    pub fn is_capacity(&self) -> bool {
        matches!(
            self,
            Error::DepthExhausted { .. } | Error::CapacityRefused { .. } | Error::OverflowRisk { .. }
        )
    }
}

/// Coarse error class carried across the service boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    /// Depth, memory-cap or overflow refusal.
    Capacity,
    /// Malformed or inconsistent input.
    Invalid,
    Io,
    Internal,
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}
