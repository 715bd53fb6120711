//! Textbook FV over an RNS basis of 60-bit NTT primes.

pub mod arith;
mod backend;
pub mod conformance;
pub mod encoding;
pub mod io;
pub mod ntt;
pub mod poly;
pub mod scheme;

pub use backend::{effective_params, FvBackend};
pub use scheme::{EvaluationKeys, FvCiphertext, FvContext, FvParams, KeySet, SecretKey};
