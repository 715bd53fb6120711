//! Compact SIMD packing for homomorphic linear algebra and CNN inference.
//!
//! * [`slot`]: the SIMD backend contract and the exact simulator.
//! * [`fv`]: a textbook FV scheme implementing the same contract.
//! * [`hemat`]: encrypted matrices in row/column (compact) layouts.
//! * [`cnn`]: compact image packing and layer evaluation, plus the
//!   interleaved baseline.
//! * [`model`]: quantized models, plaintext oracles and range certificates.
//! * [`wire`]: JSON bodies exchanged with the inference service.

pub(crate) mod codec;
pub mod cnn;
pub mod error;
pub mod fv;
pub mod hemat;
pub mod model;
pub mod params;
pub mod slot;
pub mod wire;

pub use error::{Error, ErrorKind, Result};
pub use params::{profile, BackendParams, Profiles};
