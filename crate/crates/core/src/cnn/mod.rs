//! Image inference over packed ciphertexts.
//!
//! Compact packing flattens a whole image into `⌈L/s⌉` ciphertexts and
//! evaluates each linear layer row by row: segment-wise CMult, AllSum, bias,
//! then a one-hot mask and rotation to place the scalar in the output
//! vector. The interleaved baseline keeps one broadcast ciphertext per value.

mod compact;
mod interleaved;
mod io;
mod plan;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Shape;
use crate::slot::{PlainVec, SlotBackend};

pub use compact::{
    compile_layer, infer, layer_eval, square_activation, CompiledLayer, CompiledNetwork, EvalOptions, Stage, WeightRow,
};
pub use interleaved::{interleaved_infer, pack_image_interleaved, unpack_interleaved};
pub use io::{EncryptedImage, EncryptedLogits};
pub use plan::{plan_compact, plan_interleaved};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Packing {
    Compact,
    Interleaved,
}

impl std::str::FromStr for Packing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "compact" => Ok(Packing::Compact),
            "interleaved" => Ok(Packing::Interleaved),
            other => Err(Error::InvalidParams(format!("unknown packing {other:?}"))),
        }
    }
}

impl std::fmt::Display for Packing {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Packing::Compact => "compact",
            Packing::Interleaved => "interleaved",
        })
    }
}

/// A flat vector spread over `⌈len/s⌉` ciphertexts: logical index `p` is
/// ciphertext `p / s`, slot `p % s`; every other slot is zero.
#[derive(Debug, Clone)]
pub struct PackedVector<C> {
    pub len: usize,
    pub slots_used: usize,
    pub cts: Vec<C>,
    pub shape: Shape,
    pub scale_bits: u32,
}

impl<C> PackedVector<C> {
    pub fn ciphertext_count(&self) -> usize {
        self.cts.len()
    }
}

/// `⌈len/s⌉`.
pub fn packed_count(len: usize, slots_used: usize) -> usize {
    len.div_ceil(slots_used)
}

pub(crate) fn check_slots_used<B: SlotBackend + ?Sized>(backend: &B, s: usize) -> Result<()> {
    if s == 0 || s > backend.slot_count() {
        return Err(Error::InvalidParams(format!(
            "slots_used {s} must be in 1..={}",
            backend.slot_count()
        )));
    }
    Ok(())
}

/// Encrypts `values` in compact layout.
pub fn pack_vector<B: SlotBackend>(
    backend: &B,
    values: &[i64],
    shape: Shape,
    slots_used: usize,
    scale_bits: u32,
) -> Result<PackedVector<B::Ciphertext>> {
    check_slots_used(backend, slots_used)?;
    if values.is_empty() || values.len() != shape.len() {
        return Err(Error::dim(format!("{} values for shape {shape}", values.len())));
    }
    let cts = values
        .chunks(slots_used)
        .map(|chunk| backend.encrypt(&PlainVec::padded(chunk, backend.slot_count())?))
        .collect::<Result<Vec<_>>>()?;
    backend.observe_live(cts.len() as u64);
    Ok(PackedVector { len: values.len(), slots_used, cts, shape, scale_bits })
}

/// Compact packing of an image tensor, flattened channel-major.
pub fn pack_image<B: SlotBackend>(
    backend: &B,
    tensor: &[i64],
    shape: Shape,
    slots_used: usize,
) -> Result<PackedVector<B::Ciphertext>> {
    pack_vector(backend, tensor, shape, slots_used, 0)
}

/// Decrypts a packed vector back to its logical values.
pub fn unpack_vector<B: SlotBackend>(backend: &B, v: &PackedVector<B::Ciphertext>) -> Result<Vec<i64>> {
    let mut out = Vec::with_capacity(v.len);
    for ct in &v.cts {
        let plain = backend.decrypt(ct)?;
        let take = (v.len - out.len()).min(v.slots_used);
        out.extend_from_slice(&plain.as_slice()[..take]);
    }
    Ok(out)
}

/// Index of the largest logit (first on ties).
pub fn argmax(logits: &[i64]) -> usize {
    logits
        .iter()
        .enumerate()
        .fold((0, i64::MIN), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
        .0
}
