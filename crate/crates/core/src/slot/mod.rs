//! The SIMD ciphertext contract every higher layer is written against,
//! plus the exact slot-vector simulator.
//!
//! Slots form one flat cyclic vector of `slot_count` entries over Z_t.
//! Mult and CMult consume one level each; Add and rotations are free.

mod counters;
mod sim;
mod zt;

use std::fmt::Debug;

use serde::{Deserialize, Serialize};

pub use counters::{CostReport, OpCounters};
pub use sim::{SimBackend, SimCiphertext};
pub use zt::PlainModulus;

use crate::error::{Error, Result};
use crate::params::BackendParams;

/// A plaintext slot vector. Values are arbitrary integers and are reduced
/// mod t when consumed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlainVec(pub Vec<i64>);

impl PlainVec {
    pub fn zeros(len: usize) -> Self {
        PlainVec(vec![0; len])
    }

    pub fn broadcast(value: i64, len: usize) -> Self {
        PlainVec(vec![value; len])
    }

    /// One-hot vector with `value` at `index`.
    pub fn one_hot(index: usize, len: usize) -> Self {
        Self::scaled_one_hot(index, 1, len)
    }

    pub fn scaled_one_hot(index: usize, value: i64, len: usize) -> Self {
        let mut v = vec![0; len];
        v[index] = value;
        PlainVec(v)
    }

    /// Pads `values` with zeros up to `len`.
    pub fn padded(values: &[i64], len: usize) -> Result<Self> {
        if values.len() > len {
            return Err(Error::dim(format!("{} values do not fit {len} slots", values.len())));
        }
        let mut v = values.to_vec();
        v.resize(len, 0);
        Ok(PlainVec(v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[i64] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0)
    }
}

/// A levelled SIMD homomorphic backend.
///
/// Implementations must be safe to share across threads; counters are
/// updated with atomic increments so totals do not depend on scheduling.
pub trait SlotBackend: Send + Sync {
    type Ciphertext: Clone + Debug + Send + Sync;

    fn params(&self) -> &BackendParams;
    fn counters(&self) -> &OpCounters;
    fn level(&self, c: &Self::Ciphertext) -> u32;

    fn encrypt(&self, v: &PlainVec) -> Result<Self::Ciphertext>;
    fn decrypt(&self, c: &Self::Ciphertext) -> Result<PlainVec>;

    fn add(&self, a: &Self::Ciphertext, b: &Self::Ciphertext) -> Result<Self::Ciphertext>;
    /// Adds a plaintext vector. Counted as an Add; consumes no level.
    fn add_plain(&self, a: &Self::Ciphertext, w: &PlainVec) -> Result<Self::Ciphertext>;
    fn mult(&self, a: &Self::Ciphertext, b: &Self::Ciphertext) -> Result<Self::Ciphertext>;
    fn cmult(&self, a: &Self::Ciphertext, w: &PlainVec) -> Result<Self::Ciphertext>;
    /// Cyclic left rotation: `out[i] = a[(i + offset) mod slot_count]`.
    fn rotate(&self, a: &Self::Ciphertext, offset: i64) -> Result<Self::Ciphertext>;

    /// CMult by a constant broadcast to every slot.
    fn cmult_scalar(&self, a: &Self::Ciphertext, w: i64) -> Result<Self::Ciphertext> {
        self.cmult(a, &PlainVec::broadcast(w, self.slot_count()))
    }

    fn add_scalar(&self, a: &Self::Ciphertext, w: i64) -> Result<Self::Ciphertext> {
        self.add_plain(a, &PlainVec::broadcast(w, self.slot_count()))
    }

    /// Block sums: slot `j·block` receives the sum of slots `[j·block, (j+1)·block)`.
    fn partial_sum(&self, a: &Self::Ciphertext, block: usize) -> Result<Self::Ciphertext> {
        partial_sum(self, a, block)
    }

    /// Slot 0 receives the sum of slots `[0, region)`; slots at and beyond
    /// `region` must be zero.
    fn all_sum(&self, a: &Self::Ciphertext, region: usize) -> Result<Self::Ciphertext> {
        all_sum(self, a, region)
    }

    fn encode_ciphertext(&self, c: &Self::Ciphertext) -> Vec<u8>;
    fn decode_ciphertext(&self, bytes: &[u8]) -> Result<Self::Ciphertext>;

    fn slot_count(&self) -> usize {
        self.params().slot_count
    }

    fn cost_report(&self) -> CostReport {
        self.counters().report(self.params())
    }

    /// Records the number of ciphertexts resident at a stage boundary.
    fn observe_live(&self, count: u64) {
        self.counters().observe_live(count);
    }

    fn encrypt_zero(&self) -> Result<Self::Ciphertext> {
        self.encrypt(&PlainVec::zeros(self.slot_count()))
    }
}

/// Shift-and-add block summation shared by all backends.
///
/// Doubling windows `W_{2^j}` are built with `⌊log₂ block⌋` rotations; a
/// non-power-of-two block is assembled from its binary expansion as
/// `W_{2^m}(x) + W_{2^j}(x + 2^m) + …`, one extra rotation per set bit.
pub fn partial_sum<B: SlotBackend + ?Sized>(
    backend: &B,
    a: &B::Ciphertext,
    block: usize,
) -> Result<B::Ciphertext> {
    if block == 0 || block > backend.slot_count() {
        return Err(Error::dim(format!(
            "partial_sum block {block} must be in 1..={}",
            backend.slot_count()
        )));
    }
    let top = usize::BITS - 1 - block.leading_zeros();
    let mut windows = Vec::with_capacity(top as usize + 1);
    windows.push(a.clone());
    for j in 0..top {
        let w = windows.last().unwrap();
        let shifted = backend.rotate(w, 1i64 << j)?;
        windows.push(backend.add(w, &shifted)?);
    }
    let mut acc = windows[top as usize].clone();
    let mut offset = 1usize << top;
    for j in (0..top).rev() {
        if block & (1 << j) != 0 {
            let shifted = backend.rotate(&windows[j as usize], offset as i64)?;
            acc = backend.add(&acc, &shifted)?;
            offset += 1 << j;
        }
    }
    Ok(acc)
}

/// Rotate-and-add folding over the next power of two covering `region`.
pub fn all_sum<B: SlotBackend + ?Sized>(
    backend: &B,
    a: &B::Ciphertext,
    region: usize,
) -> Result<B::Ciphertext> {
    if region == 0 || region > backend.slot_count() {
        return Err(Error::dim(format!(
            "all_sum region {region} must be in 1..={}",
            backend.slot_count()
        )));
    }
    let rounds = region.next_power_of_two().trailing_zeros();
    let mut acc = a.clone();
    for j in 0..rounds {
        let shifted = backend.rotate(&acc, 1i64 << j)?;
        acc = backend.add(&acc, &shifted)?;
    }
    Ok(acc)
}

/// Number of rotations `partial_sum` performs for a block size.
pub fn partial_sum_rotations(block: usize) -> u64 {
    let top = usize::BITS - 1 - block.leading_zeros();
    top as u64 + block.count_ones() as u64 - 1
}

/// Number of rotations `all_sum` performs for a region size.
pub fn all_sum_rotations(region: usize) -> u64 {
    region.next_power_of_two().trailing_zeros() as u64
}
