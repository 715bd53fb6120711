//! File formats for encrypted images and encrypted logits.

use super::{PackedVector, Packing};
use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};
use crate::model::Shape;
use crate::slot::SlotBackend;

const IMAGE_MAGIC: &[u8; 4] = b"PHEI";
const LOGITS_MAGIC: &[u8; 4] = b"PHLG";
const VERSION: u16 = 1;

fn packing_tag(p: Packing) -> u8 {
    match p {
        Packing::Compact => 0,
        Packing::Interleaved => 1,
    }
}

fn packing_from(tag: u8) -> Result<Packing> {
    match tag {
        0 => Ok(Packing::Compact),
        1 => Ok(Packing::Interleaved),
        other => Err(Error::format(format!("unknown packing tag {other}"))),
    }
}

/// An encrypted input image: header plus serialized ciphertexts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncryptedImage {
    pub packing: Packing,
    pub shape: Shape,
    pub slots_used: usize,
    pub scale_bits: u32,
    pub params_hash: u64,
    pub ciphertexts: Vec<Vec<u8>>,
}

impl EncryptedImage {
    pub fn from_packed<B: SlotBackend>(backend: &B, v: &PackedVector<B::Ciphertext>) -> Self {
        EncryptedImage {
            packing: Packing::Compact,
            shape: v.shape,
            slots_used: v.slots_used,
            scale_bits: v.scale_bits,
            params_hash: backend.params().hash(),
            ciphertexts: v.cts.iter().map(|c| backend.encode_ciphertext(c)).collect(),
        }
    }

    pub fn from_interleaved<B: SlotBackend>(backend: &B, shape: Shape, scale_bits: u32, cts: &[B::Ciphertext]) -> Self {
        EncryptedImage {
            packing: Packing::Interleaved,
            shape,
            slots_used: backend.slot_count(),
            scale_bits,
            params_hash: backend.params().hash(),
            ciphertexts: cts.iter().map(|c| backend.encode_ciphertext(c)).collect(),
        }
    }

    pub fn decode_ciphertexts<B: SlotBackend>(&self, backend: &B) -> Result<Vec<B::Ciphertext>> {
        if self.params_hash != backend.params().hash() {
            return Err(Error::ParamMismatch);
        }
        self.ciphertexts.iter().map(|b| backend.decode_ciphertext(b)).collect()
    }

    pub fn to_packed<B: SlotBackend>(&self, backend: &B) -> Result<PackedVector<B::Ciphertext>> {
        if self.packing != Packing::Compact {
            return Err(Error::Layout("image is not in compact packing".into()));
        }
        Ok(PackedVector {
            len: self.shape.len(),
            slots_used: self.slots_used,
            cts: self.decode_ciphertexts(backend)?,
            shape: self.shape,
            scale_bits: self.scale_bits,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(IMAGE_MAGIC, VERSION);
        w.u8(packing_tag(self.packing))
            .u32(self.shape.c as u32)
            .u32(self.shape.h as u32)
            .u32(self.shape.w as u32)
            .u32(self.slots_used as u32)
            .u32(self.scale_bits)
            .u64(self.params_hash)
            .u32(self.ciphertexts.len() as u32);
        for c in &self.ciphertexts {
            w.blob(c);
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (mut r, version) = Reader::new(bytes, IMAGE_MAGIC)?;
        if version != VERSION {
            return Err(Error::format(format!("unsupported encrypted image version {version}")));
        }
        let packing = packing_from(r.u8()?)?;
        let shape = Shape::new(r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
        let slots_used = r.u32()? as usize;
        let scale_bits = r.u32()?;
        let params_hash = r.u64()?;
        let count = r.u32()? as usize;
        let expected = match packing {
            Packing::Compact if slots_used > 0 => shape.len().div_ceil(slots_used),
            Packing::Compact => return Err(Error::format("slots_used is zero")),
            Packing::Interleaved => shape.len(),
        };
        if count != expected {
            return Err(Error::format(format!("{count} ciphertexts for a {shape} image, expected {expected}")));
        }
        let ciphertexts = (0..count).map(|_| r.blob().map(<[u8]>::to_vec)).collect::<Result<_>>()?;
        r.finish()?;
        Ok(EncryptedImage { packing, shape, slots_used, scale_bits, params_hash, ciphertexts })
    }
}

/// Encrypted network outputs plus where each logit lives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncryptedLogits {
    pub packing: Packing,
    pub params_hash: u64,
    /// `(ciphertext, slot)` of each logit.
    pub slot_map: Vec<(u32, u32)>,
    pub ciphertexts: Vec<Vec<u8>>,
}

impl EncryptedLogits {
    pub fn from_packed<B: SlotBackend>(backend: &B, v: &PackedVector<B::Ciphertext>) -> Self {
        let s = v.slots_used;
        EncryptedLogits {
            packing: Packing::Compact,
            params_hash: backend.params().hash(),
            slot_map: (0..v.len).map(|p| ((p / s) as u32, (p % s) as u32)).collect(),
            ciphertexts: v.cts.iter().map(|c| backend.encode_ciphertext(c)).collect(),
        }
    }

    pub fn from_interleaved<B: SlotBackend>(backend: &B, cts: &[B::Ciphertext]) -> Self {
        EncryptedLogits {
            packing: Packing::Interleaved,
            params_hash: backend.params().hash(),
            slot_map: (0..cts.len()).map(|i| (i as u32, 0)).collect(),
            ciphertexts: cts.iter().map(|c| backend.encode_ciphertext(c)).collect(),
        }
    }

    /// Decrypts and reads the logits through the slot map.
    pub fn decrypt<B: SlotBackend>(&self, backend: &B) -> Result<Vec<i64>> {
        if self.params_hash != backend.params().hash() {
            return Err(Error::ParamMismatch);
        }
        let plain = self
            .ciphertexts
            .iter()
            .map(|b| backend.decrypt(&backend.decode_ciphertext(b)?))
            .collect::<Result<Vec<_>>>()?;
        self.slot_map
            .iter()
            .map(|&(c, s)| {
                plain
                    .get(c as usize)
                    .and_then(|p| p.as_slice().get(s as usize))
                    .copied()
                    .ok_or_else(|| Error::format("slot map points outside the ciphertexts"))
            })
            .collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(LOGITS_MAGIC, VERSION);
        w.u8(packing_tag(self.packing)).u64(self.params_hash).u32(self.slot_map.len() as u32);
        for &(c, s) in &self.slot_map {
            w.u32(c).u32(s);
        }
        w.u32(self.ciphertexts.len() as u32);
        for c in &self.ciphertexts {
            w.blob(c);
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (mut r, version) = Reader::new(bytes, LOGITS_MAGIC)?;
        if version != VERSION {
            return Err(Error::format(format!("unsupported logits version {version}")));
        }
        let packing = packing_from(r.u8()?)?;
        let params_hash = r.u64()?;
        let n = r.u32()? as usize;
        let slot_map = (0..n).map(|_| Ok((r.u32()?, r.u32()?))).collect::<Result<Vec<_>>>()?;
        let count = r.u32()? as usize;
        let ciphertexts = (0..count).map(|_| r.blob().map(<[u8]>::to_vec)).collect::<Result<Vec<_>>>()?;
        r.finish()?;
        if slot_map.iter().any(|&(c, _)| c as usize >= count) {
            return Err(Error::format("slot map points outside the ciphertexts"));
        }
        Ok(EncryptedLogits { packing, params_hash, slot_map, ciphertexts })
    }
}
