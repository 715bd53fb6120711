use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};
use crate::params::BackendParams;

use super::{CostReport, OpCounters, PlainModulus, PlainVec, SlotBackend};

const MAGIC: &[u8; 4] = b"PHSC";
const VERSION: u16 = 1;

/// Simulated ciphertext: the exact slot residues plus level metadata.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimCiphertext {
    slots: Vec<u64>,
    level: u32,
    params_hash: u64,
}

impl SimCiphertext {
    pub fn level(&self) -> u32 {
        self.level
    }

    /// Raw residues in [0, t).
    pub fn residues(&self) -> &[u64] {
        &self.slots
    }
}

/// Exact slot-vector simulator with depth and operation accounting.
#[derive(Debug)]
pub struct SimBackend {
    params: BackendParams,
    hash: u64,
    zt: PlainModulus,
    counters: OpCounters,
}

impl SimBackend {
    pub fn new(params: BackendParams) -> Result<Self> {
        params.validate()?;
        Ok(SimBackend {
            hash: params.hash(),
            zt: PlainModulus::new(params.plain_modulus),
            params,
            counters: OpCounters::new(),
        })
    }

    pub fn reset_counters(&self) {
        self.counters.reset();
    }

    fn check_len(&self, v: &PlainVec) -> Result<()> {
        if v.len() != self.params.slot_count {
            return Err(Error::dim(format!(
                "vector of length {} given to a backend with {} slots",
                v.len(),
                self.params.slot_count
            )));
        }
        Ok(())
    }

    fn check_same(&self, a: &SimCiphertext, b: &SimCiphertext) -> Result<()> {
        if a.params_hash != self.hash || b.params_hash != self.hash {
            return Err(Error::ParamMismatch);
        }
        Ok(())
    }

    fn next_level(&self, level: u32) -> Result<u32> {
        let needed = level + 1;
        if needed > self.params.depth_budget {
            return Err(Error::DepthExhausted { needed, budget: self.params.depth_budget });
        }
        self.counters.observe_level(needed);
        Ok(needed)
    }

    fn make(&self, slots: Vec<u64>, level: u32) -> SimCiphertext {
        SimCiphertext { slots, level, params_hash: self.hash }
    }

    fn reduce_plain(&self, w: &PlainVec) -> Result<Vec<u64>> {
        self.check_len(w)?;
        Ok(w.0.iter().map(|&v| self.zt.reduce(v)).collect())
    }
}

impl SlotBackend for SimBackend {
    type Ciphertext = SimCiphertext;

    fn params(&self) -> &BackendParams {
        &self.params
    }

    fn counters(&self) -> &OpCounters {
        &self.counters
    }

    fn level(&self, c: &SimCiphertext) -> u32 {
        c.level
    }

    fn encrypt(&self, v: &PlainVec) -> Result<SimCiphertext> {
        let slots = self.reduce_plain(v)?;
        self.counters.count_encrypt();
        Ok(self.make(slots, 0))
    }

    fn decrypt(&self, c: &SimCiphertext) -> Result<PlainVec> {
        if c.params_hash != self.hash {
            return Err(Error::ParamMismatch);
        }
        if c.level > self.params.depth_budget {
            return Err(Error::DepthExhausted { needed: c.level, budget: self.params.depth_budget });
        }
        Ok(PlainVec(c.slots.iter().map(|&r| self.zt.center(r)).collect()))
    }

    fn add(&self, a: &SimCiphertext, b: &SimCiphertext) -> Result<SimCiphertext> {
        self.check_same(a, b)?;
        let slots = a.slots.iter().zip(&b.slots).map(|(&x, &y)| self.zt.add(x, y)).collect();
        self.counters.count_add();
        Ok(self.make(slots, a.level.max(b.level)))
    }

    fn add_plain(&self, a: &SimCiphertext, w: &PlainVec) -> Result<SimCiphertext> {
        let w = self.reduce_plain(w)?;
        let slots = a.slots.iter().zip(&w).map(|(&x, &y)| self.zt.add(x, y)).collect();
        self.counters.count_add();
        Ok(self.make(slots, a.level))
    }

    fn mult(&self, a: &SimCiphertext, b: &SimCiphertext) -> Result<SimCiphertext> {
        self.check_same(a, b)?;
        let level = self.next_level(a.level.max(b.level))?;
        let slots = a.slots.iter().zip(&b.slots).map(|(&x, &y)| self.zt.mul(x, y)).collect();
        self.counters.count_mult();
        Ok(self.make(slots, level))
    }

    fn cmult(&self, a: &SimCiphertext, w: &PlainVec) -> Result<SimCiphertext> {
        let w = self.reduce_plain(w)?;
        let level = self.next_level(a.level)?;
        let slots = a.slots.iter().zip(&w).map(|(&x, &y)| self.zt.mul(x, y)).collect();
        self.counters.count_cmult();
        Ok(self.make(slots, level))
    }

    fn cmult_scalar(&self, a: &SimCiphertext, w: i64) -> Result<SimCiphertext> {
        let w = self.zt.reduce(w);
        let level = self.next_level(a.level)?;
        let slots = a.slots.iter().map(|&x| self.zt.mul(x, w)).collect();
        self.counters.count_cmult();
        Ok(self.make(slots, level))
    }

    fn add_scalar(&self, a: &SimCiphertext, w: i64) -> Result<SimCiphertext> {
        let w = self.zt.reduce(w);
        let slots = a.slots.iter().map(|&x| self.zt.add(x, w)).collect();
        self.counters.count_add();
        Ok(self.make(slots, a.level))
    }

    fn rotate(&self, a: &SimCiphertext, offset: i64) -> Result<SimCiphertext> {
        let n = self.params.slot_count;
        let k = offset.rem_euclid(n as i64) as usize;
        let mut slots = Vec::with_capacity(n);
        slots.extend_from_slice(&a.slots[k..]);
        slots.extend_from_slice(&a.slots[..k]);
        self.counters.count_rotation();
        Ok(self.make(slots, a.level))
    }

    fn encode_ciphertext(&self, c: &SimCiphertext) -> Vec<u8> {
        let mut w = Writer::new(MAGIC, VERSION);
        w.u64(c.params_hash).u32(c.slots.len() as u32).u32(c.level).u64s(&c.slots);
        w.finish()
    }

    fn decode_ciphertext(&self, bytes: &[u8]) -> Result<SimCiphertext> {
        let (mut r, version) = Reader::new(bytes, MAGIC)?;
        if version != VERSION {
            return Err(Error::format(format!("unsupported ciphertext version {version}")));
        }
        let params_hash = r.u64()?;
        if params_hash != self.hash {
            return Err(Error::ParamMismatch);
        }
        let slot_count = r.u32()? as usize;
        if slot_count != self.params.slot_count {
            return Err(Error::dim(format!("ciphertext has {slot_count} slots")));
        }
        let level = r.u32()?;
        let slots = r.u64s(slot_count)?;
        r.finish()?;
        if slots.iter().any(|&s| s >= self.params.plain_modulus) {
            return Err(Error::format("slot residue out of range"));
        }
        Ok(SimCiphertext { slots, level, params_hash })
    }

    fn cost_report(&self) -> CostReport {
        self.counters.report(&self.params)
    }
}
