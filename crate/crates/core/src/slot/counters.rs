use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::params::BackendParams;

/// Snapshot of a session's operation counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostReport {
    pub mult_count: u64,
    pub cmult_count: u64,
    pub add_count: u64,
    pub rotation_count: u64,
    pub encrypt_count: u64,
    pub peak_live_ciphertexts: u64,
    pub max_level_used: u64,
    pub estimated_ciphertext_bytes: u64,
}

impl CostReport {
    /// Counter increments since `earlier`. Peak and level fields are kept
    /// from `self` since they are maxima, not sums.
    pub fn since(&self, earlier: &CostReport) -> CostReport {
        CostReport {
            mult_count: self.mult_count - earlier.mult_count,
            cmult_count: self.cmult_count - earlier.cmult_count,
            add_count: self.add_count - earlier.add_count,
            rotation_count: self.rotation_count - earlier.rotation_count,
            encrypt_count: self.encrypt_count - earlier.encrypt_count,
            ..*self
        }
    }

    /// `(name, value)` pairs in a fixed order, for reports.
    pub fn metrics(&self) -> [(&'static str, u64); 8] {
        [
            ("mult_count", self.mult_count),
            ("cmult_count", self.cmult_count),
            ("add_count", self.add_count),
            ("rotation_count", self.rotation_count),
            ("encrypt_count", self.encrypt_count),
            ("peak_live_ciphertexts", self.peak_live_ciphertexts),
            ("max_level_used", self.max_level_used),
            ("estimated_ciphertext_bytes", self.estimated_ciphertext_bytes),
        ]
    }
}

/// Linearizable operation counters.
#[derive(Debug, Default)]
pub struct OpCounters {
    mult: AtomicU64,
    cmult: AtomicU64,
    add: AtomicU64,
    rotation: AtomicU64,
    encrypt: AtomicU64,
    peak_live: AtomicU64,
    max_level: AtomicU64,
}

impl OpCounters {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn count_mult(&self) {
        self.mult.fetch_add(1, Ordering::Relaxed);
    }

    pub fn count_cmult(&self) {
        self.cmult.fetch_add(1, Ordering::Relaxed);
    }

    pub fn count_add(&self) {
        self.add.fetch_add(1, Ordering::Relaxed);
    }

    pub fn count_rotation(&self) {
        self.rotation.fetch_add(1, Ordering::Relaxed);
    }

    pub fn count_encrypt(&self) {
        self.encrypt.fetch_add(1, Ordering::Relaxed);
    }

    pub fn observe_level(&self, level: u32) {
        self.max_level.fetch_max(level as u64, Ordering::Relaxed);
    }

    pub fn observe_live(&self, count: u64) {
        self.peak_live.fetch_max(count, Ordering::Relaxed);
    }

    pub fn reset(&self) {
        for c in [
            &self.mult,
            &self.cmult,
            &self.add,
            &self.rotation,
            &self.encrypt,
            &self.peak_live,
            &self.max_level,
        ] {
            c.store(0, Ordering::Relaxed);
        }
    }

    pub fn report(&self, params: &BackendParams) -> CostReport {
        let peak = self.peak_live.load(Ordering::Relaxed);
        CostReport {
            mult_count: self.mult.load(Ordering::Relaxed),
            cmult_count: self.cmult.load(Ordering::Relaxed),
            add_count: self.add.load(Ordering::Relaxed),
            rotation_count: self.rotation.load(Ordering::Relaxed),
            encrypt_count: self.encrypt.load(Ordering::Relaxed),
            peak_live_ciphertexts: peak,
            max_level_used: self.max_level.load(Ordering::Relaxed),
            estimated_ciphertext_bytes: peak * params.ciphertext_bytes(),
        }
    }
}
