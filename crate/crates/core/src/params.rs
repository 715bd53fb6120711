//! Parameter sets and the named profiles they are loaded from.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const BUILTIN_PROFILES: &str = include_str!("../profiles.toml");

/// Parameters shared by every backend implementing the slot contract.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendParams {
    #[serde(default)]
    pub name: String,
    pub ring_dimension: usize,
    pub coeff_modulus_bits: u32,
    pub plain_modulus: u64,
    pub slot_count: usize,
    pub depth_budget: u32,
    #[serde(default)]
    pub security_claim_bits: u32,
    /// Depth at which the FV backend has been checked to decrypt correctly.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fv_verified_depth: Option<u32>,
}

impl BackendParams {
    pub fn validate(&self) -> Result<()> {
        if !self.ring_dimension.is_power_of_two() {
            return Err(Error::InvalidParams(format!(
                "ring dimension {} is not a power of two",
                self.ring_dimension
            )));
        }
        if self.slot_count == 0 || self.slot_count > self.ring_dimension {
            return Err(Error::InvalidParams(format!(
                "slot count {} must be in 1..={}",
                self.slot_count, self.ring_dimension
            )));
        }
        if self.plain_modulus < 3 || self.plain_modulus % 2 == 0 {
            return Err(Error::InvalidParams(format!(
                "plain modulus {} must be odd and at least 3",
                self.plain_modulus
            )));
        }
        if self.plain_modulus >= 1 << 62 {
            return Err(Error::InvalidParams("plain modulus must be below 2^62".into()));
        }
        Ok(())
    }

    /// Same parameters with a different depth budget.
    pub fn with_depth_budget(&self, depth_budget: u32) -> Self {
        BackendParams { depth_budget, ..self.clone() }
    }

    /// Largest magnitude representable by a centered residue, ⌊(t−1)/2⌋.
    pub fn half_modulus(&self) -> u64 {
        (self.plain_modulus - 1) / 2
    }

    /// Size in bytes of one two-polynomial ciphertext at these parameters.
    pub fn ciphertext_bytes(&self) -> u64 {
        2 * self.ring_dimension as u64 * self.coeff_modulus_bits as u64 / 8
    }

    /// Stable 64-bit digest used to tag serialized ciphertexts.
    pub fn hash(&self) -> u64 {
        let canonical = format!(
            "n={};qbits={};t={};slots={}",
            self.ring_dimension, self.coeff_modulus_bits, self.plain_modulus, self.slot_count
        );
        let digest = Sha256::digest(canonical.as_bytes());
        u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
    }
}

/// A set of named profiles.
#[derive(Debug, Clone)]
pub struct Profiles {
    entries: BTreeMap<String, BackendParams>,
}

impl Profiles {
    pub fn builtin() -> Self {
        Self::from_toml(BUILTIN_PROFILES).expect("built-in profiles parse")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: BTreeMap<String, BackendParams> =
            toml::from_str(text).map_err(|e| Error::format(e.to_string()))?;
        let mut entries = BTreeMap::new();
        for (name, mut params) in raw {
            params.name = name.clone();
            params.validate()?;
            entries.insert(name, params);
        }
        Ok(Profiles { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn get(&self, name: &str) -> Result<BackendParams> {
        self.entries
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnknownProfile(name.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &BackendParams> {
        self.entries.values()
    }
}

/// Shorthand for a built-in profile.
pub fn profile(name: &str) -> Result<BackendParams> {
    Profiles::builtin().get(name)
}
