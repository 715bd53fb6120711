use std::sync::{Arc, Mutex};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::io;
use super::scheme::{
    add_ct, add_plain_ct, decrypt_poly, encrypt_poly, keygen, mul_ct, mul_plain_ct, noise_budget_bits,
    power_of_two_offsets, rotate_ct, EvaluationKeys, FvCiphertext, FvContext, FvParams, KeySet, SecretKey,
};
use crate::error::{Error, Result};
use crate::params::BackendParams;
use crate::slot::{CostReport, OpCounters, PlainVec, SlotBackend};

/// FV implementation of the slot contract.
///
/// A server-side instance holds only evaluation keys; `decrypt` then fails.
/// The depth budget is capped at the profile's verified FV depth.
pub struct FvBackend {
    params: BackendParams,
    hash: u64,
    ctx: Arc<FvContext>,
    keys: EvaluationKeys,
    secret: Option<SecretKey>,
    rng: Mutex<ChaCha20Rng>,
    counters: OpCounters,
}

impl std::fmt::Debug for FvBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FvBackend")
            .field("params", &self.params)
            .field("galois_offsets", &self.keys.galois.keys().collect::<Vec<_>>())
            .field("has_secret", &self.secret.is_some())
            .finish()
    }
}

/// Budget enforced by the FV backend for a profile.
pub fn effective_params(params: &BackendParams) -> BackendParams {
    let budget = params.fv_verified_depth.map_or(params.depth_budget, |v| v.min(params.depth_budget));
    params.with_depth_budget(budget)
}

impl FvBackend {
    pub fn context_for(params: &BackendParams) -> Result<Arc<FvContext>> {
        params.validate()?;
        Ok(Arc::new(FvContext::new(FvParams::from_backend(params)?)?))
    }

    /// Generates a fresh key set with power-of-two rotation keys plus
    /// `extra_offsets`.
    pub fn generate(params: &BackendParams, seed: u64, extra_offsets: &[usize]) -> Result<(Self, KeySet)> {
        let ctx = Self::context_for(params)?;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut offsets = power_of_two_offsets(params.slot_count);
        offsets.extend_from_slice(extra_offsets);
        let keys = keygen(&ctx, &offsets, &mut rng);
        let backend = Self::from_parts(params, ctx, keys.eval.clone(), Some(keys.secret.clone()), rng)?;
        Ok((backend, keys))
    }

    pub fn with_keys(
        params: &BackendParams,
        ctx: Arc<FvContext>,
        keys: EvaluationKeys,
        secret: Option<SecretKey>,
        seed: u64,
    ) -> Result<Self> {
        Self::from_parts(params, ctx, keys, secret, ChaCha20Rng::seed_from_u64(seed))
    }

    fn from_parts(
        params: &BackendParams,
        ctx: Arc<FvContext>,
        keys: EvaluationKeys,
        secret: Option<SecretKey>,
        rng: ChaCha20Rng,
    ) -> Result<Self> {
        if ctx.n() != params.ring_dimension || ctx.params().plain_modulus != params.plain_modulus {
            return Err(Error::ParamMismatch);
        }
        Ok(FvBackend {
            params: effective_params(params),
            hash: params.hash(),
            ctx,
            keys,
            secret,
            rng: Mutex::new(rng),
            counters: OpCounters::new(),
        })
    }

    pub fn context(&self) -> &Arc<FvContext> {
        &self.ctx
    }

    pub fn eval_keys(&self) -> &EvaluationKeys {
        &self.keys
    }

    pub fn secret_key(&self) -> Option<&SecretKey> {
        self.secret.as_ref()
    }

    pub fn params_hash(&self) -> u64 {
        self.hash
    }

    pub fn reset_counters(&self) {
        self.counters.reset();
    }

    /// Remaining noise budget in bits (needs the secret key).
    pub fn noise_budget(&self, c: &FvCiphertext) -> Result<f64> {
        self.check(c)?;
        Ok(noise_budget_bits(&self.ctx, self.secret()?, c))
    }

    fn secret(&self) -> Result<&SecretKey> {
        self.secret
            .as_ref()
            .ok_or_else(|| Error::InvalidParams("this backend holds no secret key".into()))
    }

    fn check(&self, c: &FvCiphertext) -> Result<()> {
        if c.params_hash != self.hash {
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

    fn encode(&self, v: &PlainVec) -> Result<Vec<u64>> {
        self.ctx.encoder().encode(v.as_slice())
    }
}

impl SlotBackend for FvBackend {
    type Ciphertext = FvCiphertext;

    fn params(&self) -> &BackendParams {
        &self.params
    }

    fn counters(&self) -> &OpCounters {
        &self.counters
    }

    fn level(&self, c: &FvCiphertext) -> u32 {
        c.level
    }

    fn encrypt(&self, v: &PlainVec) -> Result<FvCiphertext> {
        let plain = self.encode(v)?;
        let (c0, c1) = {
            let mut rng = self.rng.lock().expect("rng lock poisoned");
            encrypt_poly(&self.ctx, &self.keys.public, &plain, &mut *rng)
        };
        self.counters.count_encrypt();
        Ok(FvCiphertext { c0, c1, level: 0, params_hash: self.hash })
    }

    fn decrypt(&self, c: &FvCiphertext) -> Result<PlainVec> {
        self.check(c)?;
        let plain = decrypt_poly(&self.ctx, self.secret()?, &c.c0, &c.c1);
        Ok(PlainVec(self.ctx.encoder().decode(&plain)))
    }

    fn add(&self, a: &FvCiphertext, b: &FvCiphertext) -> Result<FvCiphertext> {
        self.check(a)?;
        self.check(b)?;
        self.counters.count_add();
        Ok(add_ct(&self.ctx, a, b))
    }

    fn add_plain(&self, a: &FvCiphertext, w: &PlainVec) -> Result<FvCiphertext> {
        self.check(a)?;
        let plain = self.encode(w)?;
        self.counters.count_add();
        Ok(add_plain_ct(&self.ctx, a, &plain))
    }

    fn mult(&self, a: &FvCiphertext, b: &FvCiphertext) -> Result<FvCiphertext> {
        self.check(a)?;
        self.check(b)?;
        let level = self.next_level(a.level.max(b.level))?;
        self.counters.count_mult();
        Ok(mul_ct(&self.ctx, &self.keys.relin, a, b, level))
    }

    fn cmult(&self, a: &FvCiphertext, w: &PlainVec) -> Result<FvCiphertext> {
        self.check(a)?;
        let plain = self.encode(w)?;
        let level = self.next_level(a.level)?;
        self.counters.count_cmult();
        Ok(mul_plain_ct(&self.ctx, a, &plain, level))
    }

    /// A constant polynomial scales every slot of both batching rows.
    fn cmult_scalar(&self, a: &FvCiphertext, w: i64) -> Result<FvCiphertext> {
        self.check(a)?;
        let level = self.next_level(a.level)?;
        let mut plain = vec![0u64; self.ctx.n()];
        plain[0] = self.ctx.encoder().plain_modulus().reduce_i64(w);
        self.counters.count_cmult();
        Ok(mul_plain_ct(&self.ctx, a, &plain, level))
    }

    fn rotate(&self, a: &FvCiphertext, offset: i64) -> Result<FvCiphertext> {
        self.check(a)?;
        let out = rotate_ct(&self.ctx, &self.keys, a, offset)?;
        self.counters.count_rotation();
        Ok(out)
    }

    fn encode_ciphertext(&self, c: &FvCiphertext) -> Vec<u8> {
        io::encode_ciphertext(c)
    }

    fn decode_ciphertext(&self, bytes: &[u8]) -> Result<FvCiphertext> {
        io::decode_ciphertext(bytes, &self.ctx, self.hash)
    }

    fn cost_report(&self) -> CostReport {
        self.counters.report(&self.params)
    }
}
