//! Textbook FV: keys, encryption, and the homomorphic operations.
//!
//! Ciphertext products are computed exactly in an extended CRT basis
//! Q ∪ P, then scaled by t/q using mixed-radix digits: with the Q digits
//! first, `x = x_low + q·x_high`, so `round(t·x/q) = t·x_high +
//! round(t·x_low/q)` and only the fractional part needs floating point.

use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint};
use rand::Rng;

use super::arith::{is_prime, ntt_primes, Modulus};
use super::encoding::BatchEncoder;
use super::poly::{prefix_products_mod, sample_gaussian, sample_ternary, RnsBasis, RnsPoly};
use crate::error::{Error, Result};
use crate::params::BackendParams;

const PRIME_BITS: u32 = 60;

/// FV parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct FvParams {
    pub ring_dimension: usize,
    pub plain_modulus: u64,
    pub coeff_moduli: Vec<u64>,
    /// Base-2^w digit width used by relinearization and rotation keys.
    pub decomposition_bits: u32,
    pub sigma: f64,
}

impl FvParams {
    pub fn new(
        ring_dimension: usize,
        plain_modulus: u64,
        coeff_prime_count: usize,
        decomposition_bits: u32,
    ) -> Result<Self> {
        if !ring_dimension.is_power_of_two() || ring_dimension < 8 {
            return Err(Error::InvalidParams(format!(
                "ring dimension {ring_dimension} must be a power of two ≥ 8"
            )));
        }
        if coeff_prime_count == 0 {
            return Err(Error::InvalidParams("need at least one coefficient prime".into()));
        }
        let params = FvParams {
            ring_dimension,
            plain_modulus,
            coeff_moduli: ntt_primes(PRIME_BITS, ring_dimension, coeff_prime_count, &[]),
            decomposition_bits,
            sigma: 3.2,
        };
        params.validate()?;
        Ok(params)
    }

    /// FV parameters matching a slot-backend profile.
    pub fn from_backend(p: &BackendParams) -> Result<Self> {
        if p.slot_count != p.ring_dimension / 2 {
            return Err(Error::InvalidParams(format!(
                "FV batching exposes {} slots, profile asks for {}",
                p.ring_dimension / 2,
                p.slot_count
            )));
        }
        let count = (p.coeff_modulus_bits as usize).div_ceil(PRIME_BITS as usize);
        Self::new(p.ring_dimension, p.plain_modulus, count, 20)
    }

    pub fn validate(&self) -> Result<()> {
        let two_n = 2 * self.ring_dimension as u64;
        if self.plain_modulus % two_n != 1 {
            return Err(Error::InvalidParams(format!(
                "plain modulus {} is not 1 mod 2n = {two_n}; batching needs a 2n-th root of unity",
                self.plain_modulus
            )));
        }
        if !is_prime(self.plain_modulus) {
            return Err(Error::InvalidParams(format!(
                "plain modulus {} is not prime",
                self.plain_modulus
            )));
        }
        if self.decomposition_bits == 0 || self.decomposition_bits > PRIME_BITS {
            return Err(Error::InvalidParams("decomposition bits must be in 1..=60".into()));
        }
        if self.coeff_moduli.iter().any(|&q| q <= self.plain_modulus) {
            return Err(Error::InvalidParams("coefficient primes must exceed t".into()));
        }
        Ok(())
    }

    pub fn slot_count(&self) -> usize {
        self.ring_dimension / 2
    }

    pub fn coeff_modulus_bits(&self) -> f64 {
        self.coeff_moduli.iter().map(|&q| (q as f64).log2()).sum()
    }
}

/// Precomputed tables for one parameter set.
#[derive(Debug)]
pub struct FvContext {
    params: FvParams,
    q: RnsBasis,
    ext: RnsBasis,
    encoder: BatchEncoder,
    t: Modulus,
    q_big: BigUint,
    delta: Vec<u64>,
    /// Mixed-radix digits of ⌊q/2⌋ and ⌊qp/2⌋ for sign tests.
    half_q_digits: Vec<u64>,
    half_qp_digits: Vec<u64>,
    /// For each P prime: Π_{j<i} q_j mod p, and q mod p.
    lift_prefix: Vec<Vec<u64>>,
    lift_q_mod: Vec<u64>,
    /// For each Q prime: Π_{j<k} p_j mod q_i, t mod q_i, t·P mod q_i.
    scale_prefix: Vec<Vec<u64>>,
    scale_t: Vec<u64>,
    scale_tp: Vec<u64>,
    /// (q/q_i)^{-1} mod q_i.
    punctured_inv: Vec<u64>,
    /// gadget[i][j] = (q/q_i)·2^{wj} mod q_i.
    gadget: Vec<Vec<u64>>,
}

impl FvContext {
    pub fn new(params: FvParams) -> Result<Self> {
        params.validate()?;
        let n = params.ring_dimension;
        let q = RnsBasis::new(n, &params.coeff_moduli);
        // the tensor needs |x| < n·q²/2 to be recoverable in Q ∪ P
        let needed_bits = 2.0 * q.bits() + (n as f64).log2() + 2.0;
        let mut ext_primes = params.coeff_moduli.clone();
        let mut extra = 0;
        while RnsBasis::new(n, &ext_primes).bits() < needed_bits {
            extra += 1;
            ext_primes = params.coeff_moduli.clone();
            ext_primes.extend(ntt_primes(PRIME_BITS, n, extra, &params.coeff_moduli));
        }
        let ext = RnsBasis::new(n, &ext_primes);
        let lq = q.len();

        let q_big: BigUint = params.coeff_moduli.iter().map(|&p| BigUint::from(p)).product();
        let p_big: BigUint = ext_primes[lq..].iter().map(|&p| BigUint::from(p)).product();
        let delta_big = &q_big / params.plain_modulus;
        let delta = residues_of(&delta_big, q.moduli());

        let half_q_digits = digits_of(&(&q_big >> 1u32), &q);
        let half_qp_digits = digits_of(&((&q_big * &p_big) >> 1u32), &ext);

        let lift_prefix = ext.moduli()[lq..]
            .iter()
            .map(|pk| prefix_products_mod(q.moduli(), pk))
            .collect();
        let lift_q_mod = ext.moduli()[lq..]
            .iter()
            .map(|pk| residue_of(&q_big, pk))
            .collect();

        let t = Modulus::new(params.plain_modulus);
        let scale_prefix = q
            .moduli()
            .iter()
            .map(|qi| prefix_products_mod(&ext.moduli()[lq..], qi))
            .collect();
        let scale_t = q.moduli().iter().map(|qi| qi.reduce(params.plain_modulus)).collect();
        let scale_tp = q
            .moduli()
            .iter()
            .map(|qi| qi.mul(qi.reduce(params.plain_modulus), residue_of(&p_big, qi)))
            .collect();

        let w = params.decomposition_bits;
        let digits = PRIME_BITS.div_ceil(w) as usize;
        let mut punctured_inv = Vec::with_capacity(lq);
        let mut gadget = Vec::with_capacity(lq);
        for qi in q.moduli() {
            let punctured = residue_of(&(&q_big / qi.value()), qi);
            punctured_inv.push(qi.inv(punctured));
            gadget.push(
                (0..digits)
                    .map(|j| qi.mul(punctured, qi.pow(2, w as u64 * j as u64)))
                    .collect(),
            );
        }

        Ok(FvContext {
            encoder: BatchEncoder::new(n, params.plain_modulus),
            params,
            q,
            ext,
            t,
            q_big,
            delta,
            half_q_digits,
            half_qp_digits,
            lift_prefix,
            lift_q_mod,
            scale_prefix,
            scale_t,
            scale_tp,
            punctured_inv,
            gadget,
        })
    }

    pub fn params(&self) -> &FvParams {
        &self.params
    }

    pub fn encoder(&self) -> &BatchEncoder {
        &self.encoder
    }

    pub fn basis(&self) -> &RnsBasis {
        &self.q
    }

    pub fn n(&self) -> usize {
        self.params.ring_dimension
    }

    fn digits_per_prime(&self) -> usize {
        self.gadget[0].len()
    }

    /// Plaintext polynomial (mod t) as centered coefficients in R_q, NTT form.
    fn plain_to_ring(&self, plain: &[u64]) -> RnsPoly {
        let half = self.t.value() / 2;
        let signed: Vec<i64> = plain
            .iter()
            .map(|&c| if c > half { c as i64 - self.t.value() as i64 } else { c as i64 })
            .collect();
        RnsPoly::from_signed(&self.q, &signed).ntt_form(&self.q)
    }

    /// Δ·m in coefficient form.
    fn scaled_message(&self, plain: &[u64]) -> RnsPoly {
        let mut m = RnsPoly::from_signed(
            &self.q,
            &plain.iter().map(|&c| c as i64).collect::<Vec<_>>(),
        );
        m.mul_scalar_rns(&self.delta, &self.q);
        m
    }

    /// Centered lift of a coefficient-form Q polynomial into Q ∪ P.
    fn lift_to_ext(&self, a: &RnsPoly) -> RnsPoly {
        debug_assert!(!a.ntt);
        let lq = self.q.len();
        let n = self.n();
        let mut out = a.residues.clone();
        out.extend((lq..self.ext.len()).map(|_| vec![0u64; n]));
        let mut residues = vec![0u64; lq];
        let mut digits = vec![0u64; lq];
        for c in 0..n {
            for i in 0..lq {
                residues[i] = a.residues[i][c];
            }
            self.q.garner(&residues, &mut digits);
            let negative = greater_than(&digits, &self.half_q_digits);
            for (k, pk) in self.ext.moduli()[lq..].iter().enumerate() {
                let prefix = &self.lift_prefix[k];
                let mut acc = 0u64;
                for i in 0..lq {
                    acc = pk.add(acc, pk.mul(pk.reduce(digits[i]), prefix[i]));
                }
                if negative {
                    acc = pk.sub(acc, self.lift_q_mod[k]);
                }
                out[lq + k][c] = acc;
            }
        }
        RnsPoly { residues: out, ntt: false }
    }

    /// `round(t·x/q) mod q` for a coefficient-form Q ∪ P polynomial.
    fn scale_down(&self, x: &RnsPoly) -> RnsPoly {
        debug_assert!(!x.ntt);
        let lq = self.q.len();
        let le = self.ext.len();
        let n = self.n();
        let t = self.t.value() as f64;
        let mut out = vec![vec![0u64; n]; lq];
        let mut residues = vec![0u64; le];
        let mut digits = vec![0u64; le];
        for c in 0..n {
            for i in 0..le {
                residues[i] = x.residues[i][c];
            }
            self.ext.garner(&residues, &mut digits);
            let negative = greater_than(&digits, &self.half_qp_digits);
            let mut frac = 0.0f64;
            for i in 0..lq {
                frac = (frac + digits[i] as f64) / self.q.moduli()[i].value() as f64;
            }
            let rounded = (t * frac).round() as u64;
            for (i, qi) in self.q.moduli().iter().enumerate() {
                let prefix = &self.scale_prefix[i];
                let mut high = 0u64;
                for k in 0..le - lq {
                    high = qi.add(high, qi.mul(qi.reduce(digits[lq + k]), prefix[k]));
                }
                let mut y = qi.add(qi.mul(high, self.scale_t[i]), qi.reduce(rounded));
                if negative {
                    y = qi.sub(y, self.scale_tp[i]);
                }
                out[i][c] = y;
            }
        }
        RnsPoly { residues: out, ntt: false }
    }

    /// Gadget decomposition of a coefficient-form polynomial; each digit is
    /// returned in NTT form over Q.
    fn decompose(&self, c: &RnsPoly) -> Vec<RnsPoly> {
        debug_assert!(!c.ntt);
        let w = self.params.decomposition_bits;
        let mask = (1u64 << w) - 1;
        let mut out = Vec::with_capacity(self.q.len() * self.digits_per_prime());
        for (i, qi) in self.q.moduli().iter().enumerate() {
            let inv = self.punctured_inv[i];
            let inv_shoup = qi.shoup(inv);
            let d: Vec<u64> = c.residues[i].iter().map(|&x| qi.mul_shoup(x, inv, inv_shoup)).collect();
            for j in 0..self.digits_per_prime() {
                let shift = w * j as u32;
                let digit: Vec<u64> = d.iter().map(|&x| (x >> shift) & mask).collect();
                let residues = self.q.moduli().iter().map(|m| digit.iter().map(|&v| m.reduce(v)).collect()).collect();
                out.push(RnsPoly { residues, ntt: false }.ntt_form(&self.q));
            }
        }
        out
    }
}

fn residue_of(x: &BigUint, m: &Modulus) -> u64 {
    (x % m.value()).try_into().expect("residue fits u64")
}

fn residues_of(x: &BigUint, moduli: &[Modulus]) -> Vec<u64> {
    moduli.iter().map(|m| residue_of(x, m)).collect()
}

fn digits_of(x: &BigUint, basis: &RnsBasis) -> Vec<u64> {
    let residues = residues_of(x, basis.moduli());
    let mut digits = vec![0; basis.len()];
    basis.garner(&residues, &mut digits);
    digits
}

/// Mixed-radix comparison, most significant digit last.
fn greater_than(a: &[u64], b: &[u64]) -> bool {
    for (x, y) in a.iter().rev().zip(b.iter().rev()) {
        if x != y {
            return x > y;
        }
    }
    false
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecretKey {
    pub(crate) coeffs: Vec<i64>,
    pub(crate) ntt: RnsPoly,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicKey {
    pub(crate) p0: RnsPoly,
    pub(crate) p1: RnsPoly,
}

/// Encryptions of `gadget_ij · s'` under `s`, NTT form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeySwitchKey {
    pub(crate) parts: Vec<(RnsPoly, RnsPoly)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GaloisKey {
    pub galois_element: usize,
    pub(crate) key: KeySwitchKey,
}

/// Public material a server needs to evaluate: encryption, relinearization
/// and rotation keys.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvaluationKeys {
    pub public: PublicKey,
    pub relin: KeySwitchKey,
    /// Keyed by left-rotation offset in [0, n/2).
    pub galois: BTreeMap<usize, GaloisKey>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeySet {
    pub secret: SecretKey,
    pub eval: EvaluationKeys,
}

/// Offsets 1, 2, 4, …, n/4: enough to compose every row rotation.
pub fn power_of_two_offsets(slot_count: usize) -> Vec<usize> {
    (0..slot_count.trailing_zeros()).map(|b| 1 << b).collect()
}

pub fn keygen<R: Rng + ?Sized>(ctx: &FvContext, rotation_offsets: &[usize], rng: &mut R) -> KeySet {
    let basis = &ctx.q;
    let n = ctx.n();
    let coeffs = sample_ternary(n, rng);
    let s = RnsPoly::from_signed(basis, &coeffs).ntt_form(basis);
    let secret = SecretKey { coeffs, ntt: s.clone() };

    let a = RnsPoly::uniform(basis, rng);
    let e = RnsPoly::from_signed(basis, &sample_gaussian(n, ctx.params.sigma, rng)).ntt_form(basis);
    let mut p0 = a.mul(&s, basis);
    p0.add_assign(&e, basis);
    p0.neg_assign(basis);
    let public = PublicKey { p0, p1: a };

    let s2 = s.mul(&s, basis);
    let relin = switch_key(ctx, &secret, &s2, rng);

    let slot_count = ctx.encoder.slot_count();
    let mut galois = BTreeMap::new();
    for &offset in rotation_offsets {
        let offset = offset % slot_count;
        if offset == 0 || galois.contains_key(&offset) {
            continue;
        }
        let g = ctx.encoder.galois_element(offset);
        let rotated = RnsPoly::from_signed(basis, &secret.coeffs)
            .automorphism(g, basis)
            .ntt_form(basis);
        galois.insert(offset, GaloisKey { galois_element: g, key: switch_key(ctx, &secret, &rotated, rng) });
    }
    KeySet { secret, eval: EvaluationKeys { public, relin, galois } }
}

fn switch_key<R: Rng + ?Sized>(ctx: &FvContext, sk: &SecretKey, target: &RnsPoly, rng: &mut R) -> KeySwitchKey {
    let basis = &ctx.q;
    let n = ctx.n();
    let mut parts = Vec::new();
    for i in 0..basis.len() {
        for &g in &ctx.gadget[i] {
            let a = RnsPoly::uniform(basis, rng);
            let e = RnsPoly::from_signed(basis, &sample_gaussian(n, ctx.params.sigma, rng)).ntt_form(basis);
            let mut k0 = a.mul(&sk.ntt, basis);
            k0.add_assign(&e, basis);
            k0.neg_assign(basis);
            let m = &basis.moduli()[i];
            let gs = m.shoup(g);
            for (acc, &v) in k0.residues[i].iter_mut().zip(&target.residues[i]) {
                *acc = m.add(*acc, m.mul_shoup(v, g, gs));
            }
            parts.push((k0, a));
        }
    }
    KeySwitchKey { parts }
}

/// A two-component FV ciphertext in coefficient form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FvCiphertext {
    pub(crate) c0: RnsPoly,
    pub(crate) c1: RnsPoly,
    pub(crate) level: u32,
    pub(crate) params_hash: u64,
}

impl FvCiphertext {
    pub fn level(&self) -> u32 {
        self.level
    }
}

/// Encrypts plaintext polynomial coefficients (mod t).
pub fn encrypt_poly<R: Rng + ?Sized>(ctx: &FvContext, pk: &PublicKey, plain: &[u64], rng: &mut R) -> (RnsPoly, RnsPoly) {
    let basis = &ctx.q;
    let n = ctx.n();
    let u = RnsPoly::from_signed(basis, &sample_ternary(n, rng)).ntt_form(basis);
    let e1 = RnsPoly::from_signed(basis, &sample_gaussian(n, ctx.params.sigma, rng));
    let e2 = RnsPoly::from_signed(basis, &sample_gaussian(n, ctx.params.sigma, rng));
    let mut c0 = pk.p0.mul(&u, basis).coeff_form(basis);
    c0.add_assign(&e1, basis);
    c0.add_assign(&ctx.scaled_message(plain), basis);
    let mut c1 = pk.p1.mul(&u, basis).coeff_form(basis);
    c1.add_assign(&e2, basis);
    (c0, c1)
}

/// `c0 + c1·s` in coefficient form.
fn phase(ctx: &FvContext, sk: &SecretKey, c0: &RnsPoly, c1: &RnsPoly) -> RnsPoly {
    let basis = &ctx.q;
    let mut x = c1.clone().ntt_form(basis).mul(&sk.ntt, basis).coeff_form(basis);
    x.add_assign(c0, basis);
    x
}

/// Plaintext polynomial coefficients (mod t).
pub fn decrypt_poly(ctx: &FvContext, sk: &SecretKey, c0: &RnsPoly, c1: &RnsPoly) -> Vec<u64> {
    let x = phase(ctx, sk, c0, c1);
    let lq = ctx.q.len();
    let t = ctx.t.value();
    let mut residues = vec![0u64; lq];
    let mut digits = vec![0u64; lq];
    (0..ctx.n())
        .map(|c| {
            for i in 0..lq {
                residues[i] = x.residues[i][c];
            }
            ctx.q.garner(&residues, &mut digits);
            let mut frac = 0.0f64;
            for i in 0..lq {
                frac = (frac + digits[i] as f64) / ctx.q.moduli()[i].value() as f64;
            }
            ((t as f64 * frac).round() as u64) % t
        })
        .collect()
}

/// Remaining invariant-noise budget in bits; decryption is correct while
/// it stays positive.
pub fn noise_budget_bits(ctx: &FvContext, sk: &SecretKey, ct: &FvCiphertext) -> f64 {
    let x = phase(ctx, sk, &ct.c0, &ct.c1);
    let q = BigInt::from(ctx.q_big.clone());
    let half = &q >> 1u32;
    let t = BigInt::from(ctx.t.value());
    let moduli: Vec<BigUint> = ctx.q.moduli().iter().map(|m| BigUint::from(m.value())).collect();
    let crt: Vec<BigUint> = moduli
        .iter()
        .zip(ctx.q.moduli())
        .map(|(mi, m)| {
            let punctured = &ctx.q_big / mi;
            let inv = m.inv(residue_of(&punctured, m));
            punctured * BigUint::from(inv)
        })
        .collect();
    let mut worst = BigUint::from(0u32);
    for c in 0..ctx.n() {
        let mut v = BigUint::from(0u32);
        for (i, k) in crt.iter().enumerate() {
            v += k * BigUint::from(x.residues[i][c]);
        }
        let v = BigInt::from(v % &ctx.q_big);
        let mut e = (&t * v) % &q;
        if e > half {
            e -= &q;
        }
        let e = e.magnitude().clone();
        if e > worst {
            worst = e;
        }
    }
    ctx.q.bits() - log2_big(&worst) - 1.0
}

fn log2_big(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits == 0 {
        return 0.0;
    }
    let shift = bits.saturating_sub(53);
    let top: u64 = (x >> shift).try_into().expect("53 bits fit u64");
    (top as f64).log2() + shift as f64
}

pub(crate) fn add_ct(ctx: &FvContext, a: &FvCiphertext, b: &FvCiphertext) -> FvCiphertext {
    let mut c0 = a.c0.clone();
    c0.add_assign(&b.c0, &ctx.q);
    let mut c1 = a.c1.clone();
    c1.add_assign(&b.c1, &ctx.q);
    FvCiphertext { c0, c1, level: a.level.max(b.level), params_hash: a.params_hash }
}

pub(crate) fn add_plain_ct(ctx: &FvContext, a: &FvCiphertext, plain: &[u64]) -> FvCiphertext {
    let mut c0 = a.c0.clone();
    c0.add_assign(&ctx.scaled_message(plain), &ctx.q);
    FvCiphertext { c0, c1: a.c1.clone(), level: a.level, params_hash: a.params_hash }
}

pub(crate) fn mul_plain_ct(ctx: &FvContext, a: &FvCiphertext, plain: &[u64], level: u32) -> FvCiphertext {
    let basis = &ctx.q;
    let m = ctx.plain_to_ring(plain);
    let c0 = a.c0.clone().ntt_form(basis).mul(&m, basis).coeff_form(basis);
    let c1 = a.c1.clone().ntt_form(basis).mul(&m, basis).coeff_form(basis);
    FvCiphertext { c0, c1, level, params_hash: a.params_hash }
}

fn key_switch(ctx: &FvContext, c: &RnsPoly, key: &KeySwitchKey) -> (RnsPoly, RnsPoly) {
    let basis = &ctx.q;
    let mut acc0 = RnsPoly::zero(basis, true);
    let mut acc1 = RnsPoly::zero(basis, true);
    for (digit, (k0, k1)) in ctx.decompose(c).iter().zip(&key.parts) {
        acc0.fma_assign(digit, k0, basis);
        acc1.fma_assign(digit, k1, basis);
    }
    (acc0.coeff_form(basis), acc1.coeff_form(basis))
}

pub(crate) fn mul_ct(ctx: &FvContext, relin: &KeySwitchKey, a: &FvCiphertext, b: &FvCiphertext, level: u32) -> FvCiphertext {
    let ext = &ctx.ext;
    let lift = |p: &RnsPoly| ctx.lift_to_ext(p).ntt_form(ext);
    let (a0, a1, b0, b1) = (lift(&a.c0), lift(&a.c1), lift(&b.c0), lift(&b.c1));
    let d0 = a0.mul(&b0, ext).coeff_form(ext);
    let mut d1 = a0.mul(&b1, ext);
    d1.fma_assign(&a1, &b0, ext);
    let d1 = d1.coeff_form(ext);
    let d2 = a1.mul(&b1, ext).coeff_form(ext);

    let mut c0 = ctx.scale_down(&d0);
    let mut c1 = ctx.scale_down(&d1);
    let c2 = ctx.scale_down(&d2);
    let (r0, r1) = key_switch(ctx, &c2, relin);
    c0.add_assign(&r0, &ctx.q);
    c1.add_assign(&r1, &ctx.q);
    FvCiphertext { c0, c1, level, params_hash: a.params_hash }
}

pub(crate) fn apply_galois(ctx: &FvContext, a: &FvCiphertext, key: &GaloisKey) -> FvCiphertext {
    let basis = &ctx.q;
    let g = key.galois_element;
    let mut c0 = a.c0.automorphism(g, basis);
    let c1 = a.c1.automorphism(g, basis);
    let (k0, k1) = key_switch(ctx, &c1, &key.key);
    c0.add_assign(&k0, basis);
    FvCiphertext { c0, c1: k1, level: a.level, params_hash: a.params_hash }
}

/// Rotates left by `offset` using a direct key when present, otherwise by
/// chaining keys for the set bits of the offset.
pub(crate) fn rotate_ct(ctx: &FvContext, keys: &EvaluationKeys, a: &FvCiphertext, offset: i64) -> Result<FvCiphertext> {
    let slots = ctx.encoder.slot_count();
    let r = offset.rem_euclid(slots as i64) as usize;
    if r == 0 {
        return Ok(a.clone());
    }
    if let Some(key) = keys.galois.get(&r) {
        return Ok(apply_galois(ctx, a, key));
    }
    let mut out = a.clone();
    for bit in 0..usize::BITS {
        let step = 1usize << bit;
        if r & step == 0 {
            continue;
        }
        let key = keys.galois.get(&step).ok_or_else(|| {
            Error::InvalidParams(format!("no Galois key to compose a rotation by {r} (missing {step})"))
        })?;
        out = apply_galois(ctx, &out, key);
    }
    Ok(out)
}

/// Three-component product without relinearization, for testing that
/// relinearization preserves the plaintext.
#[cfg(test)]
pub(crate) fn mul_ct_raw(ctx: &FvContext, a: &FvCiphertext, b: &FvCiphertext) -> [RnsPoly; 3] {
    let ext = &ctx.ext;
    let lift = |p: &RnsPoly| ctx.lift_to_ext(p).ntt_form(ext);
    let (a0, a1, b0, b1) = (lift(&a.c0), lift(&a.c1), lift(&b.c0), lift(&b.c1));
    let d0 = a0.mul(&b0, ext).coeff_form(ext);
    let mut d1 = a0.mul(&b1, ext);
    d1.fma_assign(&a1, &b0, ext);
    let d2 = a1.mul(&b1, ext).coeff_form(ext);
    [ctx.scale_down(&d0), ctx.scale_down(&d1.coeff_form(ext)), ctx.scale_down(&d2)]
}

/// Decrypts a three-component ciphertext `c0 + c1·s + c2·s²`.
#[cfg(test)]
pub(crate) fn decrypt_three(ctx: &FvContext, sk: &SecretKey, parts: &[RnsPoly; 3]) -> Vec<u64> {
    let basis = &ctx.q;
    let s2c = parts[2].clone().ntt_form(basis).mul(&sk.ntt, basis).coeff_form(basis);
    let mut c1 = parts[1].clone();
    c1.add_assign(&s2c, basis);
    decrypt_poly(ctx, sk, &parts[0], &c1)
}
