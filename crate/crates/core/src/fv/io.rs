//! Binary formats for FV keys and ciphertexts.

use std::collections::BTreeMap;

use super::poly::RnsPoly;
use super::scheme::{EvaluationKeys, FvCiphertext, FvContext, GaloisKey, KeySwitchKey, PublicKey, SecretKey};
use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};

const CT_MAGIC: &[u8; 4] = b"PHFC";
const KEY_MAGIC: &[u8; 4] = b"PHFK";
const VERSION: u16 = 1;

const KIND_SECRET: u8 = 1;
const KIND_EVAL: u8 = 2;

fn put_poly(w: &mut Writer, p: &RnsPoly) {
    w.u8(p.ntt as u8).u32(p.residues.len() as u32);
    for r in &p.residues {
        w.u64s(r);
    }
}

fn get_poly(r: &mut Reader, ctx: &FvContext) -> Result<RnsPoly> {
    let ntt = match r.u8()? {
        0 => false,
        1 => true,
        other => return Err(Error::format(format!("bad polynomial form tag {other}"))),
    };
    let count = r.u32()? as usize;
    let basis = ctx.basis();
    if count != basis.len() {
        return Err(Error::format(format!("polynomial has {count} residues, expected {}", basis.len())));
    }
    let mut residues = Vec::with_capacity(count);
    for m in basis.moduli() {
        let res = r.u64s(basis.n())?;
        if res.iter().any(|&v| v >= m.value()) {
            return Err(Error::format("residue out of range"));
        }
        residues.push(res);
    }
    Ok(RnsPoly { residues, ntt })
}

fn put_switch_key(w: &mut Writer, k: &KeySwitchKey) {
    w.u32(k.parts.len() as u32);
    for (a, b) in &k.parts {
        put_poly(w, a);
        put_poly(w, b);
    }
}

fn get_switch_key(r: &mut Reader, ctx: &FvContext) -> Result<KeySwitchKey> {
    let count = r.u32()? as usize;
    let expected = ctx.basis().len() * (60u32.div_ceil(ctx.params().decomposition_bits)) as usize;
    if count != expected {
        return Err(Error::format(format!("key-switching key has {count} parts, expected {expected}")));
    }
    let mut parts = Vec::with_capacity(count);
    for _ in 0..count {
        parts.push((get_poly(r, ctx)?, get_poly(r, ctx)?));
    }
    Ok(KeySwitchKey { parts })
}

fn header(kind: u8, params_hash: u64) -> Writer {
    let mut w = Writer::new(KEY_MAGIC, VERSION);
    w.u8(kind).u64(params_hash);
    w
}

fn open<'a>(bytes: &'a [u8], kind: u8, params_hash: u64) -> Result<Reader<'a>> {
    let (mut r, version) = Reader::new(bytes, KEY_MAGIC)?;
    if version != VERSION {
        return Err(Error::format(format!("unsupported key file version {version}")));
    }
    let found = r.u8()?;
    if found != kind {
        return Err(Error::format(format!("key file holds kind {found}, expected {kind}")));
    }
    if r.u64()? != params_hash {
        return Err(Error::ParamMismatch);
    }
    Ok(r)
}

pub fn encode_secret_key(sk: &SecretKey, params_hash: u64) -> Vec<u8> {
    let mut w = header(KIND_SECRET, params_hash);
    w.u32(sk.coeffs.len() as u32);
    for &c in &sk.coeffs {
        w.u8(c as i8 as u8);
    }
    w.finish()
}

pub fn decode_secret_key(bytes: &[u8], ctx: &FvContext, params_hash: u64) -> Result<SecretKey> {
    let mut r = open(bytes, KIND_SECRET, params_hash)?;
    let n = r.u32()? as usize;
    if n != ctx.n() {
        return Err(Error::format(format!("secret key has {n} coefficients")));
    }
    let mut coeffs = Vec::with_capacity(n);
    for _ in 0..n {
        let c = r.u8()? as i8 as i64;
        if !(-1..=1).contains(&c) {
            return Err(Error::format("secret key coefficient is not ternary"));
        }
        coeffs.push(c);
    }
    r.finish()?;
    let ntt = RnsPoly::from_signed(ctx.basis(), &coeffs).ntt_form(ctx.basis());
    Ok(SecretKey { coeffs, ntt })
}

pub fn encode_eval_keys(keys: &EvaluationKeys, params_hash: u64) -> Vec<u8> {
    let mut w = header(KIND_EVAL, params_hash);
    put_poly(&mut w, &keys.public.p0);
    put_poly(&mut w, &keys.public.p1);
    put_switch_key(&mut w, &keys.relin);
    w.u32(keys.galois.len() as u32);
    for (&offset, key) in &keys.galois {
        w.u32(offset as u32).u32(key.galois_element as u32);
        put_switch_key(&mut w, &key.key);
    }
    w.finish()
}

pub fn decode_eval_keys(bytes: &[u8], ctx: &FvContext, params_hash: u64) -> Result<EvaluationKeys> {
    let mut r = open(bytes, KIND_EVAL, params_hash)?;
    let public = PublicKey { p0: get_poly(&mut r, ctx)?, p1: get_poly(&mut r, ctx)? };
    let relin = get_switch_key(&mut r, ctx)?;
    let count = r.u32()? as usize;
    let mut galois = BTreeMap::new();
    for _ in 0..count {
        let offset = r.u32()? as usize;
        let galois_element = r.u32()? as usize;
        if galois_element != ctx.encoder().galois_element(offset) {
            return Err(Error::format(format!("Galois element {galois_element} does not match offset {offset}")));
        }
        galois.insert(offset, GaloisKey { galois_element, key: get_switch_key(&mut r, ctx)? });
    }
    r.finish()?;
    Ok(EvaluationKeys { public, relin, galois })
}

pub fn encode_ciphertext(ct: &FvCiphertext) -> Vec<u8> {
    let mut w = Writer::new(CT_MAGIC, VERSION);
    w.u64(ct.params_hash).u32(ct.level);
    put_poly(&mut w, &ct.c0);
    put_poly(&mut w, &ct.c1);
    w.finish()
}

pub fn decode_ciphertext(bytes: &[u8], ctx: &FvContext, params_hash: u64) -> Result<FvCiphertext> {
    let (mut r, version) = Reader::new(bytes, CT_MAGIC)?;
    if version != VERSION {
        return Err(Error::format(format!("unsupported ciphertext version {version}")));
    }
    if r.u64()? != params_hash {
        return Err(Error::ParamMismatch);
    }
    let level = r.u32()?;
    let c0 = get_poly(&mut r, ctx)?;
    let c1 = get_poly(&mut r, ctx)?;
    r.finish()?;
    if c0.ntt || c1.ntt {
        return Err(Error::format("ciphertexts are stored in coefficient form"));
    }
    Ok(FvCiphertext { c0, c1, level, params_hash })
}
