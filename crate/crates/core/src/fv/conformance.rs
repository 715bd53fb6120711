//! Differential check of the FV backend against the exact simulator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::slot::{PlainVec, SimBackend, SlotBackend};

/// One step of a random program; operands index earlier registers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Step {
    Add(usize, usize),
    AddPlain(usize, Vec<i64>),
    Mult(usize, usize),
    CMult(usize, Vec<i64>),
    CMultScalar(usize, i64),
    Rotate(usize, i64),
    PartialSum(usize, usize),
    AllSum(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Program {
    pub inputs: Vec<Vec<i64>>,
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformanceReport {
    pub programs: usize,
    pub steps: usize,
    pub max_depth: u32,
    pub mismatches: usize,
    pub first_mismatch: Option<String>,
    /// Smallest noise budget seen on a final register, in bits.
    pub min_noise_budget_bits: f64,
}

impl ConformanceReport {
    pub fn passed(&self) -> bool {
        self.mismatches == 0
    }
}

fn small_vec<R: Rng>(rng: &mut R, slots: usize, bound: i64) -> Vec<i64> {
    (0..slots).map(|_| rng.random_range(-bound..=bound)).collect()
}

/// Random program whose registers never exceed multiplicative depth `max_depth`.
pub fn random_program<R: Rng>(rng: &mut R, slots: usize, t: u64, max_depth: u32, len: usize) -> Program {
    let bound = ((t / 2) as i64).min(1000);
    let inputs: Vec<Vec<i64>> = (0..2).map(|_| small_vec(rng, slots, bound)).collect();
    let mut depth: Vec<u32> = vec![0; inputs.len()];
    let mut steps = Vec::with_capacity(len);
    let log_slots = slots.trailing_zeros();
    while steps.len() < len {
        let a = rng.random_range(0..depth.len());
        let b = rng.random_range(0..depth.len());
        let (step, d) = match rng.random_range(0..8) {
            0 => (Step::Add(a, b), depth[a].max(depth[b])),
            1 => (Step::AddPlain(a, small_vec(rng, slots, bound)), depth[a]),
            2 => (Step::Mult(a, b), depth[a].max(depth[b]) + 1),
            3 => (Step::CMult(a, small_vec(rng, slots, bound)), depth[a] + 1),
            4 => (Step::CMultScalar(a, rng.random_range(-bound..=bound)), depth[a] + 1),
            5 => (Step::Rotate(a, rng.random_range(-(slots as i64)..slots as i64)), depth[a]),
            6 => (Step::PartialSum(a, rng.random_range(1..=slots.min(64))), depth[a]),
            _ => (Step::AllSum(a, 1 << rng.random_range(0..=log_slots.min(8))), depth[a]),
        };
        if d > max_depth {
            continue;
        }
        depth.push(d);
        steps.push(step);
    }
    Program { inputs, steps }
}

/// Runs `program` and returns every register, decrypted.
pub fn execute<B: SlotBackend>(backend: &B, program: &Program) -> Result<Vec<B::Ciphertext>> {
    let mut regs: Vec<B::Ciphertext> = program
        .inputs
        .iter()
        .map(|v| backend.encrypt(&PlainVec(v.clone())))
        .collect::<Result<_>>()?;
    for step in &program.steps {
        let out = match step {
            Step::Add(a, b) => backend.add(&regs[*a], &regs[*b])?,
            Step::AddPlain(a, w) => backend.add_plain(&regs[*a], &PlainVec(w.clone()))?,
            Step::Mult(a, b) => backend.mult(&regs[*a], &regs[*b])?,
            Step::CMult(a, w) => backend.cmult(&regs[*a], &PlainVec(w.clone()))?,
            Step::CMultScalar(a, w) => backend.cmult_scalar(&regs[*a], *w)?,
            Step::Rotate(a, r) => backend.rotate(&regs[*a], *r)?,
            Step::PartialSum(a, block) => backend.partial_sum(&regs[*a], *block)?,
            Step::AllSum(a, region) => backend.all_sum(&regs[*a], *region)?,
        };
        regs.push(out);
    }
    Ok(regs)
}

/// Executes `count` random programs on both backends and compares every
/// register slot by slot.
pub fn run(
    fv: &super::FvBackend,
    sim: &SimBackend,
    count: usize,
    max_depth: u32,
    steps_per_program: usize,
    seed: u64,
) -> Result<ConformanceReport> {
    let slots = sim.slot_count();
    let t = sim.params().plain_modulus;
    let results: Vec<(Option<String>, f64)> = (0..count)
        .into_par_iter()
        .map(|i| -> Result<(Option<String>, f64)> {
            let mut rng = ChaCha20Rng::seed_from_u64(seed.wrapping_add(i as u64));
            let program = random_program(&mut rng, slots, t, max_depth, steps_per_program);
            let expected = execute(sim, &program)?;
            let actual = execute(fv, &program)?;
            let mut budget = f64::INFINITY;
            for (r, (e, a)) in expected.iter().zip(&actual).enumerate() {
                let want = sim.decrypt(e)?;
                let got = fv.decrypt(a)?;
                if want != got {
                    let slot = want.0.iter().zip(&got.0).position(|(x, y)| x != y).unwrap_or(0);
                    return Ok((
                        Some(format!(
                            "program {i}, register {r}, slot {slot}: expected {}, got {}",
                            want.0[slot], got.0[slot]
                        )),
                        budget,
                    ));
                }
            }
            if let Some(last) = actual.last() {
                budget = fv.noise_budget(last)?;
            }
            Ok((None, budget))
        })
        .collect::<Result<_>>()?;
    let mismatches = results.iter().filter(|r| r.0.is_some()).count();
    Ok(ConformanceReport {
        programs: count,
        steps: count * steps_per_program,
        max_depth,
        mismatches,
        first_mismatch: results.iter().find_map(|r| r.0.clone()),
        min_noise_budget_bits: results.iter().map(|r| r.1).fold(f64::INFINITY, f64::min),
    })
}
