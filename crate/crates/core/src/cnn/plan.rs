//! Static operation counts, predicted from the weights alone.
//!
//! These mirror the instrumented evaluators exactly and let cost reports
//! be produced for shapes too large to run.

use super::compact::EvalOptions;
use super::packed_count;
use crate::error::Result;
use crate::model::{layer_tensors, visit_rows, IntegerModel};
use crate::params::BackendParams;
use crate::slot::{all_sum_rotations, CostReport};

fn finish(mut r: CostReport, params: &BackendParams) -> CostReport {
    r.estimated_ciphertext_bytes = r.peak_live_ciphertexts * params.ciphertext_bytes();
    r
}

/// Counters that compact `infer` will report at `slots_used`.
pub fn plan_compact(net: &IntegerModel, params: &BackendParams, slots_used: usize, opts: EvalOptions) -> Result<CostReport> {
    net.validate()?;
    let shapes = net.shapes()?;
    let s = slots_used;
    let sum_rot = all_sum_rotations(s);
    let mut r = CostReport { encrypt_count: packed_count(net.input_shape.len(), s) as u64, ..Default::default() };
    r.peak_live_ciphertexts = r.encrypt_count;
    let mut level = 0u64;
    for (layer, &shape) in net.layers.iter().zip(&shapes) {
        let k_in = packed_count(shape.len(), s);
        let out_len = layer.output_shape(shape)?.len();
        let k_out = packed_count(out_len, s);
        match layer_tensors(layer) {
            None => {
                r.mult_count += k_in as u64;
                level += 1;
            }
            Some((w, b)) => {
                let mut contributions = vec![0u64; k_out];
                let mut residual = vec![false; k_out];
                let mut segs: Vec<usize> = Vec::new();
                visit_rows(layer, shape, |o, taps, bi| {
                    segs.clear();
                    segs.extend(taps.iter().filter(|&&(_, wi)| w[wi] != 0).map(|&(i, _)| i / s));
                    segs.sort_unstable();
                    segs.dedup();
                    let m = if opts.skip_zero_segments { segs.len() } else { k_in };
                    if m == 0 {
                        residual[o / s] |= b[bi] != 0;
                        return;
                    }
                    r.cmult_count += m as u64 + 1;
                    r.add_count += m as u64 - 1 + sum_rot + (b[bi] != 0) as u64;
                    r.rotation_count += sum_rot + (o % s != 0) as u64;
                    contributions[o / s] += 1;
                })?;
                for (c, res) in contributions.iter().zip(&residual) {
                    match (*c, *res) {
                        (0, _) => r.encrypt_count += 1,
                        (c, res) => r.add_count += c - 1 + res as u64,
                    }
                }
                level += 2;
            }
        }
        r.peak_live_ciphertexts = r.peak_live_ciphertexts.max((k_in + k_out) as u64);
    }
    r.max_level_used = level;
    Ok(finish(r, params))
}

/// Counters that `interleaved_infer` will report.
pub fn plan_interleaved(net: &IntegerModel, params: &BackendParams) -> Result<CostReport> {
    net.validate()?;
    let shapes = net.shapes()?;
    let mut r = CostReport { encrypt_count: net.input_shape.len() as u64, ..Default::default() };
    r.peak_live_ciphertexts = r.encrypt_count;
    for (layer, &shape) in net.layers.iter().zip(&shapes) {
        let out_len = layer.output_shape(shape)?.len();
        match layer_tensors(layer) {
            None => r.mult_count += shape.len() as u64,
            Some((_, b)) => visit_rows(layer, shape, |_, taps, bi| {
                r.cmult_count += taps.len() as u64;
                r.add_count += taps.len() as u64 - 1 + (b[bi] != 0) as u64;
            })?,
        }
        r.peak_live_ciphertexts = r.peak_live_ciphertexts.max((shape.len() + out_len) as u64);
    }
    r.max_level_used = net.interleaved_depth() as u64;
    Ok(finish(r, params))
}
