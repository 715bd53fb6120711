use rayon::prelude::*;

use super::compact::preflight;
use super::plan::plan_interleaved;
use crate::error::{Error, Result};
use crate::model::{layer_tensors, range_check, visit_rows, IntegerModel};
use crate::slot::{PlainVec, SlotBackend};

/// One ciphertext per value, the value broadcast to every slot.
pub fn pack_image_interleaved<B: SlotBackend>(backend: &B, tensor: &[i64]) -> Result<Vec<B::Ciphertext>> {
    let n = backend.slot_count();
    let cts = tensor
        .par_iter()
        .map(|&v| backend.encrypt(&PlainVec::broadcast(v, n)))
        .collect::<Result<Vec<_>>>()?;
    backend.observe_live(cts.len() as u64);
    Ok(cts)
}

/// Slot 0 of every ciphertext.
pub fn unpack_interleaved<B: SlotBackend>(backend: &B, cts: &[B::Ciphertext]) -> Result<Vec<i64>> {
    cts.iter().map(|c| Ok(backend.decrypt(c)?.as_slice()[0])).collect()
}

/// Baseline evaluation in the per-value representation: every weight tap
/// is a scalar CMult (zero weights included, as a dense evaluator would),
/// biases are scalar adds, squares are Mults.
///
/// With `mem_cap` set, refuses when the planned peak ciphertext footprint
/// exceeds it.
pub fn interleaved_infer<B: SlotBackend>(
    backend: &B,
    net: &IntegerModel,
    px: &[B::Ciphertext],
    mem_cap: Option<u64>,
) -> Result<Vec<B::Ciphertext>> {
    net.validate()?;
    if px.len() != net.input_shape.len() {
        return Err(Error::dim(format!("{} input ciphertexts for a {} input", px.len(), net.input_shape)));
    }
    if let Some(cap) = mem_cap {
        let estimate = plan_interleaved(net, backend.params())?.estimated_ciphertext_bytes;
        if estimate > cap {
            return Err(Error::CapacityRefused { estimate_bytes: estimate, cap_bytes: cap });
        }
    }
    let start = px.iter().map(|c| backend.level(c)).max().unwrap_or(0);
    let bound = range_check(net, net.input_bits, 3)?.final_bound();
    preflight(backend, net.interleaved_depth(), start, bound)?;

    let shapes = net.shapes()?;
    let mut x: Vec<B::Ciphertext> = px.to_vec();
    for (layer, &shape) in net.layers.iter().zip(&shapes) {
        x = match layer_tensors(layer) {
            None => x.par_iter().map(|c| backend.mult(c, c)).collect::<Result<Vec<_>>>()?,
            Some((w, b)) => {
                let mut rows = Vec::with_capacity(layer.output_shape(shape)?.len());
                visit_rows(layer, shape, |o, taps, bi| rows.push((o, taps.to_vec(), bi)))?;
                let mut out = rows
                    .par_iter()
                    .map(|(o, taps, bi)| -> Result<(usize, B::Ciphertext)> {
                        let mut acc: Option<B::Ciphertext> = None;
                        for &(i, wi) in taps {
                            let term = backend.cmult_scalar(&x[i], w[wi])?;
                            acc = Some(match acc {
                                Some(a) => backend.add(&a, &term)?,
                                None => term,
                            });
                        }
                        let mut acc = acc.expect("linear rows have at least one tap");
                        if b[*bi] != 0 {
                            acc = backend.add_scalar(&acc, b[*bi])?;
                        }
                        Ok((*o, acc))
                    })
                    .collect::<Result<Vec<_>>>()?;
                out.sort_unstable_by_key(|e| e.0);
                out.into_iter().map(|e| e.1).collect()
            }
        };
        backend.observe_live((shape.len() + x.len()) as u64);
    }
    Ok(x)
}
