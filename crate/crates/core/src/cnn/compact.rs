use rayon::prelude::*;

use super::{check_slots_used, packed_count, PackedVector};
use crate::error::{Error, Result};
use crate::model::{layer_tensors, range_check, visit_rows, IntegerModel, LayerSpec, Shape};
use crate::slot::{PlainVec, SlotBackend};

/// One output neuron: the nonzero weights of its row, grouped by input
/// segment. Stored sparsely; a dense row would be `L` integers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightRow {
    /// `(input_index, weight)`, sorted by index, zero weights dropped.
    pub entries: Vec<(u32, i64)>,
    /// `(segment, start, end)` ranges into `entries`, one per nonzero segment.
    pub segments: Vec<(u32, u32, u32)>,
    pub bias: i64,
    pub output_index: usize,
}

impl WeightRow {
    pub fn new(mut entries: Vec<(u32, i64)>, bias: i64, output_index: usize, slots_used: usize) -> Self {
        entries.retain(|e| e.1 != 0);
        entries.sort_unstable_by_key(|e| e.0);
        let mut segments: Vec<(u32, u32, u32)> = Vec::new();
        for (pos, &(idx, _)) in entries.iter().enumerate() {
            let seg = idx / slots_used as u32;
            match segments.last_mut() {
                Some(last) if last.0 == seg => last.2 = pos as u32 + 1,
                _ => segments.push((seg, pos as u32, pos as u32 + 1)),
            }
        }
        WeightRow { entries, segments, bias, output_index }
    }

    /// True when every segment is all-zero.
    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    /// Weights of segment `seg` laid out over a full slot vector.
    fn segment_plain(&self, seg: usize, slots_used: usize, slot_count: usize) -> PlainVec {
        let mut v = vec![0i64; slot_count];
        if let Some(&(_, start, end)) = self.segments.iter().find(|s| s.0 as usize == seg) {
            for &(idx, w) in &self.entries[start as usize..end as usize] {
                v[idx as usize % slots_used] = w;
            }
        }
        PlainVec(v)
    }
}

/// A linear layer lowered to weight rows over a packed input.
#[derive(Debug, Clone)]
pub struct CompiledLayer {
    pub rows: Vec<WeightRow>,
    pub in_len: usize,
    pub out_shape: Shape,
    pub slots_used: usize,
    pub scale_bits: u32,
}

impl CompiledLayer {
    pub fn out_len(&self) -> usize {
        self.out_shape.len()
    }

    pub fn in_segments(&self) -> usize {
        packed_count(self.in_len, self.slots_used)
    }
}

/// Lowers a conv or FC layer. A conv row for `(f, oy, ox)` holds
/// `w[f][c][i][j]` at input index `c·H·W + (oy·sh+i)·W + (ox·sw+j)`.
pub fn compile_layer(layer: &LayerSpec<i64>, in_shape: Shape, slots_used: usize) -> Result<CompiledLayer> {
    let (w, b) = layer_tensors(layer).ok_or_else(|| Error::ShapeChain("square layers are not compiled".into()))?;
    let out_shape = layer.output_shape(in_shape)?;
    let mut rows = Vec::with_capacity(out_shape.len());
    visit_rows(layer, in_shape, |o, taps, bi| {
        let entries = taps.iter().map(|&(i, wi)| (i as u32, w[wi])).collect();
        rows.push(WeightRow::new(entries, b[bi], o, slots_used));
    })?;
    rows.sort_unstable_by_key(|r| r.output_index);
    let scale_bits = match layer {
        LayerSpec::Conv(c) => c.scale_bits,
        LayerSpec::Fc(f) => f.scale_bits,
        LayerSpec::Square => 0,
    };
    Ok(CompiledLayer { rows, in_len: in_shape.len(), out_shape, slots_used, scale_bits })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalOptions {
    /// Skip CMults of all-zero weight segments.
    pub skip_zero_segments: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { skip_zero_segments: true }
    }
}

/// Per-thread partial sums of the output ciphertexts.
type Partial<C> = Vec<Option<C>>;

fn merge<B: SlotBackend>(backend: &B, mut a: Partial<B::Ciphertext>, b: Partial<B::Ciphertext>) -> Result<Partial<B::Ciphertext>> {
    for (slot, other) in a.iter_mut().zip(b) {
        if let Some(other) = other {
            *slot = Some(match slot.take() {
                Some(mine) => backend.add(&mine, &other)?,
                None => other,
            });
        }
    }
    Ok(a)
}

/// One row: Σ_j cmult(x_j, segment_j), AllSum, bias at slot 0, then mask
/// slot 0 and rotate it to the row's output slot. `None` when the row has
/// no nonzero segment and skipping is on.
fn eval_row<B: SlotBackend>(
    backend: &B,
    layer: &CompiledLayer,
    row: &WeightRow,
    x: &[B::Ciphertext],
    mask: &PlainVec,
    opts: EvalOptions,
) -> Result<Option<B::Ciphertext>> {
    let n = backend.slot_count();
    let s = layer.slots_used;
    let segments: Vec<usize> = if opts.skip_zero_segments {
        row.segments.iter().map(|seg| seg.0 as usize).collect()
    } else {
        (0..x.len()).collect()
    };
    let mut acc: Option<B::Ciphertext> = None;
    for seg in segments {
        let prod = backend.cmult(&x[seg], &row.segment_plain(seg, s, n))?;
        acc = Some(match acc {
            Some(a) => backend.add(&a, &prod)?,
            None => prod,
        });
    }
    let Some(sum) = acc else { return Ok(None) };
    let mut total = backend.all_sum(&sum, s)?;
    if row.bias != 0 {
        total = backend.add_plain(&total, &PlainVec::scaled_one_hot(0, row.bias, n))?;
    }
    let placed = backend.cmult(&total, mask)?;
    let dest = row.output_index % s;
    Ok(Some(if dest == 0 { placed } else { backend.rotate(&placed, -(dest as i64))? }))
}

/// Evaluates `y = W·x + b` for a compiled layer. Consumes two levels.
pub fn layer_eval<B: SlotBackend>(
    backend: &B,
    layer: &CompiledLayer,
    x: &PackedVector<B::Ciphertext>,
    opts: EvalOptions,
) -> Result<PackedVector<B::Ciphertext>> {
    if x.len != layer.in_len || x.slots_used != layer.slots_used {
        return Err(Error::dim(format!(
            "layer expects {} values packed {} per ciphertext, got {} packed {}",
            layer.in_len, layer.slots_used, x.len, x.slots_used
        )));
    }
    check_slots_used(backend, layer.slots_used)?;
    let n = backend.slot_count();
    let s = layer.slots_used;
    let k_out = packed_count(layer.out_len(), s);
    let mask = PlainVec::one_hot(0, n);

    let placed: Partial<B::Ciphertext> = layer
        .rows
        .par_iter()
        .try_fold(
            || vec![None; k_out],
            |mut acc: Partial<B::Ciphertext>, row| -> Result<_> {
                if let Some(ct) = eval_row(backend, layer, row, &x.cts, &mask, opts)? {
                    let slot = &mut acc[row.output_index / s];
                    *slot = Some(match slot.take() {
                        Some(prev) => backend.add(&prev, &ct)?,
                        None => ct,
                    });
                }
                Ok(acc)
            },
        )
        .try_reduce(|| vec![None; k_out], |a, b| merge(backend, a, b))?;

    // biases of rows that produced no ciphertext go in as plaintext
    let mut residual = vec![vec![0i64; n]; k_out];
    let mut has_residual = vec![false; k_out];
    for row in &layer.rows {
        let evaluated = !opts.skip_zero_segments || !row.is_zero();
        if !evaluated && row.bias != 0 {
            residual[row.output_index / s][row.output_index % s] = row.bias;
            has_residual[row.output_index / s] = true;
        }
    }
    let cts = placed
        .into_iter()
        .zip(residual)
        .zip(has_residual)
        .map(|((ct, res), has)| match ct {
            Some(ct) if has => backend.add_plain(&ct, &PlainVec(res)),
            Some(ct) => Ok(ct),
            None => backend.encrypt(&PlainVec(res)),
        })
        .collect::<Result<Vec<_>>>()?;
    backend.observe_live((x.cts.len() + cts.len()) as u64);
    Ok(PackedVector {
        len: layer.out_len(),
        slots_used: s,
        cts,
        shape: layer.out_shape,
        scale_bits: x.scale_bits + layer.scale_bits,
    })
}

/// Slot-wise square of every ciphertext. Consumes one level.
pub fn square_activation<B: SlotBackend>(
    backend: &B,
    x: &PackedVector<B::Ciphertext>,
) -> Result<PackedVector<B::Ciphertext>> {
    let cts = x.cts.par_iter().map(|c| backend.mult(c, c)).collect::<Result<Vec<_>>>()?;
    backend.observe_live(2 * cts.len() as u64);
    Ok(PackedVector { cts, scale_bits: 2 * x.scale_bits, ..x.clone_header() })
}

impl<C> PackedVector<C> {
    fn clone_header(&self) -> PackedVector<C> {
        PackedVector { len: self.len, slots_used: self.slots_used, cts: Vec::new(), shape: self.shape, scale_bits: self.scale_bits }
    }
}

#[derive(Debug, Clone)]
pub enum Stage {
    Linear(CompiledLayer),
    Square,
}

/// A network lowered for compact evaluation at a fixed `slots_used`.
#[derive(Debug, Clone)]
pub struct CompiledNetwork {
    pub stages: Vec<Stage>,
    pub input_shape: Shape,
    pub input_bits: u32,
    pub slots_used: usize,
    pub depth: u32,
    /// Interval bound on the final outputs.
    pub output_bound: u128,
}

impl CompiledNetwork {
    pub fn new(net: &IntegerModel, slots_used: usize) -> Result<Self> {
        net.validate()?;
        if slots_used == 0 {
            return Err(Error::InvalidParams("slots_used must be positive".into()));
        }
        let shapes = net.shapes()?;
        let stages = net
            .layers
            .iter()
            .zip(&shapes)
            .map(|(layer, &shape)| match layer {
                LayerSpec::Square => Ok(Stage::Square),
                _ => Ok(Stage::Linear(compile_layer(layer, shape, slots_used)?)),
            })
            .collect::<Result<Vec<_>>>()?;
        // the bound does not depend on t; the limit is checked per backend
        let output_bound = range_check(net, net.input_bits, 3)?.final_bound();
        Ok(CompiledNetwork {
            stages,
            input_shape: net.input_shape,
            input_bits: net.input_bits,
            slots_used,
            depth: net.compact_depth(),
            output_bound,
        })
    }

    pub fn output_len(&self) -> usize {
        self.stages
            .iter()
            .rev()
            .find_map(|s| match s {
                Stage::Linear(l) => Some(l.out_len()),
                Stage::Square => None,
            })
            .unwrap_or(self.input_shape.len())
    }
}

/// Checks the depth ledger and overflow bound for a backend up front.
pub(crate) fn preflight<B: SlotBackend>(backend: &B, depth: u32, start_level: u32, output_bound: u128) -> Result<()> {
    let needed = start_level + depth;
    let budget = backend.params().depth_budget;
    if needed > budget {
        return Err(Error::DepthExhausted { needed, budget });
    }
    let limit = backend.params().half_modulus();
    if output_bound > limit as u128 {
        return Err(Error::OverflowRisk { bound: output_bound, limit });
    }
    Ok(())
}

/// Full compact inference; refuses before any work if the network would
/// exceed the depth budget or the plaintext modulus.
pub fn infer<B: SlotBackend>(
    backend: &B,
    net: &CompiledNetwork,
    x: &PackedVector<B::Ciphertext>,
    opts: EvalOptions,
) -> Result<PackedVector<B::Ciphertext>> {
    if x.shape != net.input_shape || x.slots_used != net.slots_used {
        return Err(Error::dim(format!(
            "network expects a {} input packed {} per ciphertext, got {} packed {}",
            net.input_shape, net.slots_used, x.shape, x.slots_used
        )));
    }
    let start = x.cts.iter().map(|c| backend.level(c)).max().unwrap_or(0);
    preflight(backend, net.depth, start, net.output_bound)?;
    let mut v = x.clone();
    for stage in &net.stages {
        v = match stage {
            Stage::Linear(layer) => layer_eval(backend, layer, &v, opts)?,
            Stage::Square => square_activation(backend, &v)?,
        };
    }
    Ok(v)
}
