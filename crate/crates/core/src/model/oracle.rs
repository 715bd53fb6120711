use serde::{Deserialize, Serialize};

use super::{layer_tensors, visit_rows, ConvSpec, FcSpec, FloatModel, IntegerModel, LayerSpec, Weights};
use crate::error::{Error, Result};

/// Quantizes weights to `round(w · 2^bits)` (half away from zero) and each
/// bias at the accumulated activation scale. `scale_bits` has one entry per
/// linear layer, or a single entry used for all of them.
pub fn quantize(m: &FloatModel, scale_bits: &[u32]) -> Result<IntegerModel> {
    m.validate()?;
    let linear = m.layers.iter().filter(|l| l.is_linear()).count();
    if scale_bits.is_empty() || (scale_bits.len() != 1 && scale_bits.len() != linear) {
        return Err(Error::InvalidParams(format!(
            "need 1 or {linear} scale exponents, got {}",
            scale_bits.len()
        )));
    }
    if scale_bits.iter().any(|b| !(0..=8).contains(b)) {
        return Err(Error::InvalidParams("scale exponents must be in 0..=8".into()));
    }
    let q = |v: &[f64], bits: u32| Weights(v.iter().map(|&w| (w * 2f64.powi(bits as i32)).round() as i64).collect());
    let mut e = m.input_bits;
    let mut next = 0;
    let mut layers = Vec::with_capacity(m.layers.len());
    for layer in &m.layers {
        let out = match layer {
            LayerSpec::Square => {
                e *= 2;
                LayerSpec::Square
            }
            LayerSpec::Conv(c) => {
                let sb = scale_bits[next.min(scale_bits.len() - 1)];
                next += 1;
                e += sb;
                LayerSpec::Conv(ConvSpec {
                    filters: c.filters,
                    kernel: c.kernel,
                    stride: c.stride,
                    scale_bits: sb,
                    weights: q(&c.weights, sb),
                    biases: q(&c.biases, e),
                })
            }
            LayerSpec::Fc(f) => {
                let sb = scale_bits[next.min(scale_bits.len() - 1)];
                next += 1;
                e += sb;
                LayerSpec::Fc(FcSpec { out: f.out, scale_bits: sb, weights: q(&f.weights, sb), biases: q(&f.biases, e) })
            }
        };
        layers.push(out);
    }
    Ok(IntegerModel { schema_version: m.schema_version, input_shape: m.input_shape, input_bits: m.input_bits, layers })
}

/// Exact integer forward pass; returns the activations after every layer,
/// starting with the input.
pub fn plaintext_trace_int(net: &IntegerModel, input: &[i64]) -> Result<Vec<Vec<i64>>> {
    if input.len() != net.input_shape.len() {
        return Err(Error::dim(format!("input has {} values, model expects {}", input.len(), net.input_shape.len())));
    }
    let shapes = net.shapes()?;
    let mut trace = vec![input.to_vec()];
    for (layer, &shape) in net.layers.iter().zip(&shapes) {
        let x = trace.last().unwrap();
        let next = match layer_tensors(layer) {
            None => x
                .iter()
                .map(|&v| v.checked_mul(v).ok_or(Error::OracleOverflow))
                .collect::<Result<Vec<_>>>()?,
            Some((w, b)) => {
                let mut out = vec![0i64; layer.output_shape(shape)?.len()];
                let mut overflow = false;
                visit_rows(layer, shape, |o, taps, bi| {
                    let mut acc = b[bi] as i128;
                    for &(i, wi) in taps {
                        acc += w[wi] as i128 * x[i] as i128;
                    }
                    match i64::try_from(acc) {
                        Ok(v) => out[o] = v,
                        Err(_) => overflow = true,
                    }
                })?;
                if overflow {
                    return Err(Error::OracleOverflow);
                }
                out
            }
        };
        trace.push(next);
    }
    Ok(trace)
}

pub fn plaintext_infer_int(net: &IntegerModel, input: &[i64]) -> Result<Vec<i64>> {
    Ok(plaintext_trace_int(net, input)?.pop().unwrap())
}

/// Real-valued forward pass, the quantization reference.
pub fn plaintext_infer_float(m: &FloatModel, input: &[f64]) -> Result<Vec<f64>> {
    if input.len() != m.input_shape.len() {
        return Err(Error::dim(format!("input has {} values, model expects {}", input.len(), m.input_shape.len())));
    }
    let shapes = m.shapes()?;
    let mut x = input.to_vec();
    for (layer, &shape) in m.layers.iter().zip(&shapes) {
        x = match layer_tensors(layer) {
            None => x.iter().map(|v| v * v).collect(),
            Some((w, b)) => {
                let mut out = vec![0.0; layer.output_shape(shape)?.len()];
                visit_rows(layer, shape, |o, taps, bi| {
                    out[o] = b[bi] + taps.iter().map(|&(i, wi)| w[wi] * x[i]).sum::<f64>();
                })?;
                out
            }
        };
    }
    Ok(x)
}

/// Multiplies layer `index`'s weights and biases by `k > 0` and rescales
/// every later bias by the factor that reaches it (squared through each
/// square), so the logits come out multiplied by a positive constant.
pub fn scale_layer(net: &IntegerModel, index: usize, k: i64) -> Result<IntegerModel> {
    if k <= 0 {
        return Err(Error::InvalidParams(format!("scale factor {k} must be positive")));
    }
    match net.layers.get(index) {
        Some(l) if l.is_linear() => {}
        _ => return Err(Error::InvalidParams(format!("layer {index} is not a linear layer"))),
    }
    let mut out = net.clone();
    let mut factor = 1i64;
    let mul = |v: &mut Weights<i64>, f: i64| -> Result<()> {
        for x in v.0.iter_mut() {
            *x = x.checked_mul(f).ok_or(Error::OracleOverflow)?;
        }
        Ok(())
    };
    for (i, layer) in out.layers.iter_mut().enumerate().skip(index) {
        let (w, b) = match layer {
            LayerSpec::Square => {
                factor = factor.checked_mul(factor).ok_or(Error::OracleOverflow)?;
                continue;
            }
            LayerSpec::Conv(c) => (&mut c.weights, &mut c.biases),
            LayerSpec::Fc(f) => (&mut f.weights, &mut f.biases),
        };
        if i == index {
            mul(w, k)?;
            factor = k;
        }
        mul(b, factor)?;
    }
    Ok(out)
}

/// Interval-arithmetic magnitude bounds for every layer output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RangeCertificate {
    pub input_bound: u128,
    /// Bound on `|value|` after each layer (saturating).
    pub layer_bounds: Vec<u128>,
    /// ⌊(t−1)/2⌋.
    pub limit: u64,
    pub passed: bool,
}

impl RangeCertificate {
    pub fn final_bound(&self) -> u128 {
        *self.layer_bounds.last().unwrap_or(&self.input_bound)
    }

    pub fn into_result(self) -> Result<Self> {
        if self.passed {
            Ok(self)
        } else {
            Err(Error::OverflowRisk { bound: self.final_bound(), limit: self.limit })
        }
    }
}

/// Bounds: linear `max_row Σ|w|·in + |b|`, square `in²`, with inputs in
/// `[0, 2^input_bits)`. Passes iff the final bound is at most ⌊(t−1)/2⌋,
/// which makes centered decryption equal the exact integer result.
pub fn range_check(net: &IntegerModel, input_bits: u32, t: u64) -> Result<RangeCertificate> {
    let shapes = net.shapes()?;
    let input_bound = (1u128 << input_bits) - 1;
    let mut bound = input_bound;
    let mut layer_bounds = Vec::with_capacity(net.layers.len());
    for (layer, &shape) in net.layers.iter().zip(&shapes) {
        bound = match layer_tensors(layer) {
            None => bound.saturating_mul(bound),
            Some((w, b)) => {
                let mut worst = 0u128;
                visit_rows(layer, shape, |_, taps, bi| {
                    let sum_abs: u128 = taps.iter().map(|&(_, wi)| w[wi].unsigned_abs() as u128).sum();
                    let row = sum_abs.saturating_mul(bound).saturating_add(b[bi].unsigned_abs() as u128);
                    worst = worst.max(row);
                })?;
                worst
            }
        };
        layer_bounds.push(bound);
    }
    let limit = (t - 1) / 2;
    let passed = *layer_bounds.last().unwrap_or(&input_bound) <= limit as u128;
    Ok(RangeCertificate { input_bound, layer_bounds, limit, passed })
}
