//! Random networks and images for tests, fixtures and benchmarks.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{range_check, standard_architecture, FloatModel, Image, IntegerModel, LayerSpec, Shape};
use crate::error::{Error, Result};

/// Shape of a sparse random integer network: each conv filter and each FC
/// row gets a fixed number of nonzero taps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparseNetOptions {
    pub input_bits: u32,
    pub conv_taps: usize,
    pub conv_weight_max: i64,
    pub fc_taps: usize,
    pub fc_weight_max: i64,
    pub bias_max: i64,
}

impl SparseNetOptions {
    /// Fits a ~2^20 plaintext modulus with binary inputs.
    pub fn small_modulus() -> Self {
        SparseNetOptions { input_bits: 1, conv_taps: 3, conv_weight_max: 1, fc_taps: 200, fc_weight_max: 1, bias_max: 1 }
    }

    /// Denser weights for a ~2^42 plaintext modulus.
    pub fn large_modulus() -> Self {
        SparseNetOptions { input_bits: 2, conv_taps: 8, conv_weight_max: 3, fc_taps: 400, fc_weight_max: 3, bias_max: 4 }
    }
}

fn nonzero<R: Rng + ?Sized>(rng: &mut R, max: i64) -> i64 {
    let v = rng.random_range(1..=max);
    if rng.random_bool(0.5) { v } else { -v }
}

fn sparse_rows<R: Rng + ?Sized>(rng: &mut R, rows: usize, row_len: usize, taps: usize, max: i64) -> Vec<i64> {
    let mut w = vec![0i64; rows * row_len];
    for r in 0..rows {
        for i in sample(rng, row_len, taps.min(row_len)) {
            w[r * row_len + i] = nonzero(rng, max);
        }
    }
    w
}

/// Random network with the two-conv architecture whose range certificate
/// passes for plaintext modulus `t`. FC taps are thinned until it does.
pub fn certified_network<R: Rng + ?Sized>(
    input_shape: Shape,
    classes: usize,
    opts: SparseNetOptions,
    t: u64,
    rng: &mut R,
) -> Result<IntegerModel> {
    let mut fc_taps = opts.fc_taps;
    loop {
        let mut net = standard_architecture(input_shape, classes, |_, n| vec![0i64; n])?;
        net.input_bits = opts.input_bits;
        let shapes = net.shapes()?;
        for (layer, shape) in net.layers.iter_mut().zip(&shapes) {
            match layer {
                LayerSpec::Conv(c) => {
                    let fan_in = shape.c * c.kernel[0] * c.kernel[1];
                    c.weights.0 = sparse_rows(rng, c.filters, fan_in, opts.conv_taps, opts.conv_weight_max);
                    c.biases.0 = (0..c.filters).map(|_| rng.random_range(-opts.bias_max..=opts.bias_max)).collect();
                }
                LayerSpec::Fc(f) => {
                    f.weights.0 = sparse_rows(rng, f.out, shape.len(), fc_taps, opts.fc_weight_max);
                    f.biases.0 = (0..f.out).map(|_| rng.random_range(-opts.bias_max..=opts.bias_max)).collect();
                }
                LayerSpec::Square => {}
            }
        }
        if range_check(&net, opts.input_bits, t)?.passed {
            return Ok(net);
        }
        if fc_taps <= 1 {
            return Err(Error::InvalidParams(format!(
                "no sparse network with these options fits plaintext modulus {t}"
            )));
        }
        fc_taps = fc_taps * 3 / 4;
    }
}

/// Dense random integer network of the two-conv architecture, weights in
/// `±weight_max` and biases in `±bias_max`. Not certified.
pub fn random_integer_network<R: Rng + ?Sized>(
    input_shape: Shape,
    classes: usize,
    input_bits: u32,
    weight_max: i64,
    bias_max: i64,
    rng: &mut R,
) -> Result<IntegerModel> {
    let mut net = standard_architecture(input_shape, classes, |_, n| vec![0i64; n])?;
    net.input_bits = input_bits;
    for layer in &mut net.layers {
        let (w, b) = match layer {
            LayerSpec::Conv(c) => (&mut c.weights.0, &mut c.biases.0),
            LayerSpec::Fc(f) => (&mut f.weights.0, &mut f.biases.0),
            LayerSpec::Square => continue,
        };
        w.iter_mut().for_each(|v| *v = rng.random_range(-weight_max..=weight_max));
        b.iter_mut().for_each(|v| *v = rng.random_range(-bias_max..=bias_max));
    }
    Ok(net)
}

/// Dense real-valued network with uniform weights in ±1/√fan_in.
pub fn random_float_model<R: Rng + ?Sized>(input_shape: Shape, classes: usize, rng: &mut R) -> Result<FloatModel> {
    let mut net = standard_architecture(input_shape, classes, |_, n| vec![0.0; n])?;
    let shapes = net.shapes()?;
    for (layer, shape) in net.layers.iter_mut().zip(&shapes) {
        let (w, b, fan_in) = match layer {
            LayerSpec::Conv(c) => (&mut c.weights.0, &mut c.biases.0, shape.c * c.kernel[0] * c.kernel[1]),
            LayerSpec::Fc(f) => (&mut f.weights.0, &mut f.biases.0, shape.len()),
            LayerSpec::Square => continue,
        };
        let r = 1.0 / (fan_in as f64).sqrt();
        w.iter_mut().for_each(|v| *v = rng.random_range(-r..r));
        b.iter_mut().for_each(|v| *v = rng.random_range(-0.1..0.1));
    }
    Ok(net)
}

pub fn random_image<R: Rng + ?Sized>(shape: Shape, rng: &mut R) -> Image {
    let mut pixels = vec![0u8; shape.len()];
    rng.fill(&mut pixels[..]);
    Image { shape, pixels }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    use super::*;

    #[test]
    fn certified_networks_pass_their_certificate() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let t = 1032193;
        let net = certified_network(Shape::new(1, 28, 28), 10, SparseNetOptions::small_modulus(), t, &mut rng).unwrap();
        net.validate().unwrap();
        assert!(range_check(&net, 1, t).unwrap().passed);
        let net = certified_network(Shape::new(1, 28, 28), 10, SparseNetOptions::large_modulus(), 4398047232001, &mut rng).unwrap();
        assert!(range_check(&net, 2, 4398047232001).unwrap().passed);
    }
}
