//! Network descriptions, quantization, plaintext oracles and overflow
//! certificates.

mod image;
mod oracle;
pub mod random;
mod weights;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use self::image::{load_image, quantize_pixels, save_raw_tensor, Image};
pub use oracle::{
    plaintext_infer_float, plaintext_infer_int, plaintext_trace_int, quantize, range_check, scale_layer,
    RangeCertificate,
};
pub use weights::Weights;

pub const SCHEMA_VERSION: u32 = 1;

/// Tensor shape, channel-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[usize; 3]", into = "[usize; 3]")]
pub struct Shape {
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape {
    pub fn new(c: usize, h: usize, w: usize) -> Self {
        Shape { c, h, w }
    }

    pub fn len(&self) -> usize {
        self.c * self.h * self.w
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flattened index of `(c, y, x)`.
    pub fn index(&self, c: usize, y: usize, x: usize) -> usize {
        (c * self.h + y) * self.w + x
    }
}

impl From<[usize; 3]> for Shape {
    fn from([c, h, w]: [usize; 3]) -> Self {
        Shape { c, h, w }
    }
}

impl From<Shape> for [usize; 3] {
    fn from(s: Shape) -> Self {
        [s.c, s.h, s.w]
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}×{}×{}", self.c, self.h, self.w)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize + Clone + Default + PartialEq", deserialize = "T: Deserialize<'de> + Clone + Default"))]
pub struct ConvSpec<T> {
    pub filters: usize,
    pub kernel: [usize; 2],
    pub stride: [usize; 2],
    /// Weight scale exponent; weights are `round(w · 2^scale_bits)`.
    #[serde(default)]
    pub scale_bits: u32,
    /// `[filter][channel][ky][kx]`, flattened.
    pub weights: Weights<T>,
    pub biases: Weights<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize + Clone + Default + PartialEq", deserialize = "T: Deserialize<'de> + Clone + Default"))]
pub struct FcSpec<T> {
    pub out: usize,
    #[serde(default)]
    pub scale_bits: u32,
    /// `[out][in]`, flattened.
    pub weights: Weights<T>,
    pub biases: Weights<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
#[serde(bound(serialize = "T: Serialize + Clone + Default + PartialEq", deserialize = "T: Deserialize<'de> + Clone + Default"))]
pub enum LayerSpec<T> {
    Conv(ConvSpec<T>),
    Square,
    Fc(FcSpec<T>),
}

impl<T> LayerSpec<T> {
    /// Output shape for input `s`.
    pub fn output_shape(&self, s: Shape) -> Result<Shape> {
        match self {
            LayerSpec::Conv(c) => conv_output(s, c.kernel, c.stride, c.filters),
            LayerSpec::Square => Ok(s),
            LayerSpec::Fc(f) => Ok(Shape::new(f.out, 1, 1)),
        }
    }

    /// Levels consumed by compact evaluation: weights + placement mask for
    /// linear layers, one for a square.
    pub fn compact_depth(&self) -> u32 {
        match self {
            LayerSpec::Square => 1,
            _ => 2,
        }
    }

    pub fn is_linear(&self) -> bool {
        !matches!(self, LayerSpec::Square)
    }

    pub fn kind(&self) -> &'static str {
        match self {
            LayerSpec::Conv(_) => "conv",
            LayerSpec::Square => "square",
            LayerSpec::Fc(_) => "fc",
        }
    }
}

/// `OH = ⌊(H − kh)/sh⌋ + 1`; uncovered trailing rows are never read.
pub fn conv_output(s: Shape, kernel: [usize; 2], stride: [usize; 2], filters: usize) -> Result<Shape> {
    let [kh, kw] = kernel;
    let [sh, sw] = stride;
    if kh == 0 || kw == 0 || sh == 0 || sw == 0 || filters == 0 {
        return Err(Error::ShapeChain("conv kernel, stride and filter count must be positive".into()));
    }
    if kh > s.h || kw > s.w {
        return Err(Error::ShapeChain(format!("{kh}×{kw} kernel does not fit a {s} input")));
    }
    Ok(Shape::new(filters, (s.h - kh) / sh + 1, (s.w - kw) / sw + 1))
}

/// A layer stack over a fixed input shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize + Clone + Default + PartialEq", deserialize = "T: Deserialize<'de> + Clone + Default"))]
pub struct NetworkSpec<T> {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub input_shape: Shape,
    /// Input quantization: pixel `p` becomes `p >> (8 − input_bits)`.
    #[serde(default = "default_input_bits")]
    pub input_bits: u32,
    pub layers: Vec<LayerSpec<T>>,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

fn default_input_bits() -> u32 {
    8
}

/// Real-valued network, as trained.
pub type FloatModel = NetworkSpec<f64>;
/// Quantized network evaluated under encryption.
pub type IntegerModel = NetworkSpec<i64>;

impl<T> NetworkSpec<T> {
    /// Input shape of every layer followed by the network output shape.
    pub fn shapes(&self) -> Result<Vec<Shape>> {
        let mut shapes = vec![self.input_shape];
        for layer in &self.layers {
            let next = layer.output_shape(*shapes.last().unwrap())?;
            shapes.push(next);
        }
        Ok(shapes)
    }

    pub fn output_shape(&self) -> Result<Shape> {
        Ok(*self.shapes()?.last().unwrap())
    }

    /// Total levels for compact evaluation.
    pub fn compact_depth(&self) -> u32 {
        self.layers.iter().map(LayerSpec::compact_depth).sum()
    }

    /// Total levels for the interleaved baseline (one per layer).
    pub fn interleaved_depth(&self) -> u32 {
        self.layers.len() as u32
    }

    /// Checks schema version, shape chaining and tensor sizes.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::format(format!("unsupported model schema version {}", self.schema_version)));
        }
        if self.input_shape.is_empty() {
            return Err(Error::ShapeChain("empty input shape".into()));
        }
        if !(1..=8).contains(&self.input_bits) {
            return Err(Error::InvalidParams(format!("input_bits {} must be in 1..=8", self.input_bits)));
        }
        let mut shape = self.input_shape;
        for (i, layer) in self.layers.iter().enumerate() {
            let next = layer.output_shape(shape).map_err(|e| match e {
                Error::ShapeChain(msg) => Error::ShapeChain(format!("layer {i}: {msg}")),
                other => other,
            })?;
            let (want_w, want_b, got_w, got_b) = match layer {
                LayerSpec::Conv(c) => {
                    (c.filters * shape.c * c.kernel[0] * c.kernel[1], c.filters, c.weights.len(), c.biases.len())
                }
                LayerSpec::Fc(f) => (f.out * shape.len(), f.out, f.weights.len(), f.biases.len()),
                LayerSpec::Square => (0, 0, 0, 0),
            };
            if want_w != got_w || want_b != got_b {
                return Err(Error::ShapeChain(format!(
                    "layer {i} ({}) on a {shape} input needs {want_w} weights and {want_b} biases, has {got_w} and {got_b}",
                    layer.kind()
                )));
            }
            shape = next;
        }
        Ok(())
    }
}

impl<T: Serialize + for<'de> Deserialize<'de> + Clone + Default + PartialEq> NetworkSpec<T> {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let net: Self = serde_json::from_str(text)?;
        net.validate()?;
        Ok(net)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

/// Builds the two-conv, two-square, one-FC stack used throughout: 5×5
/// stride-2 convolutions with 25 and 50 filters, then `classes` outputs.
pub fn standard_architecture<T: Clone>(
    input_shape: Shape,
    classes: usize,
    mut fill: impl FnMut(&str, usize) -> Vec<T>,
) -> Result<NetworkSpec<T>> {
    let mut layers = Vec::new();
    let mut shape = input_shape;
    for filters in [25, 50] {
        let count = filters * shape.c * 25;
        layers.push(LayerSpec::Conv(ConvSpec {
            filters,
            kernel: [5, 5],
            stride: [2, 2],
            scale_bits: 0,
            weights: Weights(fill("conv_weights", count)),
            biases: Weights(fill("conv_biases", filters)),
        }));
        shape = conv_output(shape, [5, 5], [2, 2], filters)?;
        layers.push(LayerSpec::Square);
    }
    layers.push(LayerSpec::Fc(FcSpec {
        out: classes,
        scale_bits: 0,
        weights: Weights(fill("fc_weights", classes * shape.len())),
        biases: Weights(fill("fc_biases", classes)),
    }));
    Ok(NetworkSpec { schema_version: SCHEMA_VERSION, input_shape, input_bits: 8, layers })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zeros(_: &str, n: usize) -> Vec<i64> {
        vec![0; n]
    }

    #[test]
    fn table_shapes_chain() {
        let net = standard_architecture(Shape::new(1, 28, 28), 10, zeros).unwrap();
        let shapes = net.shapes().unwrap();
        assert_eq!(shapes[1], Shape::new(25, 12, 12));
        assert_eq!(shapes[1].len(), 3600);
        assert_eq!(shapes[3], Shape::new(50, 4, 4));
        assert_eq!(shapes[3].len(), 800);
        assert_eq!(shapes[5], Shape::new(10, 1, 1));
        assert_eq!(net.compact_depth(), 8);
        net.validate().unwrap();

        let rop = standard_architecture(Shape::new(1, 96, 96), 10, zeros).unwrap();
        assert_eq!(rop.shapes().unwrap()[1], Shape::new(25, 46, 46));
        let idrid = standard_architecture(Shape::new(3, 256, 256), 10, zeros).unwrap();
        assert_eq!(idrid.shapes().unwrap()[1], Shape::new(25, 126, 126));
    }

    #[test]
    fn json_round_trip_and_shape_errors() {
        let mut net = standard_architecture(Shape::new(1, 28, 28), 10, |_, n| (0..n as i64).map(|i| i % 3 - 1).collect()).unwrap();
        net.input_bits = 4;
        let text = net.to_json().unwrap();
        assert_eq!(IntegerModel::from_json(&text).unwrap(), net);

        if let LayerSpec::Conv(c) = &mut net.layers[2] {
            c.weights.0.pop();
        }
        let err = IntegerModel::from_json(&net.to_json().unwrap()).unwrap_err();
        assert!(matches!(err, Error::ShapeChain(_)), "{err}");

        let big = r#"{"input_shape":[1,4,4],"layers":[{"type":"conv","filters":1,"kernel":[5,5],"stride":[1,1],"weights":[],"biases":[0]}]}"#;
        assert!(matches!(IntegerModel::from_json(big), Err(Error::ShapeChain(_))));
    }
}

/// Calls `visit(output_index, taps, bias_index)` for every output neuron of
/// a linear layer, where `taps` lists `(input_index, weight_index)`.
/// Convolution taps follow `[filter][channel][ky][kx]` weight order.
pub fn visit_rows<T>(
    layer: &LayerSpec<T>,
    input: Shape,
    mut visit: impl FnMut(usize, &[(usize, usize)], usize),
) -> Result<()> {
    let mut taps = Vec::new();
    match layer {
        LayerSpec::Conv(c) => {
            let out = layer.output_shape(input)?;
            let [kh, kw] = c.kernel;
            let [sh, sw] = c.stride;
            for f in 0..c.filters {
                for oy in 0..out.h {
                    for ox in 0..out.w {
                        taps.clear();
                        for ch in 0..input.c {
                            for i in 0..kh {
                                for j in 0..kw {
                                    let w = ((f * input.c + ch) * kh + i) * kw + j;
                                    taps.push((input.index(ch, oy * sh + i, ox * sw + j), w));
                                }
                            }
                        }
                        visit(out.index(f, oy, ox), &taps, f);
                    }
                }
            }
        }
        LayerSpec::Fc(fc) => {
            let n = input.len();
            for o in 0..fc.out {
                taps.clear();
                taps.extend((0..n).map(|i| (i, o * n + i)));
                visit(o, &taps, o);
            }
        }
        LayerSpec::Square => {
            return Err(Error::ShapeChain("square layers have no weight rows".into()));
        }
    }
    Ok(())
}

/// `(weights, biases)` of a linear layer.
pub fn layer_tensors<T>(layer: &LayerSpec<T>) -> Option<(&[T], &[T])> {
    match layer {
        LayerSpec::Conv(c) => Some((&c.weights, &c.biases)),
        LayerSpec::Fc(f) => Some((&f.weights, &f.biases)),
        LayerSpec::Square => None,
    }
}

impl IntegerModel {
    /// Scale exponent of the activations after each layer (index 0 is the
    /// input): linear layers add their weight exponent, squares double it.
    pub fn scale_ledger(&self) -> Vec<u32> {
        let mut e = self.input_bits;
        let mut out = vec![e];
        for layer in &self.layers {
            e = match layer {
                LayerSpec::Conv(c) => e + c.scale_bits,
                LayerSpec::Fc(f) => e + f.scale_bits,
                LayerSpec::Square => 2 * e,
            };
            out.push(e);
        }
        out
    }
}
