use packhe::cnn::{
    self, compile_layer, infer, interleaved_infer, layer_eval, pack_image, pack_image_interleaved, pack_vector,
    plan_compact, plan_interleaved, square_activation, unpack_interleaved, unpack_vector, CompiledNetwork,
    EncryptedImage, EncryptedLogits, EvalOptions,
};
use packhe::model::random::{certified_network, random_image, SparseNetOptions};
use packhe::model::{plaintext_infer_int, ConvSpec, FcSpec, LayerSpec, Shape, Weights};
use packhe::slot::{SimBackend, SlotBackend};
use packhe::{profile, Error};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn desk() -> SimBackend {
    SimBackend::new(profile("desk").unwrap()).unwrap()
}

fn conv(filters: usize, k: usize, stride: usize, weights: Vec<i64>, biases: Vec<i64>) -> LayerSpec<i64> {
    LayerSpec::Conv(ConvSpec {
        filters,
        kernel: [k, k],
        stride: [stride, stride],
        scale_bits: 0,
        weights: Weights(weights),
        biases: Weights(biases),
    })
}

fn fc(out: usize, weights: Vec<i64>, biases: Vec<i64>) -> LayerSpec<i64> {
    LayerSpec::Fc(FcSpec { out, scale_bits: 0, weights: Weights(weights), biases: Weights(biases) })
}

#[test]
fn packing_counts() {
    let mnist = SimBackend::new(profile("mnist").unwrap()).unwrap();
    for (shape, k) in [(Shape::new(1, 28, 28), 1), (Shape::new(1, 96, 96), 2), (Shape::new(3, 256, 256), 24)] {
        let v = pack_image(&mnist, &vec![1; shape.len()], shape, 8192).unwrap();
        assert_eq!(v.ciphertext_count(), k);
        assert_eq!(cnn::packed_count(shape.len(), 8192), k);
    }
    let px = pack_image_interleaved(&mnist, &vec![3; 784]).unwrap();
    assert_eq!(px.len(), 784);
    let toy = pack_image_interleaved(&desk(), &[1, 2, 3, 4]).unwrap();
    assert_eq!(toy.len(), 4);
    assert!(pack_image(&mnist, &[], Shape::new(0, 0, 0), 8192).is_err());
}

#[test]
fn compiled_row_counts_and_placement() {
    let ident = conv(1, 1, 1, vec![1], vec![0]);
    let layer = compile_layer(&ident, Shape::new(1, 2, 2), 8).unwrap();
    assert_eq!(layer.rows.len(), 4);
    for (i, row) in layer.rows.iter().enumerate() {
        assert_eq!(row.entries, vec![(i as u32, 1)]);
    }
    let c1 = conv(25, 5, 2, vec![1; 25 * 25], vec![0; 25]);
    assert_eq!(compile_layer(&c1, Shape::new(1, 28, 28), 2048).unwrap().rows.len(), 3600);
    let c2 = conv(50, 5, 2, vec![1; 50 * 25 * 25], vec![0; 50]);
    let l2 = compile_layer(&c2, Shape::new(25, 12, 12), 2048).unwrap();
    assert_eq!(l2.rows.len(), 800);
    // filter 0 at (0,0): channel 1, ky 2, kx 3 reads index 1·144 + 2·12 + 3
    assert!(l2.rows[0].entries.contains(&(144 + 24 + 3, 1)));
    let f = fc(10, vec![1; 8000], vec![0; 10]);
    assert_eq!(compile_layer(&f, Shape::new(50, 4, 4), 2048).unwrap().rows.len(), 10);
    assert!(compile_layer(&conv(1, 5, 1, vec![1; 25], vec![0]), Shape::new(1, 4, 4), 8).is_err());
}

#[test]
fn layer_eval_small_oracles() {
    let b = desk();
    let x: Vec<i64> = (1..=16).collect();
    let shape = Shape::new(1, 1, 16);
    // identity FC
    let mut w = vec![0; 256];
    for i in 0..16 {
        w[i * 16 + i] = 1;
    }
    let ident = compile_layer(&fc(16, w, vec![0; 16]), shape, 2048).unwrap();
    let pv = pack_vector(&b, &x, shape, 2048, 0).unwrap();
    let y = layer_eval(&b, &ident, &pv, EvalOptions::default()).unwrap();
    assert_eq!(unpack_vector(&b, &y).unwrap(), x);

    // all-ones row
    let ones = compile_layer(&fc(1, vec![1; 4], vec![0]), Shape::new(1, 1, 4), 2048).unwrap();
    let pv = pack_vector(&b, &[1, 2, 3, 4], Shape::new(1, 1, 4), 2048, 0).unwrap();
    assert_eq!(unpack_vector(&b, &layer_eval(&b, &ones, &pv, EvalOptions::default()).unwrap()).unwrap(), vec![10]);

    // random 8×16 W over a k=2 input with s=8
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let w: Vec<i64> = (0..128).map(|_| rng.random_range(-9..=9)).collect();
    let bias: Vec<i64> = (0..8).map(|_| rng.random_range(-9..=9)).collect();
    let layer_spec = fc(8, w.clone(), bias.clone());
    let layer = compile_layer(&layer_spec, shape, 8).unwrap();
    let pv = pack_vector(&b, &x, shape, 8, 0).unwrap();
    assert_eq!(pv.ciphertext_count(), 2);
    let want: Vec<i64> = (0..8).map(|o| bias[o] + (0..16).map(|i| w[o * 16 + i] * x[i]).sum::<i64>()).collect();
    let before = b.cost_report();
    let y = layer_eval(&b, &layer, &pv, EvalOptions::default()).unwrap();
    assert_eq!(unpack_vector(&b, &y).unwrap(), want);
    assert_eq!(y.cts.iter().map(|c| b.level(c)).max(), Some(2));
    assert!(b.cost_report().since(&before).cmult_count > 0);
}

#[test]
fn square_activation_examples() {
    let b = desk();
    let pv = pack_vector(&b, &[-3, 2], Shape::new(1, 1, 2), 2048, 3).unwrap();
    let sq = square_activation(&b, &pv).unwrap();
    assert_eq!(unpack_vector(&b, &sq).unwrap(), vec![9, 4]);
    assert_eq!(sq.scale_bits, 6);
    let zero = pack_vector(&b, &[0; 5], Shape::new(1, 1, 5), 2048, 0).unwrap();
    assert_eq!(unpack_vector(&b, &square_activation(&b, &zero).unwrap()).unwrap(), vec![0; 5]);
}

fn mnist_case(seed: u64) -> (packhe::model::IntegerModel, Vec<i64>) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let t = profile("desk").unwrap().plain_modulus;
    let net = certified_network(Shape::new(1, 28, 28), 10, SparseNetOptions::small_modulus(), t, &mut rng).unwrap();
    let img = random_image(net.input_shape, &mut rng).quantized(net.input_bits);
    (net, img)
}

#[test]
fn compact_and_interleaved_match_the_oracle_and_the_planner() {
    let params = profile("desk").unwrap();
    let (net, img) = mnist_case(1);
    let want = plaintext_infer_int(&net, &img).unwrap();
    let compiled = CompiledNetwork::new(&net, 2048).unwrap();

    let b = desk();
    let x = pack_image(&b, &img, net.input_shape, 2048).unwrap();
    let y = infer(&b, &compiled, &x, EvalOptions::default()).unwrap();
    assert_eq!(unpack_vector(&b, &y).unwrap(), want);
    assert_eq!(b.cost_report(), plan_compact(&net, &params, 2048, EvalOptions::default()).unwrap());
    assert_eq!(b.cost_report().max_level_used, 8);

    let logits = EncryptedLogits::from_bytes(&EncryptedLogits::from_packed(&b, &y).to_bytes()).unwrap();
    assert_eq!(logits.decrypt(&b).unwrap(), want);

    let b = desk();
    let px = pack_image_interleaved(&b, &img).unwrap();
    let out = interleaved_infer(&b, &net, &px, None).unwrap();
    assert_eq!(unpack_interleaved(&b, &out).unwrap(), want);
    assert_eq!(b.cost_report(), plan_interleaved(&net, &params).unwrap());
    assert_eq!(b.cost_report().max_level_used, 5);
}

#[test]
fn zero_segment_skipping_preserves_outputs() {
    let params = profile("desk").unwrap();
    let (net, img) = mnist_case(2);
    let compiled = CompiledNetwork::new(&net, 2048).unwrap();
    let mut outs = Vec::new();
    let mut cmults = Vec::new();
    for skip in [true, false] {
        let opts = EvalOptions { skip_zero_segments: skip };
        let b = desk();
        let x = pack_image(&b, &img, net.input_shape, 2048).unwrap();
        outs.push(unpack_vector(&b, &infer(&b, &compiled, &x, opts).unwrap()).unwrap());
        assert_eq!(b.cost_report(), plan_compact(&net, &params, 2048, opts).unwrap());
        cmults.push(b.cost_report().cmult_count);
    }
    assert_eq!(outs[0], outs[1]);
    assert!(cmults[0] < cmults[1], "{cmults:?}");
}

#[test]
fn depth_budget_is_checked_before_work() {
    let (net, img) = mnist_case(3);
    let compiled = CompiledNetwork::new(&net, 2048).unwrap();
    assert_eq!(compiled.depth, 8);
    let seven = SimBackend::new(profile("desk").unwrap().with_depth_budget(7)).unwrap();
    let x = pack_image(&seven, &img, net.input_shape, 2048).unwrap();
    let before = seven.cost_report();
    let err = infer(&seven, &compiled, &x, EvalOptions::default()).unwrap_err();
    assert!(matches!(err, Error::DepthExhausted { needed: 8, budget: 7 }), "{err}");
    assert_eq!(seven.cost_report(), before);
}

#[test]
fn overflow_risk_is_refused() {
    let (net, img) = mnist_case(4);
    let compiled = CompiledNetwork::new(&net, 2048).unwrap();
    let mut small = profile("desk").unwrap();
    small.plain_modulus = 65537;
    let b = SimBackend::new(small).unwrap();
    let x = pack_image(&b, &img, net.input_shape, 2048).unwrap();
    assert!(matches!(infer(&b, &compiled, &x, EvalOptions::default()), Err(Error::OverflowRisk { .. })));
}

#[test]
fn interleaved_memory_guard_refuses() {
    let (net, img) = mnist_case(5);
    let b = desk();
    let px = pack_image_interleaved(&b, &img).unwrap();
    let need = plan_interleaved(&net, b.params()).unwrap().estimated_ciphertext_bytes;
    let err = interleaved_infer(&b, &net, &px, Some(need - 1)).unwrap_err();
    assert!(err.is_capacity(), "{err}");
    assert!(interleaved_infer(&b, &net, &px, Some(need)).is_ok());
}

#[test]
fn encrypted_image_round_trip() {
    let b = desk();
    let shape = Shape::new(1, 96, 96);
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    let img = random_image(shape, &mut rng).quantized(8);
    let v = pack_image(&b, &img, shape, 2048).unwrap();
    assert_eq!(v.ciphertext_count(), 5);
    let file = EncryptedImage::from_packed(&b, &v);
    let back = EncryptedImage::from_bytes(&file.to_bytes()).unwrap();
    assert_eq!(back, file);
    assert_eq!(unpack_vector(&b, &back.to_packed(&b).unwrap()).unwrap(), img);
    let mnist = SimBackend::new(profile("mnist").unwrap()).unwrap();
    assert!(matches!(back.to_packed(&mnist), Err(Error::ParamMismatch)));
}
