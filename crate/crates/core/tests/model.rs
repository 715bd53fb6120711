use packhe::cnn::argmax;
use packhe::model::random::random_integer_network;
use packhe::model::{plaintext_infer_int, plaintext_trace_int, range_check, scale_layer, IntegerModel, Shape};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

// 13×13 → 25×5×5 → 50×1×1 → 4: the full layer stack at a size the
// plaintext oracle runs in microseconds.
fn small_net(seed: u64, bits: u32, weight_max: i64) -> IntegerModel {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    random_integer_network(Shape::new(1, 13, 13), 4, bits, weight_max, 2, &mut rng).unwrap()
}

fn random_input(rng: &mut impl Rng, len: usize, bits: u32, extreme: bool) -> Vec<i64> {
    let max = (1i64 << bits) - 1;
    (0..len).map(|_| if extreme { max } else { rng.random_range(0..=max) }).collect()
}

fn within_bounds(net: &IntegerModel, input: &[i64]) -> Result<(), String> {
    let cert = range_check(net, net.input_bits, 3).unwrap();
    let trace = plaintext_trace_int(net, input).map_err(|e| e.to_string())?;
    for (j, (values, &bound)) in trace[1..].iter().zip(&cert.layer_bounds).enumerate() {
        let worst = values.iter().map(|v| v.unsigned_abs() as u128).max().unwrap_or(0);
        if worst > bound {
            return Err(format!("layer {j}: |value| {worst} exceeds bound {bound}"));
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn range_bounds_hold_for_every_layer(seed in any::<u64>(), bits in 1u32..=3, extreme in any::<bool>()) {
        let net = small_net(seed, bits, 2);
        let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 1);
        let x = random_input(&mut rng, net.input_shape.len(), bits, extreme);
        prop_assert_eq!(within_bounds(&net, &x), Ok(()));
    }

    #[test]
    fn positive_layer_scaling_keeps_the_argmax(seed in any::<u64>(), which in 0usize..3, k in 1i64..=5) {
        let net = small_net(seed, 2, 1);
        let layer = [0, 2, 4][which];
        let scaled = scale_layer(&net, layer, k).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 2);
        let x = random_input(&mut rng, net.input_shape.len(), 2, false);
        let a = plaintext_infer_int(&net, &x).unwrap();
        let b = plaintext_infer_int(&scaled, &x).unwrap();
        prop_assert_eq!(argmax(&a), argmax(&b));
        // the logits are scaled by one positive constant
        for (&u, &v) in a.iter().zip(&b) {
            prop_assert_eq!(u.signum(), v.signum());
            prop_assert_eq!(u as i128 * b[0] as i128, v as i128 * a[0] as i128);
        }
    }
}

#[test]
fn range_check_is_sound_over_ten_thousand_inputs() {
    let net = small_net(77, 3, 2);
    let cert = range_check(&net, 3, 3).unwrap();
    assert_eq!(cert.input_bound, 7);
    let mut rng = ChaCha20Rng::seed_from_u64(78);
    for i in 0..10_000 {
        let x = random_input(&mut rng, net.input_shape.len(), 3, i % 100 == 0);
        within_bounds(&net, &x).unwrap_or_else(|e| panic!("input {i}: {e}"));
    }
}

#[test]
fn scale_layer_rejects_bad_requests() {
    let net = small_net(1, 2, 1);
    assert!(scale_layer(&net, 1, 3).is_err(), "square layers have no weights");
    assert!(scale_layer(&net, 0, 0).is_err());
    assert!(scale_layer(&net, 9, 2).is_err());
    let same = scale_layer(&net, 4, 1).unwrap();
    assert_eq!(same, net);
}
