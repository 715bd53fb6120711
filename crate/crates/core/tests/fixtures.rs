use std::collections::BTreeMap;
use std::path::PathBuf;

use packhe::cnn::{infer, pack_image, unpack_vector, CompiledNetwork, EvalOptions};
use packhe::model::{load_image, plaintext_infer_int, range_check, IntegerModel};
use packhe::slot::SimBackend;
use packhe::profile;
use sha2::{Digest, Sha256};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn expected() -> BTreeMap<String, Vec<i64>> {
    serde_json::from_str(&std::fs::read_to_string(fixtures().join("expected_logits.json")).unwrap()).unwrap()
}

#[test]
fn mnist_fixture_file_is_pinned() {
    let bytes = std::fs::read(fixtures().join("mnist.json")).unwrap();
    let digest = Sha256::digest(&bytes);
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    assert_eq!(hex, "e24d5d10c23a281f439834433a8b567c73be57c227fcc72ab355c35bbbc33257");
}

#[test]
fn fixture_models_reproduce_pinned_logits() {
    let t = profile("desk").unwrap().plain_modulus;
    let want = expected();
    for (name, image) in [("mnist", "digit.pgm"), ("rop", "rop.pgm"), ("idrid", "idrid.ppm")] {
        let net = IntegerModel::load(&fixtures().join(format!("{name}.json"))).unwrap();
        let img = load_image(&fixtures().join(image)).unwrap();
        assert_eq!(img.shape, net.input_shape);
        assert!(range_check(&net, net.input_bits, t).unwrap().passed, "{name} is not certified");
        assert_eq!(plaintext_infer_int(&net, &img.quantized(net.input_bits)).unwrap(), want[name], "{name}");

        let dir = tempfile::tempdir().unwrap();
        let copy = dir.path().join("m.json");
        net.save(&copy).unwrap();
        assert_eq!(IntegerModel::load(&copy).unwrap(), net);
    }
}

#[test]
fn encrypted_mnist_fixture_matches_pin() {
    let b = SimBackend::new(profile("desk").unwrap()).unwrap();
    let net = IntegerModel::load(&fixtures().join("mnist.json")).unwrap();
    let img = load_image(&fixtures().join("digit.pgm")).unwrap().quantized(net.input_bits);
    let compiled = CompiledNetwork::new(&net, 2048).unwrap();
    let x = pack_image(&b, &img, net.input_shape, 2048).unwrap();
    let y = infer(&b, &compiled, &x, EvalOptions::default()).unwrap();
    assert_eq!(unpack_vector(&b, &y).unwrap(), expected()["mnist"]);
}
