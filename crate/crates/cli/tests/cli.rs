use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use packhe::model::{Image, Shape};
use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn packhe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_packhe")).args(args).env_remove("PACKHE_SERVER").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// JSON metric lines, dropping wall times.
fn metrics(o: &Output) -> Vec<Value> {
    stdout(o)
        .lines()
        .filter(|l| l.starts_with('{'))
        .map(|l| serde_json::from_str::<Value>(l).unwrap())
        .filter(|v| v["metric"] != "wall_time_ms")
        .collect()
}

fn metric(o: &Output, name: &str) -> Value {
    metrics(o).into_iter().find(|v| v["metric"] == name && v.get("packing").is_none()).unwrap()["value"].clone()
}

fn packed_metric(o: &Output, name: &str, packing: &str) -> Value {
    metrics(o).into_iter().find(|v| v["metric"] == name && v["packing"] == packing).unwrap()["value"].clone()
}

fn ok(o: Output) -> Output {
    assert!(o.status.success(), "status {:?}\nstdout:\n{}\nstderr:\n{}", o.status, stdout(&o), String::from_utf8_lossy(&o.stderr));
    o
}

fn expected_logits(name: &str) -> Value {
    let all: Value = serde_json::from_slice(&std::fs::read(fixture("expected_logits.json")).unwrap()).unwrap();
    all[name].clone()
}

#[test]
fn infer_fixture_in_both_packings() {
    let model = fixture("mnist.json");
    let image = fixture("digit.pgm");
    let base = ["infer", "--model", model.to_str().unwrap(), "--image", image.to_str().unwrap(), "--slots-used", "2048"];
    let compact = ok(packhe(&base));
    assert_eq!(metric(&compact, "logits"), expected_logits("mnist"));
    let interleaved = ok(packhe(&[&base[..], &["--packing", "interleaved"]].concat()));
    assert_eq!(metric(&interleaved, "prediction"), metric(&compact, "prediction"));
    assert_eq!(metric(&interleaved, "logits"), expected_logits("mnist"));
    let cm = |o: &Output| metric(o, "cmult_count").as_u64().unwrap();
    assert!(cm(&interleaved) > cm(&compact));
    assert_eq!(metric(&compact, "max_level_used"), 8);
}

#[test]
fn sim_runs_are_reproducible_across_threads() {
    let dir = tempfile::tempdir().unwrap();
    let model = fixture("mnist.json");
    let mut outputs = Vec::new();
    for (i, threads) in ["1", "3"].iter().enumerate() {
        let enc = dir.path().join(format!("img{i}.enc"));
        let logits = dir.path().join(format!("logits{i}.bin"));
        ok(packhe(&["encrypt-image", "--image", fixture("digit.pgm").to_str().unwrap(), "--model",
            model.to_str().unwrap(), "--seed", "9", "--out", enc.to_str().unwrap()]));
        let o = ok(packhe(&["infer", "--model", model.to_str().unwrap(), "--image", enc.to_str().unwrap(),
            "--seed", "9", "--threads", threads, "--out", logits.to_str().unwrap()]));
        outputs.push((std::fs::read(enc).unwrap(), std::fs::read(logits).unwrap(), metrics(&o)));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn encrypt_image_ciphertext_counts() {
    let dir = tempfile::tempdir().unwrap();
    let ppm = dir.path().join("big.ppm");
    let shape = Shape::new(3, 256, 256);
    Image::new(shape, (0..shape.len()).map(|i| (i % 251) as u8).collect()).unwrap().save_pnm(&ppm).unwrap();
    for (image, count) in [(fixture("digit.pgm"), 1), (ppm, 24)] {
        let out = dir.path().join("x.enc");
        let o = ok(packhe(&["encrypt-image", "--profile", "mnist", "--image", image.to_str().unwrap(),
            "--out", out.to_str().unwrap()]));
        assert_eq!(metric(&o, "ciphertexts"), count);
    }
}

#[test]
fn keygen_then_fv_inference_of_a_shallow_model() {
    let dir = tempfile::tempdir().unwrap();
    let keys = dir.path().join("keys");
    let o = ok(packhe(&["keygen", "--profile", "desk", "--seed", "4", "--out", keys.to_str().unwrap()]));
    assert_eq!(metric(&o, "round_trip"), true);
    for f in ["secret.key", "eval.key", "params.json"] {
        assert!(keys.join(f).exists(), "{f}");
    }
    let model = dir.path().join("tiny.json");
    std::fs::write(
        &model,
        r#"{"input_shape":[1,4,4],"input_bits":2,"layers":[
            {"type":"conv","filters":2,"kernel":[2,2],"stride":[2,2],"scale_bits":0,
             "weights":[1,-2,0,3,2,1,-1,0],"biases":[1,-1]},
            {"type":"square"}]}"#,
    )
    .unwrap();
    let img = dir.path().join("tiny.pgm");
    Image::new(Shape::new(1, 4, 4), (0..16).map(|i| (i * 16) as u8).collect()).unwrap().save_pnm(&img).unwrap();
    let args = ["infer", "--model", model.to_str().unwrap(), "--image", img.to_str().unwrap(), "--slots-used", "16"];
    let sim = ok(packhe(&args));
    let fv = ok(packhe(&[&args[..], &["--backend", "fv", "--keys", keys.to_str().unwrap()]].concat()));
    assert_eq!(metric(&fv, "logits"), metric(&sim, "logits"));
    assert_eq!(metric(&fv, "max_level_used"), 3);
}

#[test]
fn matmul_demo() {
    let o = ok(packhe(&["matmul", "--dim", "4", "--seed", "2"]));
    assert_eq!(metric(&o, "matches_plaintext"), true);
    assert_eq!(metric(&o, "mult_count"), 4);
    assert_eq!(metric(&o, "max_level_used"), 2);
}

#[test]
fn compare_counts_ciphertexts() {
    let o = ok(packhe(&["compare", "--profile", "mnist", "--model", fixture("mnist.json").to_str().unwrap(), "--estimate-only"]));
    assert_eq!(metric(&o, "input_ciphertexts_ratio"), 784.0);
    assert_eq!(packed_metric(&o, "input_ciphertexts", "compact"), 1);
    let o = ok(packhe(&["compare", "--slots-used", "512", "--model", fixture("mnist.json").to_str().unwrap(),
        "--image", fixture("digit.pgm").to_str().unwrap()]));
    assert_eq!(metric(&o, "logits_agree"), true);
    assert_eq!(packed_metric(&o, "input_ciphertexts", "compact"), 2);
}

#[test]
fn exit_codes() {
    let missing = packhe(&["infer", "--model", "/nonexistent/model.json", "--image", fixture("digit.pgm").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("/nonexistent/model.json"));

    assert_eq!(packhe(&["infer", "--bogus"]).status.code(), Some(2));
    assert_eq!(packhe(&["compare", "--profile", "nope", "--model", "x"]).status.code(), Some(2));

    // a profile one level short refuses with the capacity code
    let dir = tempfile::tempdir().unwrap();
    let profiles = dir.path().join("p.toml");
    std::fs::write(
        &profiles,
        "[short]\nring_dimension = 4096\ncoeff_modulus_bits = 180\nplain_modulus = 1032193\nslot_count = 2048\ndepth_budget = 7\n",
    )
    .unwrap();
    let refused = packhe(&["infer", "--profiles", profiles.to_str().unwrap(), "--profile", "short", "--model",
        fixture("mnist.json").to_str().unwrap(), "--image", fixture("digit.pgm").to_str().unwrap()]);
    assert_eq!(refused.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&refused.stderr).contains("depth budget"));

    let capped = packhe(&["infer", "--packing", "interleaved", "--mem-cap", "1MB", "--model",
        fixture("mnist.json").to_str().unwrap(), "--image", fixture("digit.pgm").to_str().unwrap()]);
    assert_eq!(capped.status.code(), Some(3));
}
