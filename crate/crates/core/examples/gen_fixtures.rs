//! Regenerates the pinned fixture models, images and logits.
//!
//!     cargo run -p packhe --example gen_fixtures -- fixtures

use std::collections::BTreeMap;
use std::path::PathBuf;

use packhe::model::random::{certified_network, random_image, SparseNetOptions};
use packhe::model::{plaintext_infer_int, Image, Shape};
use packhe::profile;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// A bright stroke shaped like a 7 over a dim noisy background.
fn digit(rng: &mut ChaCha20Rng) -> Image {
    let shape = Shape::new(1, 28, 28);
    let mut img = random_image(shape, rng);
    for p in img.pixels.iter_mut() {
        *p /= 4;
    }
    for x in 6..22 {
        for y in 5..8 {
            img.pixels[shape.index(0, y, x)] = 230 + rng.random_range(0..25);
        }
    }
    for y in 8..24 {
        let x = 21 - (y - 8) * 10 / 16;
        for dx in 0..3 {
            img.pixels[shape.index(0, y, x + dx)] = 220 + rng.random_range(0..35);
        }
    }
    img
}

fn main() {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fixtures".into()));
    std::fs::create_dir_all(&dir).unwrap();
    let t = profile("desk").unwrap().plain_modulus;
    let mut expected = BTreeMap::new();
    let cases = [
        ("mnist", Shape::new(1, 28, 28), "digit.pgm", 101u64),
        ("rop", Shape::new(1, 96, 96), "rop.pgm", 202),
        ("idrid", Shape::new(3, 256, 256), "idrid.ppm", 303),
    ];
    for (name, shape, image_name, seed) in cases {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let net = certified_network(shape, 10, SparseNetOptions::small_modulus(), t, &mut rng).unwrap();
        let img = if name == "mnist" { digit(&mut rng) } else { random_image(shape, &mut rng) };
        net.save(&dir.join(format!("{name}.json"))).unwrap();
        img.save_pnm(&dir.join(image_name)).unwrap();
        let logits = plaintext_infer_int(&net, &img.quantized(net.input_bits)).unwrap();
        println!("{name}: {logits:?}");
        expected.insert(name, logits);
    }
    let text = serde_json::to_string_pretty(&expected).unwrap();
    std::fs::write(dir.join("expected_logits.json"), text + "\n").unwrap();
}
