use packhe::hemat::{
    convert_layout, mat_add, mat_mul, mat_transpose, pack_matrix, plain_mat_mul, unpack_matrix, EncMatrixFile, Layout,
    PlainMatrix,
};
use packhe::slot::{partial_sum_rotations, SimBackend, SlotBackend};
use packhe::{profile, Error};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn desk() -> SimBackend {
    SimBackend::new(profile("desk").unwrap()).unwrap()
}

fn m2(rows: &[&[i64]]) -> PlainMatrix {
    PlainMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
}

fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize, bound: i64) -> PlainMatrix {
    PlainMatrix::new(rows, cols, (0..rows * cols).map(|_| rng.random_range(-bound..=bound)).collect()).unwrap()
}

fn slots(b: &SimBackend, c: &packhe::slot::SimCiphertext, n: usize) -> Vec<i64> {
    b.decrypt(c).unwrap().0[..n].to_vec()
}

#[test]
fn layout_slot_examples() {
    let b = desk();
    let m = m2(&[&[1, 2], &[3, 4]]);
    let rcp = pack_matrix(&b, &m, Layout::Rcp, 8).unwrap();
    assert_eq!(rcp.cts.len(), 1);
    assert_eq!(slots(&b, &rcp.cts[0], 6), vec![1, 2, 3, 4, 0, 0]);
    let ccp = pack_matrix(&b, &m, Layout::Ccp, 8).unwrap();
    assert_eq!(slots(&b, &ccp.cts[0], 6), vec![1, 3, 2, 4, 0, 0]);
    assert_eq!(Layout::Rcp.ciphertext_count(96, 96, 8192), 2);
    assert_eq!(b.cost_report().encrypt_count, 2);
    assert!(pack_matrix(&b, &m, Layout::Rcp, 0).is_err());
    assert!(pack_matrix(&b, &PlainMatrix::zeros(0, 3), Layout::Rcp, 8).is_err());
}

#[test]
fn convert_layout_examples() {
    let b = desk();
    let m = m2(&[&[1, 2], &[3, 4]]);
    let rcp = pack_matrix(&b, &m, Layout::Rcp, 8).unwrap();
    let before = b.cost_report();
    let same = convert_layout(&b, &rcp, Layout::Rcp).unwrap();
    assert_eq!(b.cost_report(), before);
    assert_eq!(unpack_matrix(&b, &same).unwrap(), m);

    let ccp = convert_layout(&b, &rcp, Layout::Ccp).unwrap();
    assert_eq!(slots(&b, &ccp.cts[0], 4), vec![1, 3, 2, 4]);
    assert_eq!(b.level(&ccp.cts[0]), 1);

    let m23 = m2(&[&[1, 2, 3], &[4, 5, 6]]);
    let rp = pack_matrix(&b, &m23, Layout::Rp, 8).unwrap();
    assert_eq!(rp.cts.len(), 2);
    let packed = convert_layout(&b, &rp, Layout::Rcp).unwrap();
    assert_eq!(packed.cts.len(), 1);
    assert_eq!(slots(&b, &packed.cts[0], 8), vec![1, 2, 3, 4, 5, 6, 0, 0]);
}

#[test]
fn add_and_transpose_examples() {
    let b = desk();
    let x = pack_matrix(&b, &m2(&[&[1, 2], &[3, 4]]), Layout::Rcp, 8).unwrap();
    let y = pack_matrix(&b, &m2(&[&[5, 6], &[7, 8]]), Layout::Rcp, 8).unwrap();
    let zero = pack_matrix(&b, &PlainMatrix::zeros(2, 2), Layout::Rcp, 8).unwrap();
    assert_eq!(unpack_matrix(&b, &mat_add(&b, &x, &y).unwrap()).unwrap(), m2(&[&[6, 8], &[10, 12]]));
    assert_eq!(unpack_matrix(&b, &mat_add(&b, &x, &zero).unwrap()).unwrap(), m2(&[&[1, 2], &[3, 4]]));
    let ccp = pack_matrix(&b, &m2(&[&[1, 2], &[3, 4]]), Layout::Ccp, 8).unwrap();
    assert!(matches!(mat_add(&b, &x, &ccp), Err(Error::Layout(_))));

    let before = b.cost_report();
    let t = mat_transpose(&x);
    assert_eq!(b.cost_report(), before);
    assert_eq!(t.layout, Layout::Ccp);
    assert_eq!(unpack_matrix(&b, &t).unwrap(), m2(&[&[1, 3], &[2, 4]]));
    assert_eq!(slots(&b, &t.cts[0], 4), slots(&b, &x.cts[0], 4));
    assert_eq!(unpack_matrix(&b, &mat_transpose(&t)).unwrap(), m2(&[&[1, 2], &[3, 4]]));

    let row = pack_matrix(&b, &m2(&[&[1, 2, 3, 4, 5]]), Layout::Rcp, 8).unwrap();
    let col = mat_transpose(&row);
    assert_eq!((col.rows, col.cols, col.cts.len()), (5, 1, 1));
}

#[test]
fn mat_mul_examples_and_counts() {
    let b = desk();
    let a = pack_matrix(&b, &m2(&[&[1, 2], &[3, 4]]), Layout::Rcp, 2048).unwrap();
    let x = pack_matrix(&b, &m2(&[&[5, 6], &[7, 8]]), Layout::Ccp, 2048).unwrap();
    assert_eq!(unpack_matrix(&b, &mat_mul(&b, &a, &x).unwrap()).unwrap(), m2(&[&[19, 22], &[43, 50]]));

    let mut rng = ChaCha20Rng::seed_from_u64(3);
    for d in [2usize, 3, 4, 8] {
        let am = random_matrix(&mut rng, d, d, 7);
        let bm = random_matrix(&mut rng, d, d, 7);
        let a = pack_matrix(&b, &am, Layout::Rcp, 2048).unwrap();
        let id = pack_matrix(&b, &PlainMatrix::identity(d), Layout::Ccp, 2048).unwrap();
        assert_eq!(unpack_matrix(&b, &mat_mul(&b, &a, &id).unwrap()).unwrap(), am);

        let bb = pack_matrix(&b, &bm, Layout::Ccp, 2048).unwrap();
        let before = b.cost_report();
        let c = mat_mul(&b, &a, &bb).unwrap();
        let delta = b.cost_report().since(&before);
        assert_eq!(unpack_matrix(&b, &c).unwrap(), am.checked_mul(&bm).unwrap());
        let d64 = d as u64;
        assert_eq!(delta.mult_count, d64);
        assert_eq!(delta.cmult_count, d64 * d64);
        assert_eq!(delta.rotation_count, d64 * partial_sum_rotations(d) + d64 * d64);
        assert_eq!(b.level(&c.cts[0]), 2);
    }
}

#[test]
fn general_mat_mul_paths() {
    let b = desk();
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    // non-square, through the padded frame
    let am = random_matrix(&mut rng, 3, 5, 7);
    let bm = random_matrix(&mut rng, 5, 2, 7);
    for (la, lb) in [(Layout::Rcp, Layout::Ccp), (Layout::Rp, Layout::Cp), (Layout::Ccp, Layout::Rcp)] {
        let a = pack_matrix(&b, &am, la, 8).unwrap();
        let x = pack_matrix(&b, &bm, lb, 8).unwrap();
        let c = mat_mul(&b, &a, &x).unwrap();
        assert_eq!((c.layout, c.slots_used), (Layout::Rcp, 8));
        assert_eq!(unpack_matrix(&b, &c).unwrap(), am.checked_mul(&bm).unwrap());
    }
    // too large for one padded frame: row-by-column fallback
    let am = random_matrix(&mut rng, 2, 40, 3);
    let bm = random_matrix(&mut rng, 40, 3, 3);
    let a = pack_matrix(&b, &am, Layout::Rcp, 2048).unwrap();
    let x = pack_matrix(&b, &bm, Layout::Ccp, 2048).unwrap();
    assert_eq!(unpack_matrix(&b, &mat_mul(&b, &a, &x).unwrap()).unwrap(), am.checked_mul(&bm).unwrap());
    assert!(matches!(mat_mul(&b, &x, &x), Err(Error::Dimension(_))));
}

#[test]
fn plain_matrix_times_encrypted_vector() {
    let b = desk();
    let x = pack_matrix(&b, &m2(&[&[1], &[2], &[3], &[4]]), Layout::Rcp, 2048).unwrap();
    let y = plain_mat_mul(&b, &m2(&[&[1, 1, 1, 1]]), &x).unwrap();
    assert_eq!(unpack_matrix(&b, &y).unwrap(), m2(&[&[10]]));
    let y = plain_mat_mul(&b, &PlainMatrix::identity(4), &x).unwrap();
    assert_eq!(unpack_matrix(&b, &y).unwrap(), m2(&[&[1], &[2], &[3], &[4]]));

    let mut rng = ChaCha20Rng::seed_from_u64(9);
    let w = random_matrix(&mut rng, 8, 16, 9);
    let v = random_matrix(&mut rng, 16, 1, 9);
    let x = pack_matrix(&b, &v, Layout::Rcp, 8).unwrap();
    assert_eq!(x.cts.len(), 2);
    let before = b.cost_report();
    let y = plain_mat_mul(&b, &w, &x).unwrap();
    assert_eq!(unpack_matrix(&b, &y).unwrap(), w.checked_mul(&v).unwrap());
    assert_eq!(b.cost_report().since(&before).max_level_used, 2);
}

#[test]
fn matrix_file_round_trip() {
    let b = desk();
    let e = pack_matrix(&b, &m2(&[&[1, 2, 3], &[4, 5, 6]]), Layout::Ccp, 4).unwrap();
    let file = EncMatrixFile::from_matrix(&b, &e);
    let back = EncMatrixFile::from_bytes(&file.to_bytes()).unwrap();
    assert_eq!(back, file);
    assert_eq!(unpack_matrix(&b, &back.to_matrix(&b).unwrap()).unwrap(), m2(&[&[1, 2, 3], &[4, 5, 6]]));
}

fn shape_and_slots() -> impl Strategy<Value = (usize, usize, usize, u64)> {
    (1usize..7, 1usize..7, 6usize..40, any::<u64>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pack_unpack_round_trips((m, n, s, seed) in shape_and_slots()) {
        let b = desk();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let pm = random_matrix(&mut rng, m, n, 500);
        for layout in Layout::ALL {
            let e = pack_matrix(&b, &pm, layout, s).unwrap();
            prop_assert_eq!(e.cts.len(), layout.ciphertext_count(m, n, s));
            prop_assert_eq!(unpack_matrix(&b, &e).unwrap(), pm.clone());
            for target in Layout::ALL {
                let c = convert_layout(&b, &e, target).unwrap();
                prop_assert_eq!(unpack_matrix(&b, &c).unwrap(), pm.clone());
            }
        }
    }

    #[test]
    fn rcp_of_m_is_ccp_of_transpose((m, n, s, seed) in shape_and_slots()) {
        let b = desk();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let pm = random_matrix(&mut rng, m, n, 500);
        let r = pack_matrix(&b, &pm, Layout::Rcp, s).unwrap();
        let c = pack_matrix(&b, &pm.transpose(), Layout::Ccp, s).unwrap();
        prop_assert_eq!(r.cts, c.cts);
    }

    #[test]
    fn products_match_the_integer_oracle(d in 2usize..9, seed in any::<u64>()) {
        let b = desk();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let am = random_matrix(&mut rng, d, d, 7);
        let bm = random_matrix(&mut rng, d, d, 7);
        let a = pack_matrix(&b, &am, Layout::Rcp, 2048).unwrap();
        let x = pack_matrix(&b, &bm, Layout::Ccp, 2048).unwrap();
        let want = am.checked_mul(&bm).unwrap().centered(b.params().plain_modulus);
        prop_assert_eq!(unpack_matrix(&b, &mat_mul(&b, &a, &x).unwrap()).unwrap(), want);
        let sum = mat_add(&b, &a, &pack_matrix(&b, &am, Layout::Rcp, 2048).unwrap()).unwrap();
        let doubled = PlainMatrix::new(d, d, am.data.iter().map(|v| 2 * v).collect()).unwrap();
        prop_assert_eq!(unpack_matrix(&b, &sum).unwrap(), doubled);
    }
}
