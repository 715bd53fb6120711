//! CRT batching: n/2 slot values ↔ a plaintext polynomial mod t.
//!
//! Slot `i` of the data row is the evaluation at ψ^(3^i mod 2n); the second
//! row (exponents −3^i) is kept at zero, so X → X^(3^r) rotates the data row
//! left by `r` and leaves the zero row zero.

use super::arith::Modulus;
use super::ntt::{bit_reverse, NttTable};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BatchEncoder {
    n: usize,
    table: NttTable,
    /// NTT output index for each data-row slot.
    row_index: Vec<usize>,
}

impl BatchEncoder {
    pub fn new(n: usize, t: u64) -> Self {
        let table = NttTable::new(Modulus::new(t), n);
        let bits = n.trailing_zeros();
        let m = 2 * n;
        let mut row_index = Vec::with_capacity(n / 2);
        let mut e = 1usize;
        for _ in 0..n / 2 {
            row_index.push(bit_reverse((e - 1) / 2, bits));
            e = e * 3 % m;
        }
        BatchEncoder { n, table, row_index }
    }

    pub fn slot_count(&self) -> usize {
        self.n / 2
    }

    pub fn plain_modulus(&self) -> &Modulus {
        self.table.modulus()
    }

    /// Plaintext polynomial coefficients in [0, t).
    pub fn encode(&self, values: &[i64]) -> Result<Vec<u64>> {
        if values.len() != self.n / 2 {
            return Err(Error::dim(format!(
                "batch encoding takes {} values, got {}",
                self.n / 2,
                values.len()
            )));
        }
        let t = self.table.modulus();
        let mut evals = vec![0u64; self.n];
        for (&idx, &v) in self.row_index.iter().zip(values) {
            evals[idx] = t.reduce_i64(v);
        }
        self.table.inverse(&mut evals);
        Ok(evals)
    }

    /// Centered slot values from plaintext coefficients.
    pub fn decode(&self, coeffs: &[u64]) -> Vec<i64> {
        let t = self.table.modulus();
        let mut evals: Vec<u64> = coeffs.iter().map(|&c| t.reduce(c)).collect();
        self.table.forward(&mut evals);
        let half = t.value() / 2;
        self.row_index
            .iter()
            .map(|&idx| {
                let r = evals[idx];
                if r > half {
                    r as i64 - t.value() as i64
                } else {
                    r as i64
                }
            })
            .collect()
    }

    /// The primitive 2n-th root of unity mod t the slots are evaluated at.
    pub fn root(&self) -> u64 {
        self.table.psi()
    }

    /// Galois element that rotates the data row left by `offset`.
    pub fn galois_element(&self, offset: usize) -> usize {
        let m = 2 * self.n as u64;
        let r = (offset % (self.n / 2)) as u64;
        let mut g = 1u64;
        let mut base = 3u64;
        let mut e = r;
        while e > 0 {
            if e & 1 == 1 {
                g = g * base % m;
            }
            base = base * base % m;
            e >>= 1;
        }
        g as usize
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    const T: u64 = 1032193;

    #[test]
    fn zero_encodes_to_zero_polynomial() {
        let enc = BatchEncoder::new(64, T);
        assert_eq!(enc.encode(&[0; 32]).unwrap(), vec![0; 64]);
        assert!(enc.encode(&[0; 31]).is_err());
    }

    #[test]
    fn unit_vector_evaluates_to_one_only_at_slot_zero_root() {
        let n = 64;
        let enc = BatchEncoder::new(n, T);
        let t = Modulus::new(T);
        let mut e0 = vec![0i64; n / 2];
        e0[0] = 1;
        let poly = enc.encode(&e0).unwrap();
        let horner = |x: u64| poly.iter().rev().fold(0u64, |acc, &c| t.add(t.mul(acc, x), c));
        // slot i lives at psi^(3^i mod 2n); the zero row at psi^(-3^i)
        let mut e = 1u64;
        for i in 0..n / 2 {
            let want = if i == 0 { 1 } else { 0 };
            assert_eq!(horner(t.pow(enc.root(), e)), want, "data slot {i}");
            assert_eq!(horner(t.pow(enc.root(), 2 * n as u64 - e)), 0, "zero row {i}");
            e = e * 3 % (2 * n as u64);
        }
    }

    proptest! {
        #[test]
        fn decode_inverts_encode(v in prop::collection::vec(-(T as i64 / 2)..=(T as i64 / 2), 32)) {
            let enc = BatchEncoder::new(64, T);
            prop_assert_eq!(enc.decode(&enc.encode(&v).unwrap()), v);
        }
    }
}
