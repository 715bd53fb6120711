//! Negacyclic number-theoretic transform over Z_p[X]/(X^n + 1).
//!
//! The forward transform leaves evaluations in bit-reversed order: output
//! index `j` holds `a(ψ^(2·rev(j)+1))` where ψ is a primitive 2n-th root.

use super::arith::Modulus;

#[derive(Debug, Clone)]
pub struct NttTable {
    n: usize,
    modulus: Modulus,
    psi: u64,
    psi_rev: Vec<u64>,
    psi_rev_shoup: Vec<u64>,
    psi_inv_rev: Vec<u64>,
    psi_inv_rev_shoup: Vec<u64>,
    n_inv: u64,
    n_inv_shoup: u64,
}

pub(crate) fn bit_reverse(x: usize, bits: u32) -> usize {
    if bits == 0 {
        0
    } else {
        x.reverse_bits() >> (usize::BITS - bits)
    }
}

impl NttTable {
    pub fn new(modulus: Modulus, n: usize) -> Self {
        assert!(n.is_power_of_two() && n >= 2);
        let p = modulus.value();
        assert_eq!((p - 1) % (2 * n as u64), 0, "{p} is not 1 mod 2n");
        let psi = (2..p)
            .map(|g| modulus.pow(g, (p - 1) / (2 * n as u64)))
            .find(|&r| modulus.pow(r, n as u64) == p - 1)
            .expect("prime has a primitive 2n-th root");
        let psi_inv = modulus.inv(psi);
        let bits = n.trailing_zeros();
        let mut psi_rev = vec![0; n];
        let mut psi_inv_rev = vec![0; n];
        let (mut pw, mut pw_inv) = (1u64, 1u64);
        for i in 0..n {
            let r = bit_reverse(i, bits);
            psi_rev[r] = pw;
            psi_inv_rev[r] = pw_inv;
            pw = modulus.mul(pw, psi);
            pw_inv = modulus.mul(pw_inv, psi_inv);
        }
        let n_inv = modulus.inv(n as u64);
        NttTable {
            n,
            modulus,
            psi,
            psi_rev_shoup: psi_rev.iter().map(|&w| modulus.shoup(w)).collect(),
            psi_rev,
            psi_inv_rev_shoup: psi_inv_rev.iter().map(|&w| modulus.shoup(w)).collect(),
            psi_inv_rev,
            n_inv,
            n_inv_shoup: modulus.shoup(n_inv),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn modulus(&self) -> &Modulus {
        &self.modulus
    }

    pub fn psi(&self) -> u64 {
        self.psi
    }

    pub fn forward(&self, a: &mut [u64]) {
        debug_assert_eq!(a.len(), self.n);
        let m_ = &self.modulus;
        let mut t = self.n;
        let mut m = 1;
        while m < self.n {
            t >>= 1;
            for i in 0..m {
                let j1 = 2 * i * t;
                let (w, ws) = (self.psi_rev[m + i], self.psi_rev_shoup[m + i]);
                for j in j1..j1 + t {
                    let u = a[j];
                    let v = m_.mul_shoup(a[j + t], w, ws);
                    a[j] = m_.add(u, v);
                    a[j + t] = m_.sub(u, v);
                }
            }
            m <<= 1;
        }
    }

    pub fn inverse(&self, a: &mut [u64]) {
        debug_assert_eq!(a.len(), self.n);
        let m_ = &self.modulus;
        let mut t = 1;
        let mut m = self.n;
        while m > 1 {
            let h = m >> 1;
            let mut j1 = 0;
            for i in 0..h {
                let (w, ws) = (self.psi_inv_rev[h + i], self.psi_inv_rev_shoup[h + i]);
                for j in j1..j1 + t {
                    let u = a[j];
                    let v = a[j + t];
                    a[j] = m_.add(u, v);
                    a[j + t] = m_.mul_shoup(m_.sub(u, v), w, ws);
                }
                j1 += 2 * t;
            }
            t <<= 1;
            m = h;
        }
        for x in a.iter_mut() {
            *x = m_.mul_shoup(*x, self.n_inv, self.n_inv_shoup);
        }
    }
}

/// Reference O(n²) negacyclic product.
pub fn negacyclic_schoolbook(a: &[u64], b: &[u64], modulus: &Modulus) -> Vec<u64> {
    let n = a.len();
    let mut out = vec![0u64; n];
    for i in 0..n {
        for j in 0..n {
            let prod = modulus.mul(a[i], b[j]);
            let k = i + j;
            if k < n {
                out[k] = modulus.add(out[k], prod);
            } else {
                out[k - n] = modulus.sub(out[k - n], prod);
            }
        }
    }
    out
}
