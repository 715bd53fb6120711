//! Polynomials in R_q = Z_q[X]/(X^n + 1) held in residue-number form.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::arith::Modulus;
use super::ntt::NttTable;

/// A CRT basis of NTT primes with the Garner constants needed to rebuild
/// mixed-radix digits.
#[derive(Debug, Clone)]
pub struct RnsBasis {
    n: usize,
    moduli: Vec<Modulus>,
    tables: Vec<NttTable>,
    /// `garner_inv[i][j]` = m_j^{-1} mod m_i for j < i.
    garner_inv: Vec<Vec<u64>>,
}

impl RnsBasis {
    pub fn new(n: usize, primes: &[u64]) -> Self {
        let moduli: Vec<Modulus> = primes.iter().map(|&p| Modulus::new(p)).collect();
        let tables = moduli.iter().map(|&m| NttTable::new(m, n)).collect();
        let garner_inv = moduli
            .iter()
            .enumerate()
            .map(|(i, mi)| (0..i).map(|j| mi.inv(mi.reduce(moduli[j].value()))).collect())
            .collect();
        RnsBasis { n, moduli, tables, garner_inv }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.moduli.len()
    }

    pub fn moduli(&self) -> &[Modulus] {
        &self.moduli
    }

    pub fn table(&self, i: usize) -> &NttTable {
        &self.tables[i]
    }

    /// Mixed-radix digits `v` with `x = v_0 + v_1 m_0 + v_2 m_0 m_1 + …`.
    #[inline]
    pub fn garner(&self, residues: &[u64], digits: &mut [u64]) {
        for i in 0..self.moduli.len() {
            let m = &self.moduli[i];
            let mut x = residues[i];
            for j in 0..i {
                x = m.mul(m.sub(x, m.reduce(digits[j])), self.garner_inv[i][j]);
            }
            digits[i] = x;
        }
    }

    /// Total bit size, log2 of the product of the moduli.
    pub fn bits(&self) -> f64 {
        self.moduli.iter().map(|m| (m.value() as f64).log2()).sum()
    }
}

/// `Π_{j<i} m_j mod target` for every prefix of `basis`.
pub(crate) fn prefix_products_mod(basis: &[Modulus], target: &Modulus) -> Vec<u64> {
    let mut out = Vec::with_capacity(basis.len());
    let mut acc = 1u64;
    for m in basis {
        out.push(acc);
        acc = target.mul(acc, target.reduce(m.value()));
    }
    out
}

/// Residue polynomial: `residues[i]` holds the coefficients (or NTT
/// evaluations) mod the i-th prime.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RnsPoly {
    pub residues: Vec<Vec<u64>>,
    pub ntt: bool,
}

impl RnsPoly {
    pub fn zero(basis: &RnsBasis, ntt: bool) -> Self {
        RnsPoly { residues: vec![vec![0; basis.n]; basis.len()], ntt }
    }

    /// Lifts small signed coefficients into every residue.
    pub fn from_signed(basis: &RnsBasis, coeffs: &[i64]) -> Self {
        let residues = basis
            .moduli
            .iter()
            .map(|m| coeffs.iter().map(|&c| m.reduce_i64(c)).collect())
            .collect();
        RnsPoly { residues, ntt: false }
    }

    pub fn uniform<R: Rng + ?Sized>(basis: &RnsBasis, rng: &mut R) -> Self {
        let residues = basis
            .moduli
            .iter()
            .map(|m| (0..basis.n).map(|_| rng.random_range(0..m.value())).collect())
            .collect();
        RnsPoly { residues, ntt: true }
    }

    pub fn to_ntt(&mut self, basis: &RnsBasis) {
        if !self.ntt {
            for (r, t) in self.residues.iter_mut().zip(&basis.tables) {
                t.forward(r);
            }
            self.ntt = true;
        }
    }

    pub fn to_coeff(&mut self, basis: &RnsBasis) {
        if self.ntt {
            for (r, t) in self.residues.iter_mut().zip(&basis.tables) {
                t.inverse(r);
            }
            self.ntt = false;
        }
    }

    pub fn ntt_form(mut self, basis: &RnsBasis) -> Self {
        self.to_ntt(basis);
        self
    }

    pub fn coeff_form(mut self, basis: &RnsBasis) -> Self {
        self.to_coeff(basis);
        self
    }

    pub fn add_assign(&mut self, other: &RnsPoly, basis: &RnsBasis) {
        debug_assert_eq!(self.ntt, other.ntt);
        for ((a, b), m) in self.residues.iter_mut().zip(&other.residues).zip(&basis.moduli) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x = m.add(*x, y);
            }
        }
    }

    pub fn sub_assign(&mut self, other: &RnsPoly, basis: &RnsBasis) {
        debug_assert_eq!(self.ntt, other.ntt);
        for ((a, b), m) in self.residues.iter_mut().zip(&other.residues).zip(&basis.moduli) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x = m.sub(*x, y);
            }
        }
    }

    pub fn neg_assign(&mut self, basis: &RnsBasis) {
        for (a, m) in self.residues.iter_mut().zip(&basis.moduli) {
            for x in a.iter_mut() {
                *x = m.neg(*x);
            }
        }
    }

    /// Pointwise product; both operands must be in NTT form.
    pub fn mul(&self, other: &RnsPoly, basis: &RnsBasis) -> RnsPoly {
        debug_assert!(self.ntt && other.ntt);
        let residues = self
            .residues
            .iter()
            .zip(&other.residues)
            .zip(&basis.moduli)
            .map(|((a, b), m)| a.iter().zip(b).map(|(&x, &y)| m.mul(x, y)).collect())
            .collect();
        RnsPoly { residues, ntt: true }
    }

    /// `self += a * b` pointwise, all in NTT form.
    pub fn fma_assign(&mut self, a: &RnsPoly, b: &RnsPoly, basis: &RnsBasis) {
        debug_assert!(self.ntt && a.ntt && b.ntt);
        for (((acc, x), y), m) in
            self.residues.iter_mut().zip(&a.residues).zip(&b.residues).zip(&basis.moduli)
        {
            for ((s, &u), &v) in acc.iter_mut().zip(x).zip(y) {
                *s = m.add(*s, m.mul(u, v));
            }
        }
    }

    /// Multiplies residue `i` by `scalars[i]`.
    pub fn mul_scalar_rns(&mut self, scalars: &[u64], basis: &RnsBasis) {
        for ((a, &s), m) in self.residues.iter_mut().zip(scalars).zip(&basis.moduli) {
            let ss = m.shoup(s);
            for x in a.iter_mut() {
                *x = m.mul_shoup(*x, s, ss);
            }
        }
    }

    /// Applies X → X^g, in coefficient form.
    pub fn automorphism(&self, g: usize, basis: &RnsBasis) -> RnsPoly {
        debug_assert!(!self.ntt);
        let n = basis.n;
        let mask = 2 * n - 1;
        let residues = self
            .residues
            .iter()
            .zip(&basis.moduli)
            .map(|(a, m)| {
                let mut out = vec![0u64; n];
                for (i, &c) in a.iter().enumerate() {
                    let j = (i * g) & mask;
                    if j < n {
                        out[j] = c;
                    } else {
                        out[j - n] = m.neg(c);
                    }
                }
                out
            })
            .collect();
        RnsPoly { residues, ntt: false }
    }
}

pub fn sample_ternary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<i64> {
    (0..n).map(|_| rng.random_range(-1i64..=1)).collect()
}

/// Rounded Gaussian, truncated at six standard deviations.
pub fn sample_gaussian<R: Rng + ?Sized>(n: usize, sigma: f64, rng: &mut R) -> Vec<i64> {
    let normal = Normal::new(0.0, sigma).expect("valid sigma");
    let bound = (6.0 * sigma).ceil();
    (0..n)
        .map(|_| normal.sample(rng).round().clamp(-bound, bound) as i64)
        .collect()
}
