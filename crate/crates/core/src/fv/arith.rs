//! Word-sized modular arithmetic for NTT-friendly primes.

/// A prime modulus below 2^62 with a precomputed Barrett ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Modulus {
    p: u64,
    ratio_hi: u64,
    ratio_lo: u64,
}

impl Modulus {
    pub fn new(p: u64) -> Self {
        assert!(p > 2 && p < 1 << 62, "modulus {p} out of range");
        // floor(2^128 / p) = floor((2^128 - 1) / p) since p is not a power of two
        let ratio = u128::MAX / p as u128;
        Modulus { p, ratio_hi: (ratio >> 64) as u64, ratio_lo: ratio as u64 }
    }

    #[inline]
    pub fn value(&self) -> u64 {
        self.p
    }

    #[inline]
    pub fn reduce_u128(&self, x: u128) -> u64 {
        let xl = x as u64 as u128;
        let xh = (x >> 64) as u64 as u128;
        let rl = self.ratio_lo as u128;
        let rh = self.ratio_hi as u128;
        let mid = ((xl * rl) >> 64) + xh * rl + xl * rh;
        let q = xh * rh + (mid >> 64);
        let mut r = (x as u64).wrapping_sub((q as u64).wrapping_mul(self.p));
        while r >= self.p {
            r -= self.p;
        }
        r
    }

    #[inline]
    pub fn reduce(&self, x: u64) -> u64 {
        x % self.p
    }

    #[inline]
    pub fn reduce_i64(&self, x: i64) -> u64 {
        x.rem_euclid(self.p as i64) as u64
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.p {
            s - self.p
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.p - b
        }
    }

    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.p - a
        }
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        self.reduce_u128(a as u128 * b as u128)
    }

    /// Precomputed companion for repeated multiplication by `w`.
    #[inline]
    pub fn shoup(&self, w: u64) -> u64 {
        (((w as u128) << 64) / self.p as u128) as u64
    }

    #[inline]
    pub fn mul_shoup(&self, a: u64, w: u64, w_shoup: u64) -> u64 {
        let q = ((a as u128 * w_shoup as u128) >> 64) as u64;
        let r = a.wrapping_mul(w).wrapping_sub(q.wrapping_mul(self.p));
        if r >= self.p {
            r - self.p
        } else {
            r
        }
    }

    pub fn pow(&self, mut base: u64, mut exp: u64) -> u64 {
        let mut acc = 1u64;
        base %= self.p;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    pub fn inv(&self, a: u64) -> u64 {
        assert!(a % self.p != 0, "zero has no inverse");
        self.pow(a, self.p - 2)
    }
}

/// Deterministic Miller–Rabin for 64-bit integers.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n % p == 0 {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    let mulmod = |a: u64, b: u64| ((a as u128 * b as u128) % n as u128) as u64;
    let powmod = |mut b: u64, mut e: u64| {
        let mut acc = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                acc = mulmod(acc, b);
            }
            b = mulmod(b, b);
            e >>= 1;
        }
        acc
    };
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = powmod(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mulmod(x, x);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// The `count` largest primes below `2^bits` that are ≡ 1 mod `2n`,
/// skipping any listed in `exclude`.
pub fn ntt_primes(bits: u32, n: usize, count: usize, exclude: &[u64]) -> Vec<u64> {
    let step = 2 * n as u64;
    let mut candidate = ((1u64 << bits) - 1) / step * step + 1;
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        if candidate < step {
            panic!("ran out of {bits}-bit NTT primes");
        }
        if is_prime(candidate) && !exclude.contains(&candidate) {
            out.push(candidate);
        }
        candidate -= step;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn primes_are_ntt_friendly() {
        let ps = ntt_primes(60, 4096, 3, &[]);
        assert_eq!(ps, vec![1152921504606830593, 1152921504606748673, 1152921504606683137]);
        assert!(is_prime(1032193));
        assert!(!is_prime(1032195));
        assert!(is_prime(4398047232001));
    }

    proptest! {
        #[test]
        fn barrett_and_shoup_match_u128_remainder(a in any::<u64>(), b in any::<u64>(), pick in 0usize..4) {
            let p = [1152921504606830593u64, 1032193, 4503599627763713, (1 << 61) - 1][pick];
            let m = Modulus::new(p);
            let (a, b) = (a % p, b % p);
            let expect = ((a as u128 * b as u128) % p as u128) as u64;
            prop_assert_eq!(m.mul(a, b), expect);
            prop_assert_eq!(m.mul_shoup(a, b, m.shoup(b)), expect);
        }
    }

    #[test]
    fn inverse() {
        let m = Modulus::new(1032193);
        for a in [1u64, 2, 12345, 1032192] {
            assert_eq!(m.mul(a, m.inv(a)), 1);
        }
    }
}
