/// Arithmetic in Z_t for the plaintext modulus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlainModulus {
    t: u64,
}

impl PlainModulus {
    pub fn new(t: u64) -> Self {
        assert!(t >= 2 && t < 1 << 62);
        PlainModulus { t }
    }

    #[inline]
    pub fn value(&self) -> u64 {
        self.t
    }

    /// Canonical residue in [0, t).
    #[inline]
    pub fn reduce(&self, v: i64) -> u64 {
        v.rem_euclid(self.t as i64) as u64
    }

    /// Centered representative in (−t/2, t/2].
    #[inline]
    pub fn center(&self, r: u64) -> i64 {
        if r > self.t / 2 {
            r as i64 - self.t as i64
        } else {
            r as i64
        }
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.t {
            s - self.t
        } else {
            s
        }
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        if self.t <= 1 << 32 {
            a * b % self.t
        } else {
            ((a as u128 * b as u128) % self.t as u128) as u64
        }
    }
}
