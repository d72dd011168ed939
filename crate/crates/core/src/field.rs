//! Prime-field arithmetic for the polynomial hash families.
//!
//! The default modulus is the Mersenne prime 2^61 - 1, which admits a
//! shift-and-add reduction. Any other prime below 2^62 is accepted and
//! reduced through a 128-bit remainder; small primes such as 5 and 7 are
//! what the exhaustive independence tests run on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 2^61 - 1.
pub const MERSENNE_61: u64 = (1 << 61) - 1;

/// Largest modulus accepted. Two reduced elements must sum without overflow.
const MAX_MODULUS: u64 = 1 << 62;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u64", into = "u64")]
pub struct FieldPrime {
    p: u64,
}

impl Default for FieldPrime {
    fn default() -> Self {
        Self::mersenne61()
    }
}

impl TryFrom<u64> for FieldPrime {
    type Error = Error;

    fn try_from(p: u64) -> Result<Self> {
        Self::new(p)
    }
}

impl From<FieldPrime> for u64 {
    fn from(f: FieldPrime) -> u64 {
        f.p
    }
}

impl FieldPrime {
    pub const fn mersenne61() -> Self {
        Self { p: MERSENNE_61 }
    }

    pub fn new(p: u64) -> Result<Self> {
        if p >= MAX_MODULUS {
            return Err(Error::UnsupportedParameters(format!(
                "modulus {p} must be below 2^62"
            )));
        }
        if !is_prime(p) {
            return Err(Error::UnsupportedParameters(format!("{p} is not prime")));
        }
        Ok(Self { p })
    }

    #[inline]
    pub fn modulus(&self) -> u64 {
        self.p
    }

    /// ceil(log2 p): bits needed to write one field element.
    pub fn element_bits(&self) -> u32 {
        64 - (self.p - 1).leading_zeros()
    }

    #[inline]
    pub fn reduce(&self, v: u64) -> u64 {
        if self.p == MERSENNE_61 {
            let r = (v & MERSENNE_61) + (v >> 61);
            if r >= MERSENNE_61 {
                r - MERSENNE_61
            } else {
                r
            }
        } else {
            v % self.p
        }
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
        let wide = a as u128 * b as u128;
        if self.p == MERSENNE_61 {
            // a, b < 2^61 so wide < 2^122; fold the high bits twice.
            let lo = (wide as u64) & MERSENNE_61;
            let hi = (wide >> 61) as u64;
            let r = lo + hi;
            if r >= MERSENNE_61 {
                r - MERSENNE_61
            } else {
                r
            }
        } else {
            (wide % self.p as u128) as u64
        }
    }

    /// a·x + c over 2^61 - 1 for reduced operands, without the modulus test.
    #[inline(always)]
    pub(crate) fn mul_add_m61(a: u64, x: u64, c: u64) -> u64 {
        let wide = a as u128 * x as u128 + c as u128;
        let r = ((wide as u64) & MERSENNE_61) + (wide >> 61) as u64;
        let r = (r & MERSENNE_61) + (r >> 61);
        if r >= MERSENNE_61 {
            r - MERSENNE_61
        } else {
            r
        }
    }

    pub fn pow(&self, mut base: u64, mut exp: u64) -> u64 {
        let mut acc = 1 % self.p;
        base = self.reduce(base);
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    (a as u128 * b as u128 % m as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin; the witness set below is exact for all u64.
pub fn is_prime(n: u64) -> bool {
    const WITNESSES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for &w in &WITNESSES {
        if n % w == 0 {
            return n == w;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for &a in &WITNESSES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}
