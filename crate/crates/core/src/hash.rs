//! r-wise independent hash families realized as random polynomials of
//! degree below r over a prime field.
//!
//! A family member is fixed by its seed. Coefficients are derived from the
//! seed by a SHA-256 counter-mode stream: block `i` is
//! `SHA-256("sketchjl/poly-hash/v1" || seed || i as u64 little-endian)`,
//! each block is cut into four little-endian u64 words, each word is masked
//! to `ceil(log2 p)` bits, and words `>= p` are rejected. The first `r`
//! accepted words are the coefficients, lowest degree first.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::field::{FieldPrime, MERSENNE_61};
use crate::multipoint;

const EXPANSION_TAG: &[u8] = b"sketchjl/poly-hash/v1";

/// Batches at least this long, for polynomials with at least this many
/// coefficients, go through subproduct-tree evaluation.
const MULTIPOINT_MIN_DEGREE: usize = 64;

/// Deterministic stream of uniform field elements derived from a seed.
pub struct SeedExpander<'a> {
    field: FieldPrime,
    seed: &'a [u8],
    counter: u64,
    block: [u8; 32],
    offset: usize,
}

impl<'a> SeedExpander<'a> {
    pub fn new(field: FieldPrime, seed: &'a [u8]) -> Self {
        Self {
            field,
            seed,
            counter: 0,
            block: [0; 32],
            offset: 32,
        }
    }

    fn next_word(&mut self) -> u64 {
        if self.offset == 32 {
            let mut hasher = Sha256::new();
            hasher.update(EXPANSION_TAG);
            hasher.update(self.seed);
            hasher.update(self.counter.to_le_bytes());
            self.block.copy_from_slice(&hasher.finalize());
            self.counter += 1;
            self.offset = 0;
        }
        let mut word = [0u8; 8];
        word.copy_from_slice(&self.block[self.offset..self.offset + 8]);
        self.offset += 8;
        u64::from_le_bytes(word)
    }
}

impl Iterator for SeedExpander<'_> {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        let bits = self.field.element_bits();
        let mask = if bits >= 64 { u64::MAX } else { (1u64 << bits) - 1 };
        loop {
            let v = self.next_word() & mask;
            if v < self.field.modulus() {
                return Some(v);
            }
        }
    }
}

/// A member of the degree-below-r polynomial family mapping `[n]` into `[m]`.
///
/// `coeffs[i]` multiplies `x^i`. Leading coefficients may be zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolyHashFamily {
    field: FieldPrime,
    coeffs: Vec<u64>,
    domain_size: u64,
    range_size: u64,
    seed: Vec<u8>,
}

/// Serialized form of a family. Coefficients are re-derived on load.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilyRecord {
    pub p: u64,
    pub r: usize,
    pub n: u64,
    pub m: u64,
    pub seed: String,
}

fn check_sizes(field: FieldPrime, n: u64, m: u64) -> Result<()> {
    let p = field.modulus();
    if n > p {
        return Err(Error::UnsupportedParameters(format!(
            "domain size {n} exceeds field modulus {p}"
        )));
    }
    if m > p {
        return Err(Error::UnsupportedParameters(format!(
            "range size {m} exceeds field modulus {p}"
        )));
    }
    if m < 2 {
        return Err(Error::UnsupportedParameters(format!(
            "range size {m} must be at least 2"
        )));
    }
    Ok(())
}

impl PolyHashFamily {
    /// Samples the family member selected by `seed` over 2^61 - 1.
    pub fn sample(r: usize, n: u64, m: u64, seed: &[u8]) -> Result<Self> {
        Self::sample_in(FieldPrime::mersenne61(), r, n, m, seed)
    }

    pub fn sample_in(field: FieldPrime, r: usize, n: u64, m: u64, seed: &[u8]) -> Result<Self> {
        if r == 0 {
            return Err(Error::InvalidParameter(
                "independence order r must be at least 1".into(),
            ));
        }
        check_sizes(field, n, m)?;
        if seed.is_empty() {
            return Err(Error::InvalidSeed("seed must be non-empty".into()));
        }
        let coeffs = SeedExpander::new(field, seed).take(r).collect();
        Ok(Self {
            field,
            coeffs,
            domain_size: n,
            range_size: m,
            seed: seed.to_vec(),
        })
    }

    /// Builds a family member from explicit coefficients, lowest degree first.
    /// Such a member has no seed and cannot be serialized.
    pub fn from_coeffs(field: FieldPrime, coeffs: Vec<u64>, n: u64, m: u64) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidParameter(
                "independence order r must be at least 1".into(),
            ));
        }
        check_sizes(field, n, m)?;
        if let Some(&bad) = coeffs.iter().find(|&&c| c >= field.modulus()) {
            return Err(Error::InvalidParameter(format!(
                "coefficient {bad} is not a reduced field element"
            )));
        }
        Ok(Self {
            field,
            coeffs,
            domain_size: n,
            range_size: m,
            seed: Vec::new(),
        })
    }

    pub fn from_record(rec: &FamilyRecord) -> Result<Self> {
        let field = FieldPrime::new(rec.p)?;
        let seed = hex::decode(&rec.seed)
            .map_err(|e| Error::InvalidSeed(format!("seed is not hex: {e}")))?;
        Self::sample_in(field, rec.r, rec.n, rec.m, &seed)
    }

    pub fn to_record(&self) -> Result<FamilyRecord> {
        if self.seed.is_empty() {
            return Err(Error::InvalidSeed(
                "family built from explicit coefficients has no seed".into(),
            ));
        }
        Ok(FamilyRecord {
            p: self.field.modulus(),
            r: self.coeffs.len(),
            n: self.domain_size,
            m: self.range_size,
            seed: hex::encode(&self.seed),
        })
    }

    pub fn field(&self) -> FieldPrime {
        self.field
    }

    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }

    /// Independence order r (number of coefficients).
    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    pub fn domain_size(&self) -> u64 {
        self.domain_size
    }

    pub fn range_size(&self) -> u64 {
        self.range_size
    }

    pub fn seed(&self) -> &[u8] {
        &self.seed
    }

    /// r * ceil(log2 p).
    pub fn seed_bits(&self) -> u64 {
        self.coeffs.len() as u64 * self.field.element_bits() as u64
    }

    /// Polynomial value in the field, before range reduction.
    #[inline]
    pub fn field_value(&self, x: u64) -> u64 {
        let f = &self.field;
        self.coeffs
            .iter()
            .rev()
            .fold(0, |acc, &c| f.add(f.mul(acc, x), c))
    }

    #[inline(always)]
    fn to_range(&self, v: u64) -> u64 {
        if self.range_size.is_power_of_two() {
            v & (self.range_size - 1)
        } else {
            v % self.range_size
        }
    }

    /// Four interleaved Horner evaluations, range-reduced.
    #[inline]
    pub(crate) fn eval4_unchecked(&self, xs: [u64; 4]) -> [u64; 4] {
        let f = &self.field;
        let mut acc = [0u64; 4];
        if f.modulus() == MERSENNE_61 {
            for &c in self.coeffs.iter().rev() {
                for (a, &x) in acc.iter_mut().zip(&xs) {
                    *a = FieldPrime::mul_add_m61(*a, x, c);
                }
            }
            return acc.map(|a| self.to_range(a));
        }
        for &c in self.coeffs.iter().rev() {
            for (a, &x) in acc.iter_mut().zip(&xs) {
                *a = f.add(f.mul(*a, x), c);
            }
        }
        acc.map(|a| self.to_range(a))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: u64) -> u64 {
        self.to_range(self.field_value(x))
    }

    pub fn eval(&self, x: u64) -> Result<u64> {
        if x >= self.domain_size {
            return Err(Error::OutOfDomain {
                position: 0,
                index: x,
                domain: self.domain_size,
            });
        }
        Ok(self.eval_unchecked(x))
    }

    fn check_batch(&self, xs: &[u64]) -> Result<()> {
        match xs.iter().position(|&x| x >= self.domain_size) {
            Some(position) => Err(Error::OutOfDomain {
                position,
                index: xs[position],
                domain: self.domain_size,
            }),
            None => Ok(()),
        }
    }

    /// Evaluates every point, switching to subproduct-tree evaluation for
    /// high-degree polynomials on long batches.
    pub fn eval_batch(&self, xs: &[u64]) -> Result<Vec<u64>> {
        self.check_batch(xs)?;
        if self.order() >= MULTIPOINT_MIN_DEGREE && xs.len() >= self.order() {
            return Ok(self.multipoint_values(xs));
        }
        let mut out = Vec::with_capacity(xs.len());
        let mut chunks = xs.chunks_exact(4);
        for c in &mut chunks {
            out.extend(self.eval4_unchecked([c[0], c[1], c[2], c[3]]));
        }
        out.extend(chunks.remainder().iter().map(|&x| self.eval_unchecked(x)));
        Ok(out)
    }

    /// Subproduct-tree evaluation regardless of batch length or degree.
    pub fn eval_batch_multipoint(&self, xs: &[u64]) -> Result<Vec<u64>> {
        self.check_batch(xs)?;
        Ok(self.multipoint_values(xs))
    }

    fn multipoint_values(&self, xs: &[u64]) -> Vec<u64> {
        let mut out = multipoint::evaluate(&self.field, &self.coeffs, xs);
        for v in &mut out {
            *v %= self.range_size;
        }
        out
    }

    #[inline]
    pub(crate) fn sign_unchecked(&self, x: u64) -> f64 {
        if self.eval_unchecked(x) == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Maps residue 0 to +1 and residue 1 to -1.
    pub fn sign_eval(&self, x: u64) -> Result<f64> {
        if self.range_size != 2 {
            return Err(Error::WrongRange(self.range_size));
        }
        self.eval(x)?;
        Ok(self.sign_unchecked(x))
    }
}
