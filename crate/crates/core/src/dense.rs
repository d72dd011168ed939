//! Dense k×d sign matrices with r-wise independent ±1/√k entries.
//!
//! Entry (i, j) is `sign(i·d + j) / √k` where `sign` is a range-2 member of
//! the polynomial hash family over `[k·d]`. Rows are the consecutive blocks
//! of that index space (row-major). The matrix is never stored.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hash::PolyHashFamily;
use crate::profile::{check_eps_delta, even_order, Profile};

/// Default practical constant in k = ceil(C_k·ε⁻²·ln(1/δ)).
pub const PRACTICAL_K_CONSTANT: f64 = 4.0;

/// 4·64², the analysis constant for the dense family.
pub const ANALYSIS_K_CONSTANT: f64 = 4.0 * 64.0 * 64.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DenseJLParams {
    pub epsilon: f64,
    pub delta: f64,
    pub k: usize,
    pub r: usize,
    pub profile: Profile,
}

impl DenseJLParams {
    /// Explicit dimension and independence order. `r` must be even and >= 2.
    pub fn custom(epsilon: f64, delta: f64, k: usize, r: usize, profile: Profile) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("target dimension k must be >= 1".into()));
        }
        if r < 2 || r % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "independence order r must be even and >= 2, got {r}"
            )));
        }
        Ok(Self {
            epsilon,
            delta,
            k,
            r,
            profile,
        })
    }

    /// r·ceil(log2 p) over 2^61 - 1.
    pub fn seed_bits(&self) -> u64 {
        self.r as u64 * crate::field::FieldPrime::mersenne61().element_bits() as u64
    }
}

/// Plans k and r for the dense family.
///
/// Practical: k = ceil(C_k·ε⁻²·ln(1/δ)) with C_k = 4. Paper-faithful:
/// k = ceil(4·64²·ε⁻²·log2(1/δ)). Both use r = 2·ceil(log2(1/δ)).
/// The variant profile only affects sparse plans and is treated as practical.
pub fn plan_dense(epsilon: f64, delta: f64, profile: Profile) -> Result<DenseJLParams> {
    check_eps_delta(epsilon, delta)?;
    let inv_eps2 = 1.0 / (epsilon * epsilon);
    let k = match profile {
        Profile::PaperFaithful => ANALYSIS_K_CONSTANT * inv_eps2 * (1.0 / delta).log2(),
        Profile::Practical | Profile::Variant => {
            PRACTICAL_K_CONSTANT * inv_eps2 * (1.0 / delta).ln()
        }
        Profile::Custom => {
            return Err(Error::InvalidParameter(
                "the custom profile takes explicit k and r".into(),
            ))
        }
    };
    let r = even_order((1.0 / delta).log2());
    DenseJLParams::custom(epsilon, delta, k.ceil() as usize, r, profile)
}

#[derive(Debug, Clone)]
pub struct DenseJLMatrix {
    params: DenseJLParams,
    d: usize,
    scale: f64,
    entries: PolyHashFamily,
}

impl DenseJLMatrix {
    pub fn new(params: DenseJLParams, d: usize, seed: &[u8]) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter("input dimension d must be >= 1".into()));
        }
        let n = (params.k as u128) * (d as u128);
        let field = crate::field::FieldPrime::mersenne61();
        if n > field.modulus() as u128 {
            return Err(Error::DomainOverflow {
                spread: n,
                modulus: field.modulus(),
            });
        }
        let entries = PolyHashFamily::sample_in(field, params.r, n as u64, 2, seed)?;
        Ok(Self {
            params,
            d,
            scale: 1.0 / (params.k as f64).sqrt(),
            entries,
        })
    }

    pub fn params(&self) -> &DenseJLParams {
        &self.params
    }

    pub fn input_dim(&self) -> usize {
        self.d
    }

    pub fn output_dim(&self) -> usize {
        self.params.k
    }

    pub fn entry_family(&self) -> &PolyHashFamily {
        &self.entries
    }

    pub fn seed_bits(&self) -> u64 {
        self.entries.seed_bits()
    }

    #[inline]
    fn entry_unchecked(&self, i: usize, j: usize) -> f64 {
        self.entries.sign_unchecked((i * self.d + j) as u64) * self.scale
    }

    pub fn entry(&self, i: usize, j: usize) -> Result<f64> {
        if i >= self.params.k {
            return Err(Error::Shape {
                expected: self.params.k,
                actual: i,
            });
        }
        if j >= self.d {
            return Err(Error::Shape {
                expected: self.d,
                actual: j,
            });
        }
        Ok(self.entry_unchecked(i, j))
    }

    /// y_i = Σ_j A_ij·x_j, summed in increasing j.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.d {
            return Err(Error::Shape {
                expected: self.d,
                actual: x.len(),
            });
        }
        Ok(self.apply_batch(&[x])?.pop().expect("one input, one output"))
    }

    /// Applies the matrix to several vectors, evaluating each entry once.
    /// Every output equals [`Self::apply`] on that vector bit for bit.
    pub fn apply_batch(&self, xs: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
        for x in xs {
            if x.len() != self.d {
                return Err(Error::Shape {
                    expected: self.d,
                    actual: x.len(),
                });
            }
        }
        let mut ys = vec![vec![0.0; self.params.k]; xs.len()];
        let mut row = vec![0.0; self.d];
        for i in 0..self.params.k {
            self.fill_row(i, &mut row);
            for (y, x) in ys.iter_mut().zip(xs) {
                y[i] = row.iter().zip(x.iter()).fold(0.0, |acc, (a, b)| acc + a * b);
            }
        }
        Ok(ys)
    }

    fn fill_row(&self, i: usize, row: &mut [f64]) {
        let base = (i * self.d) as u64;
        let mut chunks = row.chunks_exact_mut(4);
        let mut j = 0u64;
        for c in &mut chunks {
            let pts = [base + j, base + j + 1, base + j + 2, base + j + 3];
            let signs = self.entries.eval4_unchecked(pts);
            for (slot, &s) in c.iter_mut().zip(&signs) {
                *slot = if s == 0 { self.scale } else { -self.scale };
            }
            j += 4;
        }
        for slot in chunks.into_remainder() {
            *slot = self.entries.sign_unchecked(base + j) * self.scale;
            j += 1;
        }
    }

    /// Row-major k×d materialization.
    pub fn materialize(&self) -> Vec<Vec<f64>> {
        (0..self.params.k)
            .map(|i| (0..self.d).map(|j| self.entry_unchecked(i, j)).collect())
            .collect()
    }
}
