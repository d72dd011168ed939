//! Sparse JL transform: replicate each coordinate `alpha` times at weight
//! `c = 1/√alpha`, then hash every replica to one signed row.
//!
//! Coordinate `j` (0-based) owns replicas `u = j·alpha + i` for
//! `i in 0..alpha`; replica `u` lands in row `h(u)` with sign `σ(u)`.
//! Neither the replication matrix nor the hash matrix is stored, so applying
//! the transform to `x` costs `2·alpha·nnz(x)` hash evaluations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::FieldPrime;
use crate::hash::PolyHashFamily;
use crate::profile::{check_eps_delta, even_order, next_pow2_at_least, Profile};

/// 28·64², the analysis constant for the sparse family's target dimension.
pub const ANALYSIS_K_CONSTANT: f64 = 28.0 * 64.0 * 64.0;

/// Tunable constants of the practical and variant plans.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparseConstants {
    /// k = ceil(c_k·ε⁻²·log2(1/δ)).
    pub c_k: f64,
    /// Scales the column sparsity before rounding up to a power of two.
    pub c_alpha: f64,
    /// Scales the independence order of the row hash.
    pub c_h: f64,
    /// γ in the variant's ε^(−γ/log2(1/δ)) sparsity factor.
    pub variant_exponent: f64,
}

impl Default for SparseConstants {
    fn default() -> Self {
        Self {
            c_k: 4.0,
            c_alpha: 1.0,
            c_h: 1.0,
            variant_exponent: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseParams {
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub d: usize,
    pub k: usize,
    /// Column sparsity; a power of two.
    pub alpha: usize,
    /// ∞-norm cap of the spread vector, exactly 1/√alpha.
    pub c: f64,
    pub r_h: usize,
    pub r_sigma: usize,
    pub profile: Profile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl SparseParams {
    /// Parameters given directly. `alpha` must be a power of two.
    pub fn custom(d: usize, k: usize, alpha: usize, r_h: usize, r_sigma: usize) -> Result<Self> {
        let params = Self {
            epsilon: None,
            delta: None,
            d,
            k,
            alpha,
            c: 1.0 / (alpha as f64).sqrt(),
            r_h,
            r_sigma,
            profile: Profile::Custom,
            warning: None,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::InvalidParameter("d must be >= 1".into()));
        }
        if self.k < 2 {
            return Err(Error::InvalidParameter(
                "target dimension k must be >= 2 for a row hash".into(),
            ));
        }
        if !self.alpha.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "column sparsity {} is not a power of two",
                self.alpha
            )));
        }
        if self.c != 1.0 / (self.alpha as f64).sqrt() {
            return Err(Error::InvalidParameter(format!(
                "c = {} does not equal 1/sqrt({})",
                self.c, self.alpha
            )));
        }
        if self.r_h == 0 || self.r_sigma == 0 {
            return Err(Error::InvalidParameter(
                "independence orders must be >= 1".into(),
            ));
        }
        let p = FieldPrime::mersenne61().modulus();
        let spread = self.d as u128 * self.alpha as u128;
        if spread > p as u128 {
            return Err(Error::DomainOverflow { spread, modulus: p });
        }
        if self.k as u128 > p as u128 {
            return Err(Error::UnsupportedParameters(format!(
                "target dimension {} exceeds the field modulus",
                self.k
            )));
        }
        Ok(())
    }

    /// D = d·alpha.
    pub fn spread_dim(&self) -> usize {
        self.d * self.alpha
    }

    /// (r_h + r_σ)·ceil(log2 p) over 2^61 - 1.
    pub fn seed_bits(&self) -> u64 {
        seed_bits(self.r_h, self.r_sigma, FieldPrime::mersenne61())
    }
}

/// (r_h + r_σ)·ceil(log2 p).
pub fn seed_bits(r_h: usize, r_sigma: usize, field: FieldPrime) -> u64 {
    (r_h + r_sigma) as u64 * field.element_bits() as u64
}

pub fn plan_sparse(epsilon: f64, delta: f64, d: usize, profile: Profile) -> Result<SparseParams> {
    plan_sparse_with(epsilon, delta, d, profile, &SparseConstants::default())
}

/// Plans k, alpha, c and the independence orders.
///
/// With L = log2(1/δ):
/// - practical: k = ceil(c_k·ε⁻²·L), alpha ≥ c_alpha·ε⁻¹·L·log2(k/δ),
///   r_h = 2·ceil(c_h·log2(k/δ));
/// - paper-faithful: as practical but k = ceil(28·64²·ε⁻²·L) and unit
///   constants elsewhere;
/// - variant: practical k, alpha ≥ c_alpha·ε⁻¹·L²·ε^(−γ/L),
///   r_h = 2·ceil(c_h·L).
///
/// All profiles use r_σ = 2·ceil(L), round alpha up to a power of two and set
/// c = 1/√alpha.
pub fn plan_sparse_with(
    epsilon: f64,
    delta: f64,
    d: usize,
    profile: Profile,
    consts: &SparseConstants,
) -> Result<SparseParams> {
    check_eps_delta(epsilon, delta)?;
    if d == 0 {
        return Err(Error::InvalidParameter("input dimension d must be >= 1".into()));
    }
    let log_inv_delta = (1.0 / delta).log2();
    let inv_eps2 = 1.0 / (epsilon * epsilon);
    let (k, c_alpha, c_h, warning) = match profile {
        Profile::Practical | Profile::Variant => (
            (consts.c_k * inv_eps2 * log_inv_delta).ceil(),
            consts.c_alpha,
            consts.c_h,
            None,
        ),
        Profile::PaperFaithful => (
            (ANALYSIS_K_CONSTANT * inv_eps2 * log_inv_delta).ceil(),
            1.0,
            1.0,
            Some(
                "analysis-grade constants: k is far larger than needed in practice".to_string(),
            ),
        ),
        Profile::Custom => {
            return Err(Error::InvalidParameter(
                "the custom profile takes explicit parameters".into(),
            ))
        }
    };
    let log_k_delta = (k / delta).log2();
    let (alpha_target, r_h) = if profile == Profile::Variant {
        let boost = epsilon.powf(-consts.variant_exponent / log_inv_delta);
        (
            c_alpha / epsilon * log_inv_delta * log_inv_delta * boost,
            even_order(c_h * log_inv_delta),
        )
    } else {
        (
            c_alpha / epsilon * log_inv_delta * log_k_delta,
            even_order(c_h * log_k_delta),
        )
    };
    let alpha = next_pow2_at_least(alpha_target) as usize;
    let params = SparseParams {
        epsilon: Some(epsilon),
        delta: Some(delta),
        d,
        k: k as usize,
        alpha,
        c: 1.0 / (alpha as f64).sqrt(),
        r_h,
        r_sigma: even_order(log_inv_delta),
        profile,
        warning,
    };
    params.validate()?;
    Ok(params)
}

/// Hash evaluations performed by one application.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ApplyStats {
    pub hash_evals: u64,
}

/// JSON descriptor of a transform. Seeds are lowercase hex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformDescriptor {
    pub d: usize,
    pub k: usize,
    pub alpha: usize,
    pub c: f64,
    pub r_h: usize,
    pub r_sigma: usize,
    pub p: u64,
    pub seed_h: String,
    pub seed_sigma: String,
    pub profile: Profile,
}

#[derive(Debug, Clone)]
pub struct SparseJLTransform {
    params: SparseParams,
    h: PolyHashFamily,
    sigma: PolyHashFamily,
}

impl SparseJLTransform {
    pub fn new(params: SparseParams, seed_h: &[u8], seed_sigma: &[u8]) -> Result<Self> {
        Self::new_in(FieldPrime::mersenne61(), params, seed_h, seed_sigma)
    }

    fn new_in(
        field: FieldPrime,
        params: SparseParams,
        seed_h: &[u8],
        seed_sigma: &[u8],
    ) -> Result<Self> {
        params.validate()?;
        let spread = params.spread_dim() as u64;
        let h = PolyHashFamily::sample_in(field, params.r_h, spread, params.k as u64, seed_h)?;
        let sigma = PolyHashFamily::sample_in(field, params.r_sigma, spread, 2, seed_sigma)?;
        Ok(Self { params, h, sigma })
    }

    /// Derives both hash seeds from one master seed by suffixing `/h` and `/sigma`.
    pub fn from_seed(params: SparseParams, seed: &[u8]) -> Result<Self> {
        if seed.is_empty() {
            return Err(Error::InvalidSeed("seed must be non-empty".into()));
        }
        let seed_h = [seed, b"/h"].concat();
        let seed_sigma = [seed, b"/sigma"].concat();
        Self::new(params, &seed_h, &seed_sigma)
    }

    pub fn from_descriptor(desc: &TransformDescriptor) -> Result<Self> {
        let field = FieldPrime::new(desc.p)?;
        let params = SparseParams {
            epsilon: None,
            delta: None,
            d: desc.d,
            k: desc.k,
            alpha: desc.alpha,
            c: desc.c,
            r_h: desc.r_h,
            r_sigma: desc.r_sigma,
            profile: desc.profile,
            warning: None,
        };
        let decode = |s: &str, which: &str| {
            hex::decode(s).map_err(|e| Error::InvalidSeed(format!("{which} is not hex: {e}")))
        };
        let seed_h = decode(&desc.seed_h, "seed_h")?;
        let seed_sigma = decode(&desc.seed_sigma, "seed_sigma")?;
        Self::new_in(field, params, &seed_h, &seed_sigma)
    }

    pub fn descriptor(&self) -> TransformDescriptor {
        let p = &self.params;
        TransformDescriptor {
            d: p.d,
            k: p.k,
            alpha: p.alpha,
            c: p.c,
            r_h: p.r_h,
            r_sigma: p.r_sigma,
            p: self.h.field().modulus(),
            seed_h: hex::encode(self.h.seed()),
            seed_sigma: hex::encode(self.sigma.seed()),
            profile: p.profile,
        }
    }

    pub fn params(&self) -> &SparseParams {
        &self.params
    }

    pub fn row_hash(&self) -> &PolyHashFamily {
        &self.h
    }

    pub fn sign_hash(&self) -> &PolyHashFamily {
        &self.sigma
    }

    pub fn seed_bits(&self) -> u64 {
        self.h.seed_bits() + self.sigma.seed_bits()
    }

    pub fn input_dim(&self) -> usize {
        self.params.d
    }

    pub fn output_dim(&self) -> usize {
        self.params.k
    }

    /// Row and sign of spread coordinate `u`.
    #[inline]
    pub fn bucket(&self, u: usize) -> (usize, f64) {
        (
            self.h.eval_unchecked(u as u64) as usize,
            self.sigma.sign_unchecked(u as u64),
        )
    }

    /// Adds the image of `v·e_j` into `y`; returns the hash evaluations spent.
    #[inline]
    fn accumulate(&self, y: &mut [f64], j: usize, v: f64) -> u64 {
        let alpha = self.params.alpha;
        let cv = self.params.c * v;
        self.for_each_replica(j, |row, sign| y[row] += sign * cv);
        2 * alpha as u64
    }

    /// Calls `f(row, sign)` for the replicas of coordinate `j` in order.
    #[inline]
    fn for_each_replica(&self, j: usize, mut f: impl FnMut(usize, f64)) {
        let alpha = self.params.alpha as u64;
        let start = j as u64 * alpha;
        let end = start + alpha;
        let mut u = start;
        while u + 4 <= end {
            let pts = [u, u + 1, u + 2, u + 3];
            let rows = self.h.eval4_unchecked(pts);
            let signs = self.sigma.eval4_unchecked(pts);
            for (&row, &s) in rows.iter().zip(&signs) {
                f(row as usize, if s == 0 { 1.0 } else { -1.0 });
            }
            u += 4;
        }
        for u in u..end {
            let (row, sign) = self.bucket(u as usize);
            f(row, sign);
        }
    }

    /// Embeds several dense vectors with one pass over the hash values.
    /// Each output is bit-identical to [`Self::apply`] on that vector.
    pub fn apply_batch(&self, xs: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
        for x in xs {
            if x.len() != self.params.d {
                return Err(Error::Shape {
                    expected: self.params.d,
                    actual: x.len(),
                });
            }
        }
        let mut ys = vec![vec![0.0; self.params.k]; xs.len()];
        let c = self.params.c;
        for j in 0..self.params.d {
            if xs.iter().all(|x| x[j] == 0.0) {
                continue;
            }
            self.for_each_replica(j, |row, sign| {
                for (y, x) in ys.iter_mut().zip(xs) {
                    if x[j] != 0.0 {
                        y[row] += sign * (c * x[j]);
                    }
                }
            });
        }
        Ok(ys)
    }

    fn check_index(&self, j: usize) -> Result<()> {
        if j >= self.params.d {
            return Err(Error::Shape {
                expected: self.params.d,
                actual: j,
            });
        }
        Ok(())
    }

    /// Embeds a dense vector, touching only its nonzero coordinates in
    /// increasing index order.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.apply_with_stats(x)?.0)
    }

    pub fn apply_with_stats(&self, x: &[f64]) -> Result<(Vec<f64>, ApplyStats)> {
        if x.len() != self.params.d {
            return Err(Error::Shape {
                expected: self.params.d,
                actual: x.len(),
            });
        }
        let mut y = vec![0.0; self.params.k];
        let mut stats = ApplyStats::default();
        for (j, &v) in x.iter().enumerate() {
            if v != 0.0 {
                stats.hash_evals += self.accumulate(&mut y, j, v);
            }
        }
        Ok((y, stats))
    }

    /// Embeds a coordinate list (0-based indices, duplicates summed),
    /// accumulating entries in list order.
    pub fn apply_coords(&self, coords: &[(usize, f64)]) -> Result<Vec<f64>> {
        for &(j, _) in coords {
            self.check_index(j)?;
        }
        let mut y = vec![0.0; self.params.k];
        for &(j, v) in coords {
            self.accumulate(&mut y, j, v);
        }
        Ok(y)
    }

    /// Materialized k×D hash matrix: one ±1 per column.
    pub fn materialize_hash_matrix(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.params.spread_dim()]; self.params.k];
        for u in 0..self.params.spread_dim() {
            let (row, sign) = self.bucket(u);
            m[row][u] = sign;
        }
        m
    }

    /// Materialized k×d composed matrix (hash matrix times replication).
    pub fn materialize_composed(&self) -> Vec<Vec<f64>> {
        let alpha = self.params.alpha;
        let mut m = vec![vec![0.0; self.params.d]; self.params.k];
        for j in 0..self.params.d {
            for u in j * alpha..(j + 1) * alpha {
                let (row, sign) = self.bucket(u);
                m[row][j] += sign * self.params.c;
            }
        }
        m
    }
}

/// x̃ with x̃[j·alpha + i] = c·x[j].
pub fn spread(x: &[f64], params: &SparseParams) -> Result<Vec<f64>> {
    if x.len() != params.d {
        return Err(Error::Shape {
            expected: params.d,
            actual: x.len(),
        });
    }
    Ok(x.iter()
        .flat_map(|&v| std::iter::repeat_n(params.c * v, params.alpha))
        .collect())
}

/// Running embedding of a turnstile stream: after any prefix of updates,
/// `y` equals the embedding of the net update vector.
#[derive(Debug, Clone)]
pub struct TurnstileSketch<'a> {
    transform: &'a SparseJLTransform,
    y: Vec<f64>,
    updates_applied: u64,
    hash_evals: u64,
}

impl<'a> TurnstileSketch<'a> {
    pub fn new(transform: &'a SparseJLTransform) -> Self {
        Self {
            transform,
            y: vec![0.0; transform.output_dim()],
            updates_applied: 0,
            hash_evals: 0,
        }
    }

    /// x_j += v, with j 0-based.
    pub fn update(&mut self, j: usize, v: f64) -> Result<()> {
        self.transform.check_index(j)?;
        self.hash_evals += self.transform.accumulate(&mut self.y, j, v);
        self.updates_applied += 1;
        Ok(())
    }

    pub fn sketch(&self) -> &[f64] {
        &self.y
    }

    pub fn snapshot(&self) -> Vec<f64> {
        self.y.clone()
    }

    pub fn updates_applied(&self) -> u64 {
        self.updates_applied
    }

    pub fn hash_evals(&self) -> u64 {
        self.hash_evals
    }

    pub fn transform(&self) -> &SparseJLTransform {
        self.transform
    }
}
