//! Materialized proof objects and Monte Carlo verification experiments.
//!
//! For a fixed row hash h and spread vector x̃, the embedding error
//! Z = ‖Ax̃‖² − ‖x̃‖² is the quadratic form σᵀTσ of the collision matrix
//! T[s][t] = x̃_s·x̃_t·[s ≠ t, h(s) = h(t)]. Grouping coordinates by bucket
//! makes T block diagonal, each block being vvᵀ − diag(v²) for the bucket's
//! entries v. The experiments use that block form; the dense matrix exists
//! for small instances and cross-checks.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::error::{Error, Result};
use crate::hash::{PolyHashFamily, SeedExpander};
use crate::field::FieldPrime;
use crate::numeric::{compensated_sum, norm_sq};
use crate::profile::Profile;
use crate::sparse::{plan_sparse, spread, SparseJLTransform, SparseParams};

/// Largest D for which T is materialized.
pub const MAX_MATERIALIZE: usize = 4096;

/// Slack allowed on the deterministic eigenvalue bound.
pub const EIGENBOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct CollisionMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl CollisionMatrix {
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, s: usize, t: usize) -> f64 {
        self.entries[s * self.dim + t]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|s| self.get(s, s)).sum()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.dim).all(|s| (0..s).all(|t| self.get(s, t) == self.get(t, s)))
    }

    fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.entries)
    }

    /// σᵀTσ with compensated summation.
    pub fn quadratic_form(&self, sigma: &[f64]) -> Result<f64> {
        if sigma.len() != self.dim {
            return Err(Error::Shape {
                expected: self.dim,
                actual: sigma.len(),
            });
        }
        Ok(compensated_sum((0..self.dim).flat_map(|s| {
            (0..self.dim).map(move |t| sigma[s] * self.get(s, t) * sigma[t])
        })))
    }
}

fn buckets_of(h: &PolyHashFamily, len: usize) -> Result<Vec<u64>> {
    let points: Vec<u64> = (0..len as u64).collect();
    h.eval_batch(&points)
}

pub fn build_t(h: &PolyHashFamily, x_spread: &[f64]) -> Result<CollisionMatrix> {
    let dim = x_spread.len();
    if dim > MAX_MATERIALIZE {
        return Err(Error::Capacity {
            dim,
            limit: MAX_MATERIALIZE,
        });
    }
    let rows = buckets_of(h, dim)?;
    let mut entries = vec![0.0; dim * dim];
    for s in 0..dim {
        for t in 0..dim {
            if s != t && rows[s] == rows[t] {
                entries[s * dim + t] = x_spread[s] * x_spread[t];
            }
        }
    }
    Ok(CollisionMatrix { dim, entries })
}

/// Σ_{s,t} T[s][t]².
pub fn frobenius_sq(t: &CollisionMatrix) -> f64 {
    compensated_sum(t.entries.iter().map(|v| v * v))
}

/// 2·Σ_{s<t} x̃_s²·x̃_t²·[h(s) = h(t)], evaluated from the hash directly.
pub fn frobenius_sq_pairs(h: &PolyHashFamily, x_spread: &[f64]) -> Result<f64> {
    let rows = buckets_of(h, x_spread.len())?;
    let n = x_spread.len();
    let sum = compensated_sum((0..n).flat_map(|s| {
        let rows = &rows;
        ((s + 1)..n).filter_map(move |t| {
            (rows[s] == rows[t]).then(|| x_spread[s] * x_spread[s] * (x_spread[t] * x_spread[t]))
        })
    }));
    Ok(2.0 * sum)
}

/// Largest absolute eigenvalue via a symmetric eigensolver.
pub fn operator_norm(t: &CollisionMatrix) -> Result<f64> {
    if t.dim > MAX_MATERIALIZE {
        return Err(Error::Capacity {
            dim: t.dim,
            limit: MAX_MATERIALIZE,
        });
    }
    if t.dim == 0 {
        return Ok(0.0);
    }
    Ok(max_abs_eigenvalue(t.to_dmatrix()))
}

fn max_abs_eigenvalue(m: DMatrix<f64>) -> f64 {
    m.symmetric_eigenvalues()
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// Power iteration on T² from a fixed start vector; the fallback route for
/// the operator norm.
pub fn operator_norm_power(t: &CollisionMatrix, max_iters: usize) -> f64 {
    let n = t.dim;
    if n == 0 {
        return 0.0;
    }
    let apply = |v: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|s| (0..n).map(|u| t.get(s, u) * v[u]).sum())
            .collect()
    };
    // Irregular start so no eigenvector is missed by symmetry.
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 104_729) as f64 / 104_729.0).collect();
    let norm0 = norm_sq(&v).sqrt();
    v.iter_mut().for_each(|x| *x /= norm0);
    let mut estimate = 0.0;
    for _ in 0..max_iters {
        let w = apply(&apply(&v));
        let nw = norm_sq(&w).sqrt();
        if nw == 0.0 {
            return 0.0;
        }
        let next = nw.sqrt();
        v = w.into_iter().map(|x| x / nw).collect();
        if (next - estimate).abs() <= 1e-15 * next {
            return next;
        }
        estimate = next;
    }
    estimate
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketMasses {
    pub alpha_js: Vec<f64>,
}

impl BucketMasses {
    pub fn max(&self) -> f64 {
        self.alpha_js.iter().fold(0.0f64, |a, &b| a.max(b))
    }

    pub fn total(&self) -> f64 {
        compensated_sum(self.alpha_js.iter().copied())
    }
}

/// α_j = Σ_{h(i) = j} x̃_i².
pub fn bucket_masses(h: &PolyHashFamily, x_spread: &[f64], k: usize) -> Result<BucketMasses> {
    let rows = buckets_of(h, x_spread.len())?;
    let mut alpha_js = vec![0.0; k];
    for (&row, &x) in rows.iter().zip(x_spread) {
        let slot = alpha_js.get_mut(row as usize).ok_or_else(|| {
            Error::InvalidInput(format!("hash value {row} is outside [0, {k})"))
        })?;
        *slot += x * x;
    }
    Ok(BucketMasses { alpha_js })
}

/// Bucket contents (nonzero entries only) keyed by row.
fn bucket_entries(rows: &[u64], x_spread: &[f64], k: usize) -> Vec<Vec<f64>> {
    let mut buckets = vec![Vec::new(); k];
    for (&row, &x) in rows.iter().zip(x_spread) {
        if x != 0.0 {
            buckets[row as usize].push(x);
        }
    }
    buckets
}

fn block_norm(v: &[f64]) -> f64 {
    match v.len() {
        0 | 1 => 0.0,
        2 => (v[0] * v[1]).abs(),
        m => {
            let block = DMatrix::from_fn(m, m, |s, t| if s == t { 0.0 } else { v[s] * v[t] });
            max_abs_eigenvalue(block)
        }
    }
}

fn block_frobenius_sq(v: &[f64]) -> f64 {
    let n = v.len();
    2.0 * compensated_sum(
        (0..n).flat_map(|s| ((s + 1)..n).map(move |t| v[s] * v[s] * (v[t] * v[t]))),
    )
}

/// ‖T‖_F² and ‖T‖₂ from the bucket blocks, without materializing T.
pub fn block_norms(h: &PolyHashFamily, x_spread: &[f64], k: usize) -> Result<(f64, f64)> {
    let rows = buckets_of(h, x_spread.len())?;
    let buckets = bucket_entries(&rows, x_spread, k);
    let frob = compensated_sum(buckets.iter().map(|b| block_frobenius_sq(b)));
    let op = buckets.iter().map(|b| block_norm(b)).fold(0.0, f64::max);
    Ok((frob, op))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenboundReport {
    pub operator_norm: f64,
    pub c_sq: f64,
    pub max_bucket_mass: f64,
    pub bound: f64,
    pub holds: bool,
}

/// ‖T‖₂ ≤ max(c², max_j α_j), checked with the dense eigensolver.
pub fn check_eigenbound(
    h: &PolyHashFamily,
    x_spread: &[f64],
    k: usize,
    c: f64,
) -> Result<EigenboundReport> {
    let inf = x_spread.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if inf > c {
        return Err(Error::InvalidInput(format!(
            "‖x̃‖∞ = {inf} exceeds the cap c = {c}"
        )));
    }
    let t = build_t(h, x_spread)?;
    let operator_norm = operator_norm(&t)?;
    let masses = bucket_masses(h, x_spread, k)?;
    let bound = (c * c).max(masses.max());
    Ok(EigenboundReport {
        operator_norm,
        c_sq: c * c,
        max_bucket_mass: masses.max(),
        bound,
        holds: operator_norm <= bound + EIGENBOUND_SLACK,
    })
}

/// Z as σᵀTσ from the materialized collision matrix of `transform`.
pub fn z_quadratic_form(transform: &SparseJLTransform, x: &[f64]) -> Result<f64> {
    let xs = spread(x, transform.params())?;
    let t = build_t(transform.row_hash(), &xs)?;
    let sigma: Vec<f64> = (0..xs.len()).map(|u| transform.bucket(u).1).collect();
    t.quadratic_form(&sigma)
}

/// Z as ‖Ax̃‖² − ‖x̃‖² from the embedding.
pub fn z_from_embedding(transform: &SparseJLTransform, x: &[f64]) -> Result<f64> {
    let y = transform.apply(x)?;
    let xs = spread(x, transform.params())?;
    Ok(norm_sq(&y) - norm_sq(&xs))
}

/// One-sided upper confidence bound on a binomial rate (Clopper-Pearson).
pub fn clopper_pearson_upper(failures: u64, trials: u64, confidence: f64) -> f64 {
    if trials == 0 || failures >= trials {
        return 1.0;
    }
    let beta = Beta::new(failures as f64 + 1.0, (trials - failures) as f64)
        .expect("beta shape parameters are positive");
    beta.inverse_cdf(confidence)
}

/// Unit test vectors used by the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestVector {
    /// First standard basis vector.
    E1,
    /// All ones, normalized.
    Ones,
    /// x_i ∝ 2^(−i), normalized.
    Geometric,
}

impl TestVector {
    pub const ALL: [TestVector; 3] = [TestVector::E1, TestVector::Ones, TestVector::Geometric];

    pub fn build(&self, d: usize) -> Vec<f64> {
        let raw: Vec<f64> = match self {
            TestVector::E1 => (0..d).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect(),
            TestVector::Ones => vec![1.0; d],
            TestVector::Geometric => (0..d).map(|i| 0.5f64.powi(i as i32)).collect(),
        };
        let n = norm_sq(&raw).sqrt();
        raw.into_iter().map(|v| v / n).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Counts ‖T‖_F² > 7/k; bound δ.
    Frobenius,
    /// Counts ‖T‖₂ > ε/(128·log2(1/δ)); bound δ.
    Operator,
    /// Counts |‖Ax̃‖² − ‖x‖²| > ε‖x‖²; bound 3δ.
    Distortion,
    /// Random (h, x̃) with ‖x̃‖∞ ≤ c; any violation of the eigenvalue bound fails.
    Eigenbound,
}

fn default_vector() -> TestVector {
    TestVector::E1
}

/// One entry of a verification manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub kind: ExperimentKind,
    pub epsilon: f64,
    pub delta: f64,
    pub d: usize,
    #[serde(default = "default_vector")]
    pub vector: TestVector,
    pub trials: u64,
    pub rng_seed: u64,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub alpha: Option<usize>,
    #[serde(default)]
    pub r_h: Option<usize>,
    #[serde(default)]
    pub r_sigma: Option<usize>,
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind, epsilon: f64, delta: f64, d: usize, trials: u64) -> Self {
        Self {
            name: None,
            kind,
            epsilon,
            delta,
            d,
            vector: TestVector::E1,
            trials,
            rng_seed: 0,
            k: None,
            alpha: None,
            r_h: None,
            r_sigma: None,
        }
    }

    /// Practical sparse plan with any explicit overrides applied.
    pub fn resolve_params(&self) -> Result<SparseParams> {
        let mut p = plan_sparse(self.epsilon, self.delta, self.d, Profile::Practical)?;
        if self.k.is_some() || self.alpha.is_some() || self.r_h.is_some() || self.r_sigma.is_some()
        {
            let mut custom = SparseParams::custom(
                self.d,
                self.k.unwrap_or(p.k),
                self.alpha.unwrap_or(p.alpha),
                self.r_h.unwrap_or(p.r_h),
                self.r_sigma.unwrap_or(p.r_sigma),
            )?;
            custom.epsilon = p.epsilon;
            custom.delta = p.delta;
            p = custom;
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub kind: ExperimentKind,
    pub parameters: serde_json::Value,
    pub trials: u64,
    pub failures: u64,
    pub empirical_rate: f64,
    pub binomial_95_upper: f64,
    /// Failure-rate bound the upper confidence limit is compared against.
    pub bound: f64,
    /// Per-trial threshold defining a failure.
    pub threshold: f64,
    /// Empirical 99th percentile of the per-trial statistic.
    pub p99: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub practical_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub practical_failures: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub practical_binomial_95_upper: Option<f64>,
    pub degenerate: bool,
    pub pass: bool,
}

/// Seed of trial `trial` under `rng_seed`.
pub fn trial_seed(rng_seed: u64, trial: u64) -> Vec<u8> {
    format!("sketchjl/trial/{rng_seed}/{trial}").into_bytes()
}

fn percentile_99(stats: &mut [f64]) -> f64 {
    if stats.is_empty() {
        return 0.0;
    }
    stats.sort_by(f64::total_cmp);
    let idx = ((stats.len() as f64) * 0.99).ceil() as usize;
    stats[idx.clamp(1, stats.len()) - 1]
}

/// Random instance for the eigenvalue-bound sweep: x̃ uniform in [−c, c]^D.
fn eigen_instance(seed: &[u8], params: &SparseParams) -> Result<(PolyHashFamily, Vec<f64>)> {
    let d_spread = params.spread_dim();
    let h = PolyHashFamily::sample(
        params.r_h,
        d_spread as u64,
        params.k as u64,
        &[seed, b"/h"].concat(),
    )?;
    let scale = (1u64 << 61) as f64;
    let x_seed = [seed, b"/x"].concat();
    let xs = SeedExpander::new(FieldPrime::mersenne61(), &x_seed)
        .take(d_spread)
        .map(|w| params.c * (2.0 * (w as f64 / scale) - 1.0))
        .collect();
    Ok((h, xs))
}

/// Runs one experiment. Trials are independent and seeded by
/// [`trial_seed`], so the report depends only on the spec.
pub fn tail_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    let params = spec.resolve_params()?;
    let eps = spec.epsilon;
    let log_inv_delta = (1.0 / spec.delta).log2();
    let d_spread = params.spread_dim();
    if matches!(
        spec.kind,
        ExperimentKind::Frobenius | ExperimentKind::Operator | ExperimentKind::Eigenbound
    ) && d_spread > MAX_MATERIALIZE
    {
        return Err(Error::Capacity {
            dim: d_spread,
            limit: MAX_MATERIALIZE,
        });
    }
    let x = spec.vector.build(spec.d);
    let xs = spread(&x, &params)?;
    let x_norm_sq = norm_sq(&x);

    let (threshold, bound, practical_threshold) = match spec.kind {
        ExperimentKind::Frobenius => (7.0 / params.k as f64, spec.delta, None),
        ExperimentKind::Operator => (
            eps / (128.0 * log_inv_delta),
            spec.delta,
            Some(eps / log_inv_delta),
        ),
        ExperimentKind::Distortion => (eps * x_norm_sq, 3.0 * spec.delta, None),
        // Failure is a violated bound: statistic is ‖T‖₂ − bound.
        ExperimentKind::Eigenbound => (EIGENBOUND_SLACK, 0.0, None),
    };

    let mut stats = Vec::with_capacity(spec.trials as usize);
    for trial in 0..spec.trials {
        let seed = trial_seed(spec.rng_seed, trial);
        let stat = match spec.kind {
            ExperimentKind::Frobenius | ExperimentKind::Operator => {
                let h = PolyHashFamily::sample(
                    params.r_h,
                    d_spread as u64,
                    params.k as u64,
                    &[seed.as_slice(), b"/h"].concat(),
                )?;
                let (frob, op) = block_norms(&h, &xs, params.k)?;
                if spec.kind == ExperimentKind::Frobenius {
                    frob
                } else {
                    op
                }
            }
            ExperimentKind::Distortion => {
                let t = SparseJLTransform::from_seed(params.clone(), &seed)?;
                (norm_sq(&t.apply(&x)?) - x_norm_sq).abs()
            }
            ExperimentKind::Eigenbound => {
                let (h, inst) = eigen_instance(&seed, &params)?;
                let rep = check_eigenbound(&h, &inst, params.k, params.c)?;
                rep.operator_norm - rep.bound
            }
        };
        stats.push(stat);
    }

    let trials = spec.trials;
    let failures = stats.iter().filter(|&&s| s > threshold).count() as u64;
    let practical_failures =
        practical_threshold.map(|pt| stats.iter().filter(|&&s| s > pt).count() as u64);
    let upper = clopper_pearson_upper(failures, trials, 0.95);
    let degenerate = trials == 0;
    let pass = !degenerate
        && match spec.kind {
            ExperimentKind::Eigenbound => failures == 0,
            _ => upper <= bound,
        };
    let parameters = serde_json::json!({
        "epsilon": spec.epsilon,
        "delta": spec.delta,
        "d": params.d,
        "k": params.k,
        "alpha": params.alpha,
        "c": params.c,
        "spread_dim": d_spread,
        "r_h": params.r_h,
        "r_sigma": params.r_sigma,
        "vector": spec.vector,
        "rng_seed": spec.rng_seed,
    });
    Ok(ExperimentReport {
        name: spec
            .name
            .clone()
            .unwrap_or_else(|| format!("{:?}", spec.kind).to_lowercase()),
        kind: spec.kind,
        parameters,
        trials,
        failures,
        empirical_rate: if degenerate {
            0.0
        } else {
            failures as f64 / trials as f64
        },
        binomial_95_upper: upper,
        bound,
        threshold,
        p99: percentile_99(&mut stats),
        practical_threshold,
        practical_failures,
        practical_binomial_95_upper: practical_failures
            .map(|f| clopper_pearson_upper(f, trials, 0.95)),
        degenerate,
        pass,
    })
}
