//! Gradual dimension reduction through a chain of dense sign matrices.
//!
//! With δ' the per-stage failure probability and L = log2(1/δ'), level j
//! has t_j = 2^(L/2^j) and dimension k_j = ceil(ε'⁻²·t_j). Levels run from
//! the first one whose dimension fits below d up to j*, the first level with
//! t_j ≤ c_stop·L³. A last stage maps to ceil(c_final·ε'⁻²·L). Early levels
//! need little independence (r_j shrinks as t_j grows), which is where the
//! seed savings over a single dense matrix come from.

use serde::{Deserialize, Serialize};

use crate::dense::{DenseJLMatrix, DenseJLParams};
use crate::error::{Error, Result};
use crate::field::FieldPrime;
use crate::profile::{check_eps_delta, even_order, Profile};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CascadeConstants {
    /// Intermediate levels stop once t_j ≤ c_stop·log2³(1/δ').
    pub c_stop: f64,
    /// r_j = 2·ceil(c_r·log2²(1/δ')/t_j).
    pub c_r: f64,
    /// Last stage dimension ceil(c_final·ε'⁻²·log2(1/δ')).
    pub c_final: f64,
}

impl Default for CascadeConstants {
    fn default() -> Self {
        Self {
            c_stop: 1.0,
            c_r: 1.0,
            c_final: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeStage {
    pub k: usize,
    pub r: usize,
    /// Level j of an intermediate stage; absent for the last stage.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadePlan {
    pub eps: f64,
    pub delta: f64,
    pub d: usize,
    pub eps_prime: f64,
    pub delta_prime: f64,
    /// Intermediate stages followed by the last stage; empty for the identity plan.
    pub stages: Vec<CascadeStage>,
    pub j_star: usize,
    pub start_level: usize,
    pub final_k: usize,
    pub total_seed_bits: u64,
    /// t_1, t_2, ... while t_j ≥ 2, independent of the stop rule.
    pub t_schedule: Vec<f64>,
}

impl CascadePlan {
    pub fn is_identity(&self) -> bool {
        self.stages.is_empty()
    }

    /// Dimensions d, k_1, ..., final_k.
    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.d)
            .chain(self.stages.iter().map(|s| s.k))
            .collect()
    }
}

/// t_j = (1/δ')^(1/2^j), computed as 2^(log2(1/δ')/2^j).
pub fn level_t(delta_prime: f64, j: usize) -> f64 {
    ((1.0 / delta_prime).log2() / (1u64 << j) as f64).exp2()
}

/// t_j for j = 1, 2, ... while t_j ≥ 2.
pub fn t_schedule(delta_prime: f64) -> Vec<f64> {
    (1..64)
        .map(|j| level_t(delta_prime, j))
        .take_while(|&t| t >= 2.0)
        .collect()
}

/// Smallest j ≥ 1 with t_j ≤ c_stop·log2³(1/δ').
pub fn stop_level(delta_prime: f64, c_stop: f64) -> usize {
    let l = (1.0 / delta_prime).log2();
    let cap = c_stop * l * l * l;
    (1..64)
        .find(|&j| level_t(delta_prime, j) <= cap)
        .unwrap_or(64)
}

pub fn plan_cascade(epsilon: f64, delta: f64, d: usize) -> Result<CascadePlan> {
    plan_cascade_with(epsilon, delta, d, &CascadeConstants::default())
}

pub fn plan_cascade_with(
    epsilon: f64,
    delta: f64,
    d: usize,
    consts: &CascadeConstants,
) -> Result<CascadePlan> {
    check_eps_delta(epsilon, delta)?;
    if d == 0 {
        return Err(Error::InvalidParameter("input dimension d must be >= 1".into()));
    }
    if !(consts.c_stop > 0.0 && consts.c_r > 0.0 && consts.c_final > 0.0) {
        return Err(Error::InvalidParameter("cascade constants must be positive".into()));
    }

    // δ' = δ/(j*+1) while j* depends on δ'; j* moves doubly-logarithmically
    // in δ' so the iteration settles after a step or two.
    let mut j_star = stop_level(delta, consts.c_stop);
    for _ in 0..8 {
        let next = stop_level(delta / (j_star + 1) as f64, consts.c_stop);
        if next == j_star {
            break;
        }
        j_star = next;
    }
    let delta_prime = delta / (j_star + 1) as f64;
    let eps_prime = epsilon / (2.0 * (j_star + 1) as f64);
    let log_inv = (1.0 / delta_prime).log2();
    let inv_eps2 = 1.0 / (eps_prime * eps_prime);
    let final_k = (consts.c_final * inv_eps2 * log_inv).ceil() as usize;
    let start_level = (1..64)
        .find(|&j| inv_eps2 * level_t(delta_prime, j) < d as f64)
        .unwrap_or(64);

    let mut plan = CascadePlan {
        eps: epsilon,
        delta,
        d,
        eps_prime,
        delta_prime,
        stages: Vec::new(),
        j_star,
        start_level,
        final_k: d,
        total_seed_bits: 0,
        t_schedule: t_schedule(delta_prime),
    };
    if d <= final_k {
        return Ok(plan);
    }

    let mut prev = d;
    for j in start_level..=j_star {
        let t = level_t(delta_prime, j);
        let k = (inv_eps2 * t).ceil() as usize;
        if k <= final_k || k >= prev {
            continue;
        }
        plan.stages.push(CascadeStage {
            k,
            r: even_order(consts.c_r * log_inv * log_inv / t),
            level: Some(j),
        });
        prev = k;
    }
    plan.stages.push(CascadeStage {
        k: final_k,
        r: even_order(log_inv),
        level: None,
    });
    plan.final_k = final_k;
    plan.total_seed_bits = cascade_seed_bits(&plan);
    Ok(plan)
}

/// Σ_j r_j·ceil(log2 p) over 2^61 - 1.
pub fn cascade_seed_bits(plan: &CascadePlan) -> u64 {
    let bits = FieldPrime::mersenne61().element_bits() as u64;
    plan.stages.iter().map(|s| s.r as u64 * bits).sum()
}

/// Seed bits when each stage draws coefficients from the smallest field
/// covering its own entry domain, ceil(log2(k_in·k_out)) bits apiece.
pub fn cascade_scaled_seed_bits(plan: &CascadePlan) -> u64 {
    plan.dims()
        .windows(2)
        .zip(&plan.stages)
        .map(|(w, s)| s.r as u64 * domain_bits(w[0] as u128 * w[1] as u128))
        .sum()
}

fn domain_bits(n: u128) -> u64 {
    if n <= 1 {
        1
    } else {
        (128 - (n - 1).leading_zeros()) as u64
    }
}

/// Seed lengths of a single dense matrix and of the cascade at one setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossoverRow {
    pub epsilon: f64,
    pub delta: f64,
    pub d: usize,
    pub stages: usize,
    /// Both families over 2^61 - 1.
    pub dense_bits: u64,
    pub cascade_bits: u64,
    /// Each matrix over a field just covering its own entry domain.
    pub dense_scaled_bits: u64,
    pub cascade_scaled_bits: u64,
    pub cascade_wins: bool,
}

/// Compares seed lengths with the practical dense plan at ε and δ against
/// the cascade plan for d. The winner is decided on scaled bits.
pub fn crossover_row(epsilon: f64, delta: f64, d: usize) -> Result<CrossoverRow> {
    let dense = crate::dense::plan_dense(epsilon, delta, Profile::Practical)?;
    let plan = plan_cascade(epsilon, delta, d)?;
    let dense_scaled_bits = dense.r as u64 * domain_bits(dense.k as u128 * d as u128);
    let cascade_scaled_bits = cascade_scaled_seed_bits(&plan);
    Ok(CrossoverRow {
        epsilon,
        delta,
        d,
        stages: plan.stages.len(),
        dense_bits: dense.seed_bits(),
        cascade_bits: plan.total_seed_bits,
        dense_scaled_bits,
        cascade_scaled_bits,
        cascade_wins: !plan.is_identity() && cascade_scaled_bits < dense_scaled_bits,
    })
}

/// Every combination of the given settings, d varying fastest.
pub fn crossover_table(
    epsilons: &[f64],
    deltas: &[f64],
    dims: &[usize],
) -> Result<Vec<CrossoverRow>> {
    let mut rows = Vec::new();
    for &e in epsilons {
        for &dl in deltas {
            for &d in dims {
                rows.push(crossover_row(e, dl, d)?);
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone)]
pub struct CascadeTransform {
    plan: CascadePlan,
    matrices: Vec<DenseJLMatrix>,
}

impl CascadeTransform {
    /// Stage i draws its entries from seed `seed || "/stage/" || i`.
    pub fn new(plan: CascadePlan, seed: &[u8]) -> Result<Self> {
        if seed.is_empty() {
            return Err(Error::InvalidSeed("seed must be non-empty".into()));
        }
        let dims = plan.dims();
        let matrices = plan
            .stages
            .iter()
            .enumerate()
            .map(|(i, stage)| {
                let params = DenseJLParams::custom(
                    plan.eps_prime,
                    plan.delta_prime,
                    stage.k,
                    stage.r,
                    Profile::Custom,
                )?;
                let stage_seed = [seed, format!("/stage/{i}").as_bytes()].concat();
                DenseJLMatrix::new(params, dims[i], &stage_seed)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { plan, matrices })
    }

    pub fn plan(&self) -> &CascadePlan {
        &self.plan
    }

    pub fn stages(&self) -> &[DenseJLMatrix] {
        &self.matrices
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.plan.d {
            return Err(Error::Shape {
                expected: self.plan.d,
                actual: x.len(),
            });
        }
        Ok(self.apply_batch(&[x])?.pop().expect("one input, one output"))
    }

    /// Pushes several vectors through the stages, evaluating each stage's
    /// entries once.
    pub fn apply_batch(&self, xs: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
        for x in xs {
            if x.len() != self.plan.d {
                return Err(Error::Shape {
                    expected: self.plan.d,
                    actual: x.len(),
                });
            }
        }
        let mut vs: Vec<Vec<f64>> = xs.iter().map(|x| x.to_vec()).collect();
        for m in &self.matrices {
            let refs: Vec<&[f64]> = vs.iter().map(|v| v.as_slice()).collect();
            vs = m.apply_batch(&refs)?;
        }
        Ok(vs)
    }
}
