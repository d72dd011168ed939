//! Acceptance suite. Every check prints one line:
//! `acceptance NN PASS|FAIL <what> : <measurements>`.

use std::collections::HashMap;
use std::io::Write;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sketchjl::cascade::{
    cascade_scaled_seed_bits, cascade_seed_bits, crossover_table, level_t, plan_cascade,
    t_schedule, CascadeTransform,
};
use sketchjl::dense::{plan_dense, DenseJLMatrix, DenseJLParams};
use sketchjl::diagnostics::{
    build_t, clopper_pearson_upper, frobenius_sq, frobenius_sq_pairs, tail_experiment,
    z_from_embedding, z_quadratic_form, ExperimentKind, ExperimentSpec, TestVector,
};
use sketchjl::field::{FieldPrime, MERSENNE_61};
use sketchjl::numeric::{norm_sq, ulps_apart, ulps_at_scale};
use sketchjl::sparse::{seed_bits, SparseJLTransform, SparseParams, TurnstileSketch};
use sketchjl::{plan_sparse, PolyHashFamily, Profile};

fn report(id: u32, what: &str, pass: bool, detail: String) -> bool {
    let line = format!(
        "acceptance {id:02} {} {what} : {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    // Written straight to stderr so the line shows without --nocapture.
    let _ = writeln!(std::io::stderr(), "\n{line}");
    pass
}

fn within(elapsed: Duration, limit_s: u64) -> bool {
    elapsed <= Duration::from_secs(limit_s)
}

#[test]
fn exact_independence_by_enumeration() {
    let start = Instant::now();
    let mut all_once = true;
    let mut cases = Vec::new();
    for p in [5u64, 7] {
        let field = FieldPrime::new(p).unwrap();
        for r in [2usize, 3] {
            let points: Vec<u64> = (0..r as u64).collect();
            let mut counts: HashMap<Vec<u64>, u32> = HashMap::new();
            let total = p.pow(r as u32);
            for code in 0..total {
                let coeffs: Vec<u64> = (0..r).map(|i| (code / p.pow(i as u32)) % p).collect();
                let h = PolyHashFamily::from_coeffs(field, coeffs, p, p).unwrap();
                let tuple: Vec<u64> = points.iter().map(|&x| h.eval(x).unwrap()).collect();
                *counts.entry(tuple).or_default() += 1;
            }
            let ok = counts.len() as u64 == total && counts.values().all(|&c| c == 1);
            all_once &= ok;
            cases.push(format!("p={p} r={r}: {} tuples", counts.len()));
        }
    }
    let elapsed = start.elapsed();
    let pass = report(
        1,
        "every output tuple occurs exactly once",
        all_once && elapsed < Duration::from_secs(1),
        format!("{} in {:.3}s", cases.join(", "), elapsed.as_secs_f64()),
    );
    assert!(pass);
}

#[test]
fn dense_columns_have_unit_norm() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let params = DenseJLParams::custom(0.5, 0.1, 16, 4, Profile::Custom).unwrap();
    let mut worst = 0u64;
    let mut exact = true;
    for _ in 0..100 {
        let seed: u64 = rng.random();
        let j = rng.random_range(0..64);
        let m = DenseJLMatrix::new(params, 64, &seed.to_le_bytes()).unwrap();
        let mut e = vec![0.0; 64];
        e[j] = 1.0;
        let y = m.apply(&e).unwrap();
        // Entries are ±1/4, so the column norm is a sum of sixteen 1/16s.
        exact &= y.iter().all(|v| v.abs() == 0.25);
        let n: f64 = y.iter().map(|v| v * v).sum();
        worst = worst.max(ulps_apart(n, 1.0));
    }
    let pass = report(
        2,
        "dense column norm equals one",
        exact && worst <= 2,
        format!("100 pairs, entries exactly ±1/4: {exact}, worst {worst} ulp"),
    );
    assert!(pass);
}

#[test]
fn sparse_columns_have_alpha_entries_of_magnitude_c() {
    let params = SparseParams::custom(32, 64, 8, 8, 8).unwrap();
    let c = params.c;
    let mut columns_ok = 0usize;
    let mut columns = 0usize;
    let mut hash_matrix_ok = true;
    let mut sums_match = true;
    for seed in 0..20u32 {
        let t = SparseJLTransform::from_seed(params.clone(), &seed.to_le_bytes()).unwrap();
        let a = t.materialize_hash_matrix();
        for u in 0..params.spread_dim() {
            let nz: Vec<f64> = a.iter().map(|row| row[u]).filter(|&v| v != 0.0).collect();
            hash_matrix_ok &= nz.len() == 1 && nz[0].abs() == 1.0;
        }
        let aq = t.materialize_composed();
        for j in 0..params.d {
            columns += 1;
            let col: Vec<f64> = aq.iter().map(|row| row[j]).collect();
            let nz = col.iter().filter(|&&v| v != 0.0).count();
            if nz == params.alpha && col.iter().all(|&v| v == 0.0 || v.abs() == c) {
                columns_ok += 1;
            }
            // Each column is the signed sum of its alpha replicas.
            let mut oracle = vec![0.0; params.k];
            for u in j * params.alpha..(j + 1) * params.alpha {
                let row = a.iter().position(|r| r[u] != 0.0).unwrap();
                oracle[row] += a[row][u] * c;
            }
            sums_match &= oracle == col;
        }
    }
    let pass = report(
        3,
        "materialized A·Q has exactly alpha entries of magnitude c per column",
        columns_ok == columns && hash_matrix_ok && sums_match,
        format!(
            "{columns_ok}/{columns} columns satisfy it; one ±1 per hash-matrix column: \
             {hash_matrix_ok}; columns equal replica sums: {sums_match}"
        ),
    );
    assert!(pass);
}

#[test]
fn stream_matches_batch() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let d = 100;
    let params = SparseParams::custom(d, 64, 16, 8, 8).unwrap();
    let c = params.c;
    let mut bit_exact = true;
    let mut worst_scaled = 0.0f64;
    let mut worst_dyadic = 0u64;
    for stream in 0..1000u32 {
        let t = SparseJLTransform::from_seed(params.clone(), &stream.to_le_bytes()).unwrap();
        let len = rng.random_range(0..=1000);
        let dyadic = stream % 2 == 1;
        let updates: Vec<(usize, f64)> = (0..len)
            .map(|_| {
                let j = rng.random_range(0..d);
                let v = if dyadic {
                    rng.random_range(-1024i32..=1024) as f64 / 256.0
                } else {
                    rng.random_range(-1.0..1.0)
                };
                (j, v)
            })
            .collect();
        let mut sketch = TurnstileSketch::new(&t);
        for &(j, v) in &updates {
            sketch.update(j, v).unwrap();
        }
        let y = sketch.snapshot();
        bit_exact &= y == t.apply_coords(&updates).unwrap();

        let mut net = vec![0.0; d];
        let mut mass = vec![0.0; params.k];
        for &(j, v) in &updates {
            net[j] += v;
            for u in j * params.alpha..(j + 1) * params.alpha {
                mass[t.bucket(u).0] += (c * v).abs();
            }
        }
        let batch = t.apply(&net).unwrap();
        for i in 0..params.k {
            if dyadic {
                worst_dyadic = worst_dyadic.max(ulps_apart(y[i], batch[i]));
            } else if mass[i] > 0.0 {
                worst_scaled = worst_scaled.max(ulps_at_scale(y[i], batch[i], mass[i]));
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = report(
        4,
        "stream sketch equals batch embedding of the net vector",
        bit_exact && worst_dyadic <= 8 && worst_scaled <= 8.0 && within(elapsed, 10),
        format!(
            "1000 streams; same order bit-exact: {bit_exact}; dyadic values worst {worst_dyadic} ulp; \
             real values worst {worst_scaled:.2} ulp of the row's absolute mass; {:.2}s",
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn squared_norm_is_unbiased() {
    let start = Instant::now();
    let d = 16;
    let params = plan_sparse(0.25, 0.05, d, Profile::Practical).unwrap();
    let vectors: Vec<Vec<f64>> = TestVector::ALL.iter().map(|v| v.build(d)).collect();
    let refs: Vec<&[f64]> = vectors.iter().map(|v| v.as_slice()).collect();
    let n = 100_000u32;
    let mut sum = [0.0f64; 3];
    let mut sum_sq = [0.0f64; 3];
    for seed in 0..n {
        let t = SparseJLTransform::from_seed(params.clone(), &seed.to_le_bytes()).unwrap();
        for (i, y) in t.apply_batch(&refs).unwrap().iter().enumerate() {
            let q = norm_sq(y);
            sum[i] += q;
            sum_sq[i] += q * q;
        }
    }
    let elapsed = start.elapsed();
    let mut pass = within(elapsed, 120);
    let mut parts = Vec::new();
    for (i, v) in TestVector::ALL.iter().enumerate() {
        let mean = sum[i] / n as f64;
        let var = (sum_sq[i] / n as f64 - mean * mean) * n as f64 / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        let z = (mean - 1.0) / se;
        pass &= z.abs() <= 3.0;
        parts.push(format!("{v:?} mean {mean:.5} se {se:.5} ({z:+.2} se)"));
    }
    let pass = report(
        5,
        "mean squared norm within 3 standard errors of 1",
        pass,
        format!("{n} seeds, {}; {:.1}s", parts.join("; "), elapsed.as_secs_f64()),
    );
    assert!(pass);
}

#[test]
fn distortion_tail_is_within_three_delta() {
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, v) in TestVector::ALL.iter().enumerate() {
        let mut spec = ExperimentSpec::new(ExperimentKind::Distortion, 0.25, 0.05, 16, 20_000);
        spec.vector = *v;
        spec.rng_seed = 600 + i as u64;
        let rep = tail_experiment(&spec).unwrap();
        pass &= rep.pass;
        parts.push(format!(
            "{v:?} {}/{} upper {:.4}",
            rep.failures, rep.trials, rep.binomial_95_upper
        ));
    }
    let elapsed = start.elapsed();
    let pass = report(
        6,
        "distortion above 0.25 has 95% upper rate <= 0.15",
        pass && within(elapsed, 300),
        format!("{}; {:.1}s", parts.join("; "), elapsed.as_secs_f64()),
    );
    assert!(pass);
}

#[test]
fn eigenvalue_bound_holds_on_every_instance() {
    let start = Instant::now();
    let mut spec = ExperimentSpec::new(ExperimentKind::Eigenbound, 0.25, 0.05, 4, 1000);
    spec.k = Some(64);
    spec.alpha = Some(64);
    spec.rng_seed = 7;
    let rep = tail_experiment(&spec).unwrap();
    let elapsed = start.elapsed();
    let pass = report(
        7,
        "operator norm of T is at most max(c², max bucket mass)",
        rep.pass && rep.failures == 0 && within(elapsed, 60),
        format!(
            "D=256 k=64: {} violations in {} instances, largest excess {:.3e}; {:.1}s",
            rep.failures,
            rep.trials,
            rep.p99,
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

fn collision_spec(kind: ExperimentKind, seed: u64) -> ExperimentSpec {
    // Practical plan at (0.25, 0.05): k = 277, alpha = 256, c = 1/16; d = 4 gives D = 1024.
    let mut spec = ExperimentSpec::new(kind, 0.25, 0.05, 4, 10_000);
    spec.vector = TestVector::Ones;
    spec.rng_seed = seed;
    spec
}

#[test]
fn frobenius_tail_below_delta() {
    let start = Instant::now();
    let rep = tail_experiment(&collision_spec(ExperimentKind::Frobenius, 81)).unwrap();
    let elapsed = start.elapsed();
    let pass = report(
        8,
        "Frobenius norm tail (threshold 7/k) has 95% upper rate <= 0.05",
        rep.pass && within(elapsed, 300),
        format!(
            "{}/{} above {:.5}, upper {:.4}, p99 {:.5}; {:.1}s",
            rep.failures,
            rep.trials,
            rep.threshold,
            rep.binomial_95_upper,
            rep.p99,
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn operator_tail_below_delta() {
    let start = Instant::now();
    let rep = tail_experiment(&collision_spec(ExperimentKind::Operator, 82)).unwrap();
    let elapsed = start.elapsed();
    let pass = report(
        8,
        "operator norm tail (threshold eps/(128·log2(1/delta))) has 95% upper rate <= 0.05",
        rep.pass && within(elapsed, 300),
        format!(
            "{}/{} above {:.6}, upper {:.4}, p99 {:.5}; at threshold {:.5}: {}/{} upper {:.4}; {:.1}s",
            rep.failures,
            rep.trials,
            rep.threshold,
            rep.binomial_95_upper,
            rep.p99,
            rep.practical_threshold.unwrap(),
            rep.practical_failures.unwrap(),
            rep.trials,
            rep.practical_binomial_95_upper.unwrap(),
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn dual_formulas_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst_frob = 0u64;
    let mut worst_z = 0.0f64;
    let mut worst_z_norm = 0.0f64;
    let mut worst_trace = 0.0f64;
    for inst in 0..1000u32 {
        let alpha = 1usize << rng.random_range(0..=6);
        let d = rng.random_range(1..=(1024 / alpha).min(32));
        let k = rng.random_range(2..=128);
        let params = SparseParams::custom(d, k, alpha, 2 * rng.random_range(1..=4), 4).unwrap();
        let t = SparseJLTransform::from_seed(params.clone(), &inst.to_le_bytes()).unwrap();
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let xs = sketchjl::spread(&x, &params).unwrap();
        let tm = build_t(t.row_hash(), &xs).unwrap();
        worst_trace = worst_trace.max(tm.trace().abs());
        let a = frobenius_sq(&tm);
        let b = frobenius_sq_pairs(t.row_hash(), &xs).unwrap();
        worst_frob = worst_frob.max(ulps_apart(a, b));
        let zq = z_quadratic_form(&t, &x).unwrap();
        let ze = z_from_embedding(&t, &x).unwrap();
        // Rounding in ‖Ax̃‖² scales with Σ_i (Σ_{h(u)=i} |x̃_u|)².
        let mut abs_rows = vec![0.0; k];
        for (u, v) in xs.iter().enumerate() {
            abs_rows[t.bucket(u).0] += v.abs();
        }
        let scale: f64 = abs_rows.iter().map(|m| m * m).sum();
        worst_z = worst_z.max(ulps_at_scale(zq, ze, scale));
        worst_z_norm = worst_z_norm.max(ulps_at_scale(zq, ze, norm_sq(&xs)));
    }
    let pass = report(
        9,
        "Frobenius entry sum vs pair sum, and Z as quadratic form vs embedding",
        worst_frob <= 4 && worst_z <= 8.0 && worst_trace == 0.0,
        format!(
            "1000 instances D <= 1024: Frobenius worst {worst_frob} ulp; \
             Z worst {worst_z:.2} ulp of the absolute row mass ({worst_z_norm:.2} ulp of ‖x̃‖²); \
             trace always 0: {}",
            worst_trace == 0.0
        ),
    );
    assert!(pass);
}

#[test]
fn cascade_schedule_and_distortion() {
    let start = Instant::now();
    let dp = 2f64.powi(-16);
    let ts = t_schedule(dp);
    let t_ok = ts == vec![256.0, 16.0, 4.0, 2.0] && level_t(dp, 1) == 256.0;

    let mut dims_ok = true;
    for (eps, delta, d) in [
        (0.5, 0.1, 1024usize),
        (0.25, 1e-6, 1 << 20),
        (0.3, 1e-12, 1 << 30),
        (0.5, 1e-20, 1 << 40),
    ] {
        let dims = plan_cascade(eps, delta, d).unwrap().dims();
        dims_ok &= dims.windows(2).all(|w| w[1] < w[0]);
    }

    let plan = plan_cascade(0.5, 0.1, 1024).unwrap();
    let d = plan.d;
    let vectors: Vec<Vec<f64>> = TestVector::ALL.iter().map(|v| v.build(d)).collect();
    let refs: Vec<&[f64]> = vectors.iter().map(|v| v.as_slice()).collect();
    let trials = 20_000u64;
    let mut failures = [0u64; 3];
    for seed in 0..trials {
        let t = CascadeTransform::new(plan.clone(), &seed.to_le_bytes()).unwrap();
        for (i, y) in t.apply_batch(&refs).unwrap().iter().enumerate() {
            if (norm_sq(y) - 1.0).abs() > plan.eps {
                failures[i] += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    let uppers: Vec<f64> = failures
        .iter()
        .map(|&f| clopper_pearson_upper(f, trials, 0.95))
        .collect();
    let tail_ok = uppers.iter().all(|&u| u <= plan.delta);
    let pass = report(
        10,
        "cascade t-sequence, decreasing dimensions, distortion tail <= delta",
        t_ok && dims_ok && tail_ok && within(elapsed, 600),
        format!(
            "t = {ts:?}; dims {:?}; failures {failures:?} of {trials}, uppers {:.4} {:.4} {:.4}; {:.1}s",
            plan.dims(),
            uppers[0],
            uppers[1],
            uppers[2],
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn seed_accounting_and_crossover() {
    let m61 = FieldPrime::mersenne61();
    let mut hand = seed_bits(24, 20, m61) == 2684;
    hand &= seed_bits(10, 10, FieldPrime::new(7).unwrap()) == 60;
    let dense = plan_dense(0.25, 0.05, Profile::Practical).unwrap();
    hand &= dense.seed_bits() == dense.r as u64 * 61;
    let plan = plan_cascade(0.5, 0.1, 1024).unwrap();
    hand &= cascade_seed_bits(&plan) == plan.stages.iter().map(|s| s.r as u64 * 61).sum::<u64>();
    hand &= plan.total_seed_bits == cascade_seed_bits(&plan);
    let sp = plan_sparse(0.25, 0.05, 1000, Profile::Practical).unwrap();
    hand &= sp.seed_bits() == (sp.r_h + sp.r_sigma) as u64 * 61;
    hand &= cascade_scaled_seed_bits(&plan) <= cascade_seed_bits(&plan);

    let rows = crossover_table(
        &[0.1, 0.25, 0.5],
        &[1e-2, 1e-4, 1e-8],
        &[1 << 10, 1 << 20, 1 << 30, 1 << 40],
    )
    .unwrap();
    let path = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("crossover.csv");
    let mut csv = String::from(
        "epsilon,delta,d,stages,dense_bits,cascade_bits,dense_scaled_bits,cascade_scaled_bits,cascade_wins\n",
    );
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.epsilon,
            r.delta,
            r.d,
            r.stages,
            r.dense_bits,
            r.cascade_bits,
            r.dense_scaled_bits,
            r.cascade_scaled_bits,
            r.cascade_wins
        ));
    }
    std::fs::write(&path, csv).unwrap();
    let wins: Vec<_> = rows.iter().filter(|r| r.cascade_wins).collect();
    let example = wins
        .first()
        .map(|r| {
            format!(
                "e.g. eps={} delta={} d=2^{}: {} vs {}",
                r.epsilon,
                r.delta,
                r.d.trailing_zeros(),
                r.cascade_scaled_bits,
                r.dense_scaled_bits
            )
        })
        .unwrap_or_default();
    let pass = report(
        11,
        "seed-bit formulas and cascade beating dense on the grid",
        hand && !wins.is_empty(),
        format!(
            "hand values match: {hand}; cascade wins {}/{} cells ({example}); table at {}",
            wins.len(),
            rows.len(),
            path.display()
        ),
    );
    assert!(pass);
}

#[test]
fn batch_evaluation_matches_pointwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let fields = [
        FieldPrime::mersenne61(),
        FieldPrime::new(5).unwrap(),
        FieldPrime::new(1_000_003).unwrap(),
    ];
    let mut ok = true;
    let mut multipoint_cases = 0;
    for case in 0..1000u32 {
        let field = fields[case as usize % fields.len()];
        let p = field.modulus();
        let r = if case % 4 == 0 { rng.random_range(64..=96) } else { rng.random_range(1..=16) };
        let n = rng.random_range(2..=p.min(MERSENNE_61));
        let m = rng.random_range(2..=n.min(1 << 20));
        let h = PolyHashFamily::sample_in(field, r, n, m, &case.to_le_bytes()).unwrap();
        let len = rng.random_range(0..=200);
        let xs: Vec<u64> = (0..len).map(|_| rng.random_range(0..n)).collect();
        let pointwise: Vec<u64> = xs.iter().map(|&x| h.eval(x).unwrap()).collect();
        ok &= h.eval_batch(&xs).unwrap() == pointwise;
        ok &= h.eval_batch_multipoint(&xs).unwrap() == pointwise;
        if r >= 64 && len >= r {
            multipoint_cases += 1;
        }
    }
    let pass = report(
        12,
        "batch and multipoint evaluation equal pointwise evaluation",
        ok,
        format!("1000 cases, {multipoint_cases} routed through the product tree in eval_batch"),
    );
    assert!(pass);
}
