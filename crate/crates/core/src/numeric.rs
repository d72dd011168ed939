//! Floating-point helpers: compensated summation and ulp distances.

/// Neumaier's compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Spacing between |x| and the next representable value above it.
pub fn ulp(x: f64) -> f64 {
    let a = x.abs();
    a.next_up() - a
}

/// Number of representable doubles between `a` and `b`.
pub fn ulps_apart(a: f64, b: f64) -> u64 {
    fn ordered(x: f64) -> i64 {
        let bits = x.to_bits() as i64;
        if bits < 0 {
            i64::MIN - bits
        } else {
            bits
        }
    }
    ordered(a).abs_diff(ordered(b))
}

/// |a - b| measured in ulps of `scale`.
pub fn ulps_at_scale(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / ulp(scale)
}

pub fn norm_sq(x: &[f64]) -> f64 {
    compensated_sum(x.iter().map(|v| v * v))
}
