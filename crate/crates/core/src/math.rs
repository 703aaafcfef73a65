//! Log-domain helpers shared by the mixture code.

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Below this, `exp` underflows to zero in double precision.
const EXP_UNDERFLOW: f64 = -745.2;

#[inline]
fn shifted_exp(x: f64, max: f64) -> f64 {
    let d = x - max;
    if d < EXP_UNDERFLOW {
        0.0
    } else {
        d.exp()
    }
}

/// `log(sum(exp(xs)))` with the max-shift trick. Empty or all `-inf`
/// input yields `-inf`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = xs.iter().map(|&x| shifted_exp(x, max)).sum();
    max + sum.ln()
}

/// Overwrites `xs` with `softmax(xs)` and returns the log-normalizer.
pub fn softmax_in_place(xs: &mut [f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        let lse = log_sum_exp(xs);
        for x in xs.iter_mut() {
            *x = (*x - lse).exp();
        }
        return lse;
    }
    let mut sum = 0.0;
    for x in xs.iter_mut() {
        *x = shifted_exp(*x, max);
        sum += *x;
    }
    let inv = 1.0 / sum;
    for x in xs.iter_mut() {
        *x *= inv;
    }
    max + sum.ln()
}

/// Pairwise (tree) summation; fixed reduction order regardless of caller.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
