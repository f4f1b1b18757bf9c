//! Exact (Clopper-Pearson) binomial confidence interval.

use super::EvalError;

const BISECTION_STEPS: usize = 200;
const TOLERANCE: f64 = 1e-15;

fn ln_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `P(X >= k)` for `X ~ Binomial(n, p)` with `0 < p < 1`, summed in log space.
pub fn upper_tail(k: u64, n: u64, p: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    // ln C(n, i) built up incrementally from i = 0.
    let mut ln_choose = 0.0;
    let mut total = f64::NEG_INFINITY;
    for i in 0..=n {
        if i > 0 {
            ln_choose += ((n - i + 1) as f64).ln() - (i as f64).ln();
        }
        if i >= k {
            total = ln_add(total, ln_choose + i as f64 * lp + (n - i) as f64 * lq);
        }
    }
    total.exp().min(1.0)
}

/// `P(X <= k)` for `X ~ Binomial(n, p)`.
pub fn lower_tail(k: u64, n: u64, p: f64) -> f64 {
    if k >= n {
        return 1.0;
    }
    // P(X <= k) = P(n - X >= n - k) with n - X ~ Binomial(n, 1 - p).
    upper_tail(n - k, n, 1.0 - p)
}

/// Smallest root of an increasing `f(p) = target` on (0, 1) by bisection.
fn bisect(target: f64, f: impl Fn(f64) -> f64) -> f64 {
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < TOLERANCE {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Two-sided `1 - alpha` interval for `k` successes in `n` trials.
///
/// The lower bound solves `P(X >= k | p) = alpha/2` (0 when `k = 0`); the
/// upper bound solves `P(X <= k | p) = alpha/2` (1 when `k = n`).
pub fn clopper_pearson(k: u64, n: u64, alpha: f64) -> Result<(f64, f64), EvalError> {
    if n == 0 || k > n || !(alpha > 0.0 && alpha < 1.0) {
        return Err(EvalError::Domain { k, n, alpha });
    }
    let half = alpha / 2.0;
    let lower = if k == 0 {
        0.0
    } else {
        bisect(half, |p| upper_tail(k, n, p))
    };
    let upper = if k == n {
        1.0
    } else {
        // P(X <= k | p) falls as p grows, so bisect on its complement.
        bisect(1.0 - half, |p| 1.0 - lower_tail(k, n, p))
    };
    Ok((lower, upper))
}
