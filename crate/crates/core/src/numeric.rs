//! Small numerical helpers shared across modules.

/// `ln sum exp(x_i)`, `-inf` for an empty slice or all `-inf` entries.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Streaming log-sum-exp over an iterator, in iteration order.
pub fn log_sum_exp_iter<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut m = f64::NEG_INFINITY;
    let mut s = 0.0;
    for x in xs {
        if x == f64::NEG_INFINITY {
            continue;
        }
        if x <= m {
            s += (x - m).exp();
        } else {
            s = s * (m - x).exp() + 1.0;
            m = x;
        }
    }
    if m == f64::NEG_INFINITY {
        m
    } else {
        m + s.ln()
    }
}

/// `ln Beta(a, b)` for positive integers, via `ln Gamma` sums.
pub fn ln_beta_int(a: u64, b: u64) -> f64 {
    ln_factorial(a - 1) + ln_factorial(b - 1) - ln_factorial(a + b - 1)
}

pub fn ln_factorial(n: u64) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// Linear interpolation of `(xs, ys)` at `x`; `xs` increasing, clamped at the ends.
pub fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return ys[0];
    }
    let n = xs.len();
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let j = xs.partition_point(|&t| t <= x).min(n - 1);
    let (x0, x1) = (xs[j - 1], xs[j]);
    let t = (x - x0) / (x1 - x0);
    ys[j - 1] * (1.0 - t) + ys[j] * t
}
