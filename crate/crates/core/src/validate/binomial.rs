use statrs::function::beta::beta_reg;

/// `P(X ≤ x)` for `X ~ Binomial(n, p)`.
pub fn binomial_cdf(x: u64, n: u64, p: f64) -> f64 {
    if x >= n || p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return 0.0;
    }
    // P(X ≤ x) = 1 - I_p(x + 1, n - x)
    1.0 - beta_reg((x + 1) as f64, (n - x) as f64, p)
}

fn bisect(mut lo: f64, mut hi: f64, increasing: impl Fn(f64) -> bool) -> f64 {
    // `increasing(p)` is false below the root and true above it.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if increasing(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// One-sided Clopper-Pearson upper bound: the largest `p` with
/// `P(X ≤ x; p) ≥ 1 - confidence`.
pub fn clopper_pearson_upper(x: u64, n: u64, confidence: f64) -> f64 {
    if x >= n {
        return 1.0;
    }
    let alpha = 1.0 - confidence;
    if x == 0 {
        return 1.0 - alpha.powf(1.0 / n as f64);
    }
    bisect(x as f64 / n as f64, 1.0, |p| binomial_cdf(x, n, p) < alpha)
}

/// One-sided Clopper-Pearson lower bound.
pub fn clopper_pearson_lower(x: u64, n: u64, confidence: f64) -> f64 {
    if x == 0 {
        return 0.0;
    }
    1.0 - clopper_pearson_upper(n - x, n, confidence)
}

/// Count interval `[lo, hi]` holding `Binomial(n, p)` with probability at
/// least `confidence`, with at most `(1 - confidence)/2` mass in each tail.
pub fn binomial_band(n: u64, p: f64, confidence: f64) -> (u64, u64) {
    let tail = 0.5 * (1.0 - confidence);
    let lo = (0..=n).find(|&x| binomial_cdf(x, n, p) > tail).unwrap_or(n);
    let hi = (0..=n).find(|&x| binomial_cdf(x, n, p) >= 1.0 - tail).unwrap_or(n);
    (lo, hi)
}
