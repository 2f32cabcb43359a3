//! Small statistics helpers shared by the experiment drivers.

use statrs::distribution::{Beta, ContinuousCDF};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator).
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

pub fn std_err(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    std_dev(xs) / (xs.len() as f64).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

/// Ordinary least squares of `y` on `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    let n = x.len().min(y.len());
    let mx = mean(&x[..n]);
    let my = mean(&y[..n]);
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let dx = x[i] - mx;
        let dy = y[i] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = (0..n).map(|i| (y[i] - intercept - slope * x[i]).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    LinearFit { slope, intercept, r_squared, n_points: n }
}

/// Two-sided Kolmogorov-Smirnov statistic of a sample against a CDF.
pub fn ks_statistic_one_sample(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d
}

pub fn ks_statistic_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_by(|p, q| p.total_cmp(q));
    xb.sort_by(|p, q| p.total_cmp(q));
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < xa.len() && j < xb.len() {
        let x = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic KS critical coefficient `c(alpha)` with
/// `c = sqrt(-ln(alpha / 2) / 2)`; 1.628 at alpha = 0.01.
pub fn ks_coefficient(alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt()
}

/// Exact Clopper-Pearson interval for a binomial proportion. When the count
/// sits at a boundary (0 or all) the interval is one-sided and the whole
/// `1 - confidence` goes to the open side.
pub fn clopper_pearson(trials: u64, failures: u64, confidence: f64) -> (f64, f64) {
    assert!(failures <= trials && trials > 0);
    let alpha = 1.0 - confidence;
    let (n, x) = (trials as f64, failures as f64);
    if failures == 0 {
        return (0.0, 1.0 - alpha.powf(1.0 / n));
    }
    if failures == trials {
        return (alpha.powf(1.0 / n), 1.0);
    }
    let lo = Beta::new(x, n - x + 1.0).expect("beta").inverse_cdf(alpha / 2.0);
    let hi = Beta::new(x + 1.0, n - x).expect("beta").inverse_cdf(1.0 - alpha / 2.0);
    (lo, hi)
}
