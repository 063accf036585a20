//! Descriptive statistics used by the simulation code.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::rng::{StreamKey, UniformStream};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Linear-interpolation quantile of already sorted data (Hyndman-Fan type 7).
pub fn quantile_sorted(sorted: &[f64], level: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0, "quantile of empty sample");
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * level.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

pub fn quantile(xs: &[f64], level: f64) -> f64 {
    quantile_sorted(&sorted(xs), level)
}

pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

pub fn iqr(xs: &[f64]) -> f64 {
    let s = sorted(xs);
    quantile_sorted(&s, 0.75) - quantile_sorted(&s, 0.25)
}

/// Kolmogorov-Smirnov distance between a sample and a continuous CDF.
pub fn ks_one_sample(xs: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let s = sorted(xs);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let a = sorted(a);
    let b = sorted(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

pub fn chi2_quantile(dof: usize, level: f64) -> f64 {
    ChiSquared::new(dof as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(level)
}

pub fn chi2_cdf(dof: usize, x: f64) -> f64 {
    ChiSquared::new(dof as f64)
        .expect("positive degrees of freedom")
        .cdf(x)
}

/// Bootstrap standard error of the empirical `level` quantile.
pub fn bootstrap_quantile_se(xs: &[f64], level: f64, resamples: usize, key: StreamKey) -> f64 {
    let n = xs.len();
    if n < 2 || resamples < 2 {
        return 0.0;
    }
    let mut rng = UniformStream::new(key);
    let mut buf = vec![0.0; n];
    let mut estimates = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        for slot in buf.iter_mut() {
            *slot = xs[rng.index(n)];
        }
        estimates.push(select_quantile(&mut buf, level));
    }
    variance(&estimates).sqrt()
}

/// Type-7 quantile by partial selection; reorders `buf`.
fn select_quantile(buf: &mut [f64], level: f64) -> f64 {
    let n = buf.len();
    let h = (n - 1) as f64 * level;
    let lo = h.floor() as usize;
    let (_, &mut lo_val, rest) = buf.select_nth_unstable_by(lo, f64::total_cmp);
    if lo + 1 >= n {
        return lo_val;
    }
    let hi_val = rest.iter().cloned().fold(f64::INFINITY, f64::min);
    lo_val + (h - lo as f64) * (hi_val - lo_val)
}
