//! Small statistics helpers used by the estimators and tests.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

/// Sample mean and standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Sample variance (unbiased).
pub fn variance(xs: &[f64]) -> f64 {
    let (m, _) = mean_stderr(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Empirical quantile by linear interpolation on sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 >= n {
        sorted[n - 1]
    } else {
        sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
    }
}

pub fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

pub fn quantile(xs: &[f64], q: f64) -> f64 {
    quantile_sorted(&sorted(xs), q)
}

/// Mean after discarding the largest `frac` fraction of the sample.
pub fn upper_trimmed_mean(xs: &[f64], frac: f64) -> f64 {
    let s = sorted(xs);
    let keep = s.len() - ((s.len() as f64 * frac).floor() as usize).min(s.len() - 1);
    s[..keep].iter().sum::<f64>() / keep as f64
}

/// Percentile bootstrap interval for the mean.
pub fn bootstrap_mean_ci(xs: &[f64], resamples: usize, level: f64, seed: u64) -> Result<(f64, f64)> {
    if xs.is_empty() {
        return Err(Error::EmptySample);
    }
    let n = xs.len();
    let means = rng::replicas(resamples, |b| {
        let mut g = rng::stream(seed, b as u64);
        let mut acc = 0.0;
        for _ in 0..n {
            acc += xs[g.random_range(0..n)];
        }
        acc / n as f64
    });
    let s = sorted(&means);
    let a = 0.5 * (1.0 - level);
    Ok((quantile_sorted(&s, a), quantile_sorted(&s, 1.0 - a)))
}

/// Kolmogorov-Smirnov distance between a sample and a continuous CDF.
pub fn ks_distance(xs: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let s = sorted(xs);
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in s.iter().enumerate() {
        let f = cdf(*x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d
}

/// Weighted least-squares line `y = a + b x` with weights equal to inverse
/// variances.
#[derive(Debug, Clone, Copy)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    pub se_intercept: f64,
    pub se_slope: f64,
}

pub fn wls_line(x: &[f64], y: &[f64], w: &[f64]) -> LineFit {
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for i in 0..x.len() {
        sxx += w[i] * (x[i] - mx).powi(2);
        sxy += w[i] * (x[i] - mx) * (y[i] - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    LineFit {
        intercept,
        slope,
        se_intercept: (1.0 / sw + mx * mx / sxx).sqrt(),
        se_slope: (1.0 / sxx).sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_quantiles() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let (m, se) = mean_stderr(&xs);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(quantile(&xs, 0.5), 2.5);
        assert_eq!(upper_trimmed_mean(&[1.0, 1.0, 1.0, 100.0], 0.25), 1.0);
    }

    #[test]
    fn wls_recovers_exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 1.0 - 2.0 * v).collect();
        let f = wls_line(&x, &y, &[1.0, 2.0, 1.0, 3.0]);
        assert!((f.slope + 2.0).abs() < 1e-12 && (f.intercept - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ks_of_perfect_grid_is_small() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        assert!(ks_distance(&xs, |x| x) <= 0.0005 + 1e-12);
    }
}
