//! Survival curves and power-law tail fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{self, wls_line};

/// One point of an estimated survival function `P[X > t]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub t: f64,
    pub p: f64,
    pub stderr: f64,
    /// `p` is 0 or 1, so the binomial error degenerates.
    pub boundary: bool,
}

impl CurvePoint {
    pub fn new(t: f64, p: f64, stderr: f64) -> Self {
        Self { t, p, stderr, boundary: p <= 0.0 || p >= 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitMethod {
    LogLogWls,
    Hill,
}

/// `P[X > t] ≈ constant · t^(−exponent)` on `t_window`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub exponent: f64,
    pub constant: f64,
    pub stderr_exponent: f64,
    pub stderr_constant: f64,
    pub t_window: (f64, f64),
    pub n_points: usize,
    pub method: FitMethod,
}

fn check_increasing(ts: &[f64]) -> Result<()> {
    if ts.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("thresholds must be strictly increasing".into()));
    }
    Ok(())
}

/// Empirical survival function with binomial standard errors.
pub fn survival_curve(samples: &[f64], ts: &[f64]) -> Result<Vec<CurvePoint>> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    check_increasing(ts)?;
    let s = stats::sorted(samples);
    let n = s.len() as f64;
    Ok(ts
        .iter()
        .map(|&t| {
            let above = s.len() - s.partition_point(|&x| x <= t);
            let p = above as f64 / n;
            CurvePoint::new(t, p, (p * (1.0 - p) / n).sqrt())
        })
        .collect())
}

/// `n` log-spaced thresholds on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

fn usable(curve: &[CurvePoint], window: (f64, f64)) -> Vec<CurvePoint> {
    curve
        .iter()
        .copied()
        .filter(|c| c.t >= window.0 && c.t <= window.1 && c.p > 0.0 && c.p < 1.0 && c.stderr > 0.0)
        .collect()
}

fn check_window(window: (f64, f64)) -> Result<()> {
    if !(window.0 > 0.0 && window.0 < window.1) {
        return Err(Error::DegenerateWindow(format!("need 0 < t_min < t_max, got {window:?}")));
    }
    Ok(())
}

/// Weighted least squares of `ln P` on `ln t`, weights `P² / stderr²`.
pub fn fit_loglog(curve: &[CurvePoint], window: (f64, f64)) -> Result<TailFit> {
    check_window(window)?;
    let pts = usable(curve, window);
    if pts.len() < 8 {
        return Err(Error::DegenerateWindow(format!("{} usable points in {window:?}, need 8", pts.len())));
    }
    let x: Vec<f64> = pts.iter().map(|c| c.t.ln()).collect();
    let y: Vec<f64> = pts.iter().map(|c| c.p.ln()).collect();
    let w: Vec<f64> = pts.iter().map(|c| (c.p / c.stderr).powi(2)).collect();
    let f = wls_line(&x, &y, &w);
    let constant = f.intercept.exp();
    Ok(TailFit {
        exponent: -f.slope,
        constant,
        stderr_exponent: f.se_slope,
        stderr_constant: constant * f.se_intercept,
        t_window: window,
        n_points: pts.len(),
        method: FitMethod::LogLogWls,
    })
}

/// Hill estimator over the order statistics above `window.0`.
pub fn fit_hill(samples: &[f64], window: (f64, f64)) -> Result<TailFit> {
    check_window(window)?;
    if samples.len() < 1000 {
        return Err(Error::DegenerateWindow(format!("Hill needs 1000 samples, got {}", samples.len())));
    }
    let mut s = stats::sorted(samples);
    s.reverse();
    let k = s.iter().take_while(|&&x| x > window.0).count();
    if k < 2 || k >= s.len() {
        return Err(Error::DegenerateWindow(format!("{k} order statistics above {}", window.0)));
    }
    let xk = s[k];
    if !(xk > 0.0) {
        return Err(Error::DegenerateWindow("Hill needs positive samples".into()));
    }
    let xi = s[..k].iter().map(|x| (x / xk).ln()).sum::<f64>() / k as f64;
    let alpha = 1.0 / xi;
    let se_alpha = alpha / (k as f64).sqrt();
    let frac = k as f64 / s.len() as f64;
    let constant = frac * xk.powf(alpha);
    Ok(TailFit {
        exponent: alpha,
        constant,
        stderr_exponent: se_alpha,
        stderr_constant: constant * (xk.ln().abs() * se_alpha).hypot(1.0 / (k as f64).sqrt()),
        t_window: window,
        n_points: k,
        method: FitMethod::Hill,
    })
}

/// `fit_tail` on a curve (log-log) or raw samples (Hill).
pub enum TailData<'a> {
    Curve(&'a [CurvePoint]),
    Samples(&'a [f64]),
}

pub fn fit_tail(data: TailData<'_>, window: (f64, f64), method: FitMethod) -> Result<TailFit> {
    match (data, method) {
        (TailData::Curve(c), FitMethod::LogLogWls) => fit_loglog(c, window),
        (TailData::Samples(s), FitMethod::Hill) => fit_hill(s, window),
        (TailData::Samples(s), FitMethod::LogLogWls) => {
            let ts = log_grid(window.0, window.1, 24);
            fit_loglog(&survival_curve(s, &ts)?, window)
        }
        (TailData::Curve(_), FitMethod::Hill) => {
            Err(Error::InvalidParameter("the Hill estimator needs raw samples".into()))
        }
    }
}

/// Constant of `P ≈ C t^(−exponent)` with the exponent held fixed: the
/// weighted mean of `ln(P t^exponent)`. Returns `(C, stderr)`.
pub fn fit_constant(curve: &[CurvePoint], window: (f64, f64), exponent: f64) -> Result<(f64, f64)> {
    check_window(window)?;
    let pts = usable(curve, window);
    if pts.is_empty() {
        return Err(Error::DegenerateWindow(format!("no usable points in {window:?}")));
    }
    let mut sw = 0.0;
    let mut acc = 0.0;
    for c in &pts {
        let w = (c.p / c.stderr).powi(2);
        sw += w;
        acc += w * (c.p.ln() + exponent * c.t.ln());
    }
    let c = (acc / sw).exp();
    Ok((c, c / sw.sqrt()))
}

/// Exponent fitted on `[t_min, t_max]` for each lower end in `t_mins`;
/// windows with too few points are skipped.
pub fn exponent_stability(curve: &[CurvePoint], t_mins: &[f64], t_max: f64) -> Vec<(f64, TailFit)> {
    t_mins
        .iter()
        .filter_map(|&lo| fit_loglog(curve, (lo, t_max)).ok().map(|f| (lo, f)))
        .collect()
}

/// Default fit window: from the sample's 95th percentile to the largest
/// threshold still backed by at least `min_exceed` exceedances.
pub fn default_window(samples: &[f64], ts: &[f64], exceedances: &[usize], min_exceed: usize) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    let lo = stats::quantile(samples, 0.95);
    let hi = ts
        .iter()
        .zip(exceedances)
        .filter(|&(_, &n)| n >= min_exceed)
        .map(|(&t, _)| t)
        .fold(f64::NAN, f64::max);
    if !(hi > lo) {
        return Err(Error::DegenerateWindow(format!("no threshold above {lo} has {min_exceed} exceedances")));
    }
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn pareto(n: usize, alpha: f64, c: f64, seed: u64) -> Vec<f64> {
        let mut g = rng::stream(seed, 0);
        (0..n).map(|_| c.powf(1.0 / alpha) * rng::open_uniform(&mut g).powf(-1.0 / alpha)).collect()
    }

    #[test]
    fn survival_examples() {
        let c = survival_curve(&[1.0, 2.0, 3.0], &[0.5, 2.5, 4.0]).unwrap();
        assert_eq!(c[0].p, 1.0);
        assert!((c[1].p - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(c[2].p, 0.0);
        assert_eq!(c[2].stderr, 0.0);
        assert!(c[2].boundary && c[0].boundary && !c[1].boundary);
        assert!(matches!(survival_curve(&[], &[1.0]), Err(Error::EmptySample)));
    }

    #[test]
    fn pareto_exponent_and_constant() {
        let xs = pareto(100_000, 2.0, 3.0, 1);
        let ts = log_grid(2.0, 40.0, 20);
        let f = fit_loglog(&survival_curve(&xs, &ts).unwrap(), (2.0, 40.0)).unwrap();
        assert!((f.exponent - 2.0).abs() < 0.05, "{f:?}");
        assert!((f.constant / 3.0 - 1.0).abs() < 0.05, "{f:?}");
        let h = fit_hill(&xs, (4.0, f64::INFINITY)).unwrap();
        assert!((h.exponent - 2.0).abs() < 0.05, "{h:?}");
        let (c, _) = fit_constant(&survival_curve(&xs, &ts).unwrap(), (2.0, 40.0), 2.0).unwrap();
        assert!((c / 3.0 - 1.0).abs() < 0.05);
    }

    #[test]
    fn exponential_maximum_exponent() {
        // e^{γM}, M ~ Exp(2/γ − γ/2): exponent 2/γ² − 1/2 = 1.5 at γ = 1
        let mut g = rng::stream(2, 0);
        let xs: Vec<f64> = (0..100_000).map(|_| (-rng::open_uniform(&mut g).ln() / 1.5).exp()).collect();
        let ts = log_grid(1.5, 200.0, 24);
        let f = fit_loglog(&survival_curve(&xs, &ts).unwrap(), (1.5, 200.0)).unwrap();
        assert!((f.exponent - 1.5).abs() < 0.05, "{f:?}");
    }

    #[test]
    fn degenerate_windows() {
        let xs = pareto(2000, 2.0, 1.0, 3);
        let c = survival_curve(&xs, &log_grid(1.0, 10.0, 5)).unwrap();
        assert!(matches!(fit_loglog(&c, (1.0, 10.0)), Err(Error::DegenerateWindow(_))));
        assert!(matches!(fit_loglog(&c, (10.0, 1.0)), Err(Error::DegenerateWindow(_))));
        assert!(matches!(fit_hill(&xs[..10], (1.0, 2.0)), Err(Error::DegenerateWindow(_))));
    }

    #[test]
    fn window_from_exceedances() {
        let xs: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        let w = default_window(&xs, &[10.0, 100.0, 200.0, 400.0], &[500, 80, 50, 3], 50).unwrap();
        assert!((w.0 - 95.05).abs() < 1e-9 && w.1 == 200.0);
    }
}
