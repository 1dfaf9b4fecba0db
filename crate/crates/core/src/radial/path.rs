//! Conditioned drifted paths, Williams gluing and the integrals `I(x)`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng;

use super::DriftSpec;

/// Skeleton of `√2 B_s − α s` conditioned to stay negative, on the grid
/// `s = k ds`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionedPath {
    pub ds: f64,
    pub values: Vec<f64>,
}

/// Probability `h(x) = 1 − e^{αx}` that the unconditioned process started
/// at `x < 0` never reaches 0.
pub fn h(alpha: f64, x: f64) -> f64 {
    -(alpha * x).exp_m1()
}

/// Exact transition of the conditioned process from `x < 0`.
///
/// Proposals come from the unconditioned Gaussian step and are accepted with
/// probability `(1 − e^{−xy/ds}) h(y)`: the first factor is the chance that
/// the Brownian bridge from `x` to `y` stays below 0, the second the
/// h-transform. The accepted law is the Doob transform of the killed kernel.
pub fn conditioned_step(rng: &mut impl Rng, alpha: f64, x: f64, ds: f64) -> f64 {
    let sd = (2.0 * ds).sqrt();
    loop {
        let z: f64 = rng.sample(StandardNormal);
        let y = x - alpha * ds + sd * z;
        if y >= 0.0 {
            continue;
        }
        let accept = -(-x * y / ds).exp_m1() * h(alpha, y);
        if rng.random::<f64>() < accept {
            return y;
        }
    }
}

/// Conditioned path on `[0, T]` started at `−eps`, drawing from `rng`.
pub fn conditioned_path_from(rng: &mut impl Rng, spec: &DriftSpec, n_steps: usize, ds: f64, eps: f64) -> Result<Vec<f64>> {
    if !(eps > 0.0) {
        return Err(Error::DegenerateStart);
    }
    if !(ds > 0.0) {
        return Err(Error::InvalidParameter(format!("ds must be positive, got {ds}")));
    }
    let mut values = Vec::with_capacity(n_steps + 1);
    let mut x = -eps;
    values.push(x);
    for _ in 0..n_steps {
        x = conditioned_step(rng, spec.alpha, x, ds);
        values.push(x);
    }
    Ok(values)
}

pub fn steps(t_max: f64, ds: f64) -> usize {
    (t_max / ds).round() as usize
}

pub fn sample_conditioned_path(spec: &DriftSpec, t_max: f64, ds: f64, eps: f64, seed: u64) -> Result<ConditionedPath> {
    if !(t_max > 0.0) {
        return Err(Error::InvalidParameter(format!("T must be positive, got {t_max}")));
    }
    let mut g = rng::stream(seed, 0);
    let values = conditioned_path_from(&mut g, spec, steps(t_max, ds), ds, eps)?;
    Ok(ConditionedPath { ds, values })
}

/// Two-sided path on a common grid: `pos[k]` is the value at `s = k ds`,
/// `neg[k]` at `s = −k ds`, and `pos[0] = neg[0]` is the maximum.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoSidedPath {
    pub ds: f64,
    pub pos: Vec<f64>,
    pub neg: Vec<f64>,
}

impl TwoSidedPath {
    /// Path with maximum 0 at `s = 0` built from two independent
    /// conditioned halves (the `−eps` start is replaced by the exact peak).
    pub fn from_halves(descent: &ConditionedPath, ascent: &ConditionedPath) -> Result<Self> {
        check_ds(descent.ds, ascent.ds)?;
        let mut pos = descent.values.clone();
        let mut neg = ascent.values.clone();
        pos[0] = 0.0;
        neg[0] = 0.0;
        Ok(Self { ds: descent.ds, pos, neg })
    }

    pub fn max(&self) -> f64 {
        self.pos.iter().chain(&self.neg).fold(f64::NEG_INFINITY, |m, v| m.max(*v))
    }

    /// Last index `k` with `neg[k] >= −x`: the grid version of `L_{−x}`.
    pub fn last_above(&self, x: f64) -> usize {
        self.neg.iter().rposition(|&v| v >= -x).unwrap_or(0)
    }
}

fn check_ds(a: f64, b: f64) -> Result<()> {
    if (a - b).abs() > 1e-12 * a.abs().max(b.abs()) {
        return Err(Error::IndexMismatch(format!("step sizes differ: {a} vs {b}")));
    }
    Ok(())
}

/// Williams gluing: `M + descent` for `s >= 0` and `M + ascent(−s)` for
/// `−L_{−M} <= s < 0`, where `L_{−M}` is the last time the reversed ascent
/// is above `−M`.
pub fn williams_concatenate(m: f64, descent: &ConditionedPath, reversed_ascent: &ConditionedPath) -> Result<TwoSidedPath> {
    if !(m >= 0.0) {
        return Err(Error::InvalidParameter(format!("maximum must be non-negative, got {m}")));
    }
    let base = TwoSidedPath::from_halves(descent, reversed_ascent)?;
    let l = base.last_above(m);
    if l + 1 == base.neg.len() && base.neg.len() > 1 {
        return Err(Error::IndexMismatch("reversed ascent never falls below −M on its horizon".into()));
    }
    Ok(TwoSidedPath {
        ds: base.ds,
        pos: base.pos.iter().map(|v| m + v).collect(),
        neg: base.neg[..=l].iter().map(|v| m + v).collect(),
    })
}

/// Cut-off for the lower integration limit `−L_{−x}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cutoff {
    At(f64),
    Infinite,
}

/// `I^H` and `I^∂` with the truncation bounds for the part beyond the
/// simulated horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IPair {
    pub ih: f64,
    pub ibdy: f64,
    pub trunc_h: f64,
    pub trunc_bdy: f64,
}

/// Lateral densities on the slices `[−T + k ds, −T + (k + 1) ds]`.
pub struct SliceDensities<'a> {
    pub zh: &'a [f64],
    pub zbdy: &'a [f64],
    pub ds: f64,
    /// Mean of `zh` (for truncation bounds).
    pub zh_mean: f64,
    /// Mean of `zbdy`.
    pub zbdy_mean: f64,
}

/// `I^H(x) = Σ ds e^{γ B(s)} Z^H_s` over slices with `s >= −L_{−x}`, with `B`
/// averaged over each slice's endpoints; `I^∂` likewise with `γ/2`.
pub fn compute_i(path: &TwoSidedPath, z: &SliceDensities<'_>, gamma: f64, alpha: f64, cut: Cutoff) -> Result<IPair> {
    check_ds(path.ds, z.ds)?;
    let n_slices = z.zh.len();
    if n_slices % 2 != 0 || z.zbdy.len() != n_slices {
        return Err(Error::IndexMismatch("slice counts must be even and equal".into()));
    }
    let k_half = n_slices / 2;
    if path.pos.len() < k_half + 1 {
        return Err(Error::IndexMismatch(format!("path covers {} steps, lateral needs {k_half}", path.pos.len() - 1)));
    }
    let l = match cut {
        Cutoff::Infinite => usize::MAX,
        Cutoff::At(x) => path.last_above(x),
    };
    let neg_slices = l.min(path.neg.len() - 1).min(k_half);
    let mut ih = 0.0;
    let mut ibdy = 0.0;
    for j in 0..k_half {
        let b = 0.5 * (path.pos[j] + path.pos[j + 1]);
        ih += (gamma * b).exp() * z.zh[k_half + j];
        ibdy += (0.5 * gamma * b).exp() * z.zbdy[k_half + j];
    }
    for j in 0..neg_slices {
        let b = 0.5 * (path.neg[j] + path.neg[j + 1]);
        ih += (gamma * b).exp() * z.zh[k_half - 1 - j];
        ibdy += (0.5 * gamma * b).exp() * z.zbdy[k_half - 1 - j];
    }
    // neglected tail beyond the horizon, with the conservative drift α/2
    let t = k_half as f64 * z.ds;
    let lam = 0.5 * alpha;
    let sides = if neg_slices == k_half { 2.0 } else { 1.0 };
    let trunc_h = sides * z.zh_mean * (-gamma * lam * t).exp() / (gamma * lam);
    let trunc_bdy = sides * z.zbdy_mean * (-0.5 * gamma * lam * t).exp() / (0.5 * gamma * lam);
    Ok(IPair { ih: ih * z.ds, ibdy: ibdy * z.ds, trunc_h, trunc_bdy })
}

/// Unconditioned `√2 B_s − α s` skeleton from 0, for oracle checks.
pub fn free_path(rng: &mut impl Rng, alpha: f64, n_steps: usize, ds: f64) -> Vec<f64> {
    let sd = (2.0 * ds).sqrt();
    let mut x = 0.0;
    let mut v = Vec::with_capacity(n_steps + 1);
    v.push(0.0);
    for _ in 0..n_steps {
        let z: f64 = rng.sample(StandardNormal);
        x += -alpha * ds + sd * z;
        v.push(x);
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> DriftSpec {
        DriftSpec::new(1.0).unwrap()
    }

    #[test]
    fn paths_stay_negative_and_are_reproducible() {
        for seed in 0..50 {
            let p = sample_conditioned_path(&spec(), 5.0, 0.05, 1e-3, seed).unwrap();
            assert_eq!(p.values.len(), 101);
            assert!(p.values.iter().all(|&v| v < 0.0));
        }
        let a = sample_conditioned_path(&spec(), 2.0, 0.1, 1e-3, 3).unwrap();
        assert_eq!(a, sample_conditioned_path(&spec(), 2.0, 0.1, 1e-3, 3).unwrap());
        assert!(matches!(sample_conditioned_path(&spec(), 2.0, 0.1, 0.0, 3), Err(Error::DegenerateStart)));
    }

    #[test]
    fn concatenation_peaks_at_m() {
        let d = sample_conditioned_path(&spec(), 20.0, 0.05, 1e-3, 1).unwrap();
        let a = sample_conditioned_path(&spec(), 20.0, 0.05, 1e-3, 2).unwrap();
        let p = williams_concatenate(0.8, &d, &a).unwrap();
        assert_eq!(p.pos[0], 0.8);
        assert_eq!(p.max(), 0.8);
        assert!(*p.neg.last().unwrap() >= 0.0);
        let p0 = williams_concatenate(0.0, &d, &a).unwrap();
        assert_eq!(p0.neg.len(), 1);
        assert_eq!(p0.max(), 0.0);
        let other = sample_conditioned_path(&spec(), 20.0, 0.1, 1e-3, 2).unwrap();
        assert!(matches!(williams_concatenate(0.8, &d, &other), Err(Error::IndexMismatch(_))));
    }

    #[test]
    fn synthetic_integral() {
        // Z ≡ 1 on s >= 0, path −s: I = ∫_0^∞ e^{−γ s} ds = 1/γ
        let ds = 0.01;
        let k = 2000;
        let path = TwoSidedPath {
            ds,
            pos: (0..=k).map(|i| -(i as f64) * ds).collect(),
            neg: vec![0.0; k + 1],
        };
        let mut zh = vec![0.0; 2 * k];
        zh[k..].iter_mut().for_each(|v| *v = 1.0);
        let zbdy = zh.clone();
        let z = SliceDensities { zh: &zh, zbdy: &zbdy, ds, zh_mean: 1.0, zbdy_mean: 1.0 };
        let gamma = 1.3;
        let i = compute_i(&path, &z, gamma, 1.0, Cutoff::Infinite).unwrap();
        assert!((i.ih - 1.0 / gamma).abs() < 1e-4);
        assert!((i.ibdy - 2.0 / gamma).abs() < 1e-4);
    }

    #[test]
    fn integrals_increase_with_cutoff() {
        let d = sample_conditioned_path(&spec(), 10.0, 0.05, 1e-3, 5).unwrap();
        let a = sample_conditioned_path(&spec(), 10.0, 0.05, 1e-3, 6).unwrap();
        let path = TwoSidedPath::from_halves(&d, &a).unwrap();
        let zh = vec![1.3; 400];
        let zb = vec![0.7; 400];
        let z = SliceDensities { zh: &zh, zbdy: &zb, ds: 0.05, zh_mean: 1.3, zbdy_mean: 0.7 };
        let mut prev = (0.0, 0.0);
        for x in [0.0, 0.1, 0.5, 1.0, 3.0, 100.0] {
            let i = compute_i(&path, &z, 1.0, 1.5, Cutoff::At(x)).unwrap();
            assert!(i.ih >= prev.0 && i.ibdy >= prev.1);
            prev = (i.ih, i.ibdy);
        }
        let inf = compute_i(&path, &z, 1.0, 1.5, Cutoff::Infinite).unwrap();
        assert!(inf.ih >= prev.0);
    }
}
