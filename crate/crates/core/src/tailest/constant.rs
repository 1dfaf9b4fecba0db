//! The tail constant through the radial decomposition, and its `g`-factor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::gl16;
use crate::radial::{Cutoff, RadialSampler};
use crate::stats;

/// `2r (1 − γ²/4) E[I^H(∞)^{2/γ²} / I^∂(∞)]` and its spread.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstantEstimate {
    pub constant: f64,
    pub stderr: f64,
    /// Same with the top 0.1% of integrand values removed.
    pub trimmed: f64,
    /// Bootstrap percentile interval for `constant`.
    pub ci: (f64, f64),
    pub ci_level: f64,
    pub mean_integrand: f64,
    pub n: usize,
    /// `Σ trunc / Σ I` over the samples, worst of bulk and boundary.
    pub truncation: f64,
}

pub const TRIM: f64 = 0.001;

/// `2r (1 − γ²/4) · mean`.
pub fn constant_from_mean(gamma: f64, r: f64, mean: f64) -> f64 {
    2.0 * r * (1.0 - 0.25 * gamma * gamma) * mean
}

/// Integrand samples `I^H(∞)^{2/γ²} / I^∂(∞)` with their truncation bounds.
pub fn constant_integrand(sampler: &RadialSampler, n: usize, seed: u64) -> Result<Vec<(f64, [f64; 4])>> {
    let p = 2.0 / (sampler.config.gamma * sampler.config.gamma);
    sampler.batch(n, seed, |s| {
        let i = sampler.integrals(s, Cutoff::Infinite)?;
        Ok((i.ih.powf(p) / i.ibdy, [i.ih, i.trunc_h, i.ibdy, i.trunc_bdy]))
    })
}

/// Summarize integrand samples; `trunc_tol` bounds the relative neglected
/// tail beyond the horizon.
pub fn constant_from_samples(gamma: f64, r: f64, samples: &[(f64, [f64; 4])], trunc_tol: f64, seed: u64) -> Result<ConstantEstimate> {
    if samples.len() < 2 {
        return Err(Error::EmptySample);
    }
    let mut sums = [0.0; 4];
    for (_, b) in samples {
        for k in 0..4 {
            sums[k] += b[k];
        }
    }
    let truncation = (sums[1] / sums[0]).max(sums[3] / sums[2]);
    if truncation > trunc_tol {
        return Err(Error::TruncationTooShort { bound: truncation, tol: trunc_tol });
    }
    let xs: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let (m, se) = stats::mean_stderr(&xs);
    let k = constant_from_mean(gamma, r, 1.0);
    let level = 0.95;
    let (lo, hi) = stats::bootstrap_mean_ci(&xs, 1000, level, seed)?;
    Ok(ConstantEstimate {
        constant: k * m,
        stderr: k * se,
        trimmed: k * stats::upper_trimmed_mean(&xs, TRIM),
        ci: (k * lo, k * hi),
        ci_level: level,
        mean_integrand: m,
        n: xs.len(),
        truncation,
    })
}

pub fn estimate_constant_radial(sampler: &RadialSampler, r: f64, n: usize, trunc_tol: f64, seed: u64) -> Result<ConstantEstimate> {
    let gamma = sampler.config.gamma;
    if !(r > 0.0) {
        return Err(Error::InvalidParameter(format!("r must be positive, got {r}")));
    }
    let samples = constant_integrand(sampler, n, seed)?;
    constant_from_samples(gamma, r, &samples, trunc_tol, crate::rng::derive_seed(seed, 0xb007))
}

/// `∫_{−r}^{r} e^{(2/γ² − 1) g(v, v)} dv` by composite Gauss-Legendre on 8
/// and 16 panels; the two must agree to `1e-10` relative.
pub fn perturbed_constant_factor(g_diag: impl Fn(f64) -> f64, r: f64, gamma: f64) -> Result<f64> {
    if !(r > 0.0) || !(gamma > 0.0 && gamma < 2.0) {
        return Err(Error::InvalidParameter(format!("need r > 0 and 0 < γ < 2, got r = {r}, γ = {gamma}")));
    }
    let e = 2.0 / (gamma * gamma) - 1.0;
    let rule = gl16();
    let integrate = |panels: usize| -> f64 {
        let h = 2.0 * r / panels as f64;
        (0..panels)
            .map(|k| {
                let a = -r + k as f64 * h;
                rule.on(a, a + h).map(|(v, w)| w * (e * g_diag(v)).exp()).sum::<f64>()
            })
            .sum()
    };
    let coarse = integrate(8);
    let fine = integrate(16);
    let tol = 1e-10;
    if !fine.is_finite() || (fine - coarse).abs() > tol * fine.abs() {
        return Err(Error::QuadratureUnstable { diff: (fine - coarse).abs(), tol });
    }
    Ok(fine)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefactor_arithmetic() {
        assert!((constant_from_mean(2.0_f64.sqrt(), 1.0, 1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn unit_integrand() {
        let s: Vec<(f64, [f64; 4])> = (0..100).map(|_| (1.0, [1.0, 0.0, 1.0, 0.0])).collect();
        let c = constant_from_samples(2.0_f64.sqrt(), 1.0, &s, 0.1, 1).unwrap();
        assert!((c.constant - 1.0).abs() < 1e-15 && c.stderr == 0.0);
        assert!((c.ci.0 - 1.0).abs() < 1e-15 && (c.ci.1 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn truncation_is_checked() {
        let s = vec![(1.0, [1.0, 0.5, 1.0, 0.0]); 10];
        assert!(matches!(constant_from_samples(1.0, 1.0, &s, 0.1, 1), Err(Error::TruncationTooShort { .. })));
    }

    #[test]
    fn factor_examples() {
        let r = 0.7;
        assert!((perturbed_constant_factor(|_| 0.0, r, 1.0).unwrap() - 2.0 * r).abs() < 1e-13);
        assert!((perturbed_constant_factor(|_| 0.5, r, 1.0).unwrap() - 2.0 * r * 0.5f64.exp()).abs() < 1e-13);
        let s2 = 2.0_f64.sqrt();
        assert!((perturbed_constant_factor(|v| v * v, r, s2).unwrap() - 2.0 * r).abs() < 1e-13);
        // (2/γ² − 1) = 1: ∫ e^{v} = 2 sinh r
        assert!((perturbed_constant_factor(|v| v, r, 1.0).unwrap() - 2.0 * r.sinh()).abs() < 1e-13);
    }

    #[test]
    fn rough_integrand_is_flagged() {
        let r = perturbed_constant_factor(|v| if v > 0.1234 { 3.0 } else { 0.0 }, 1.0, 1.0);
        assert!(matches!(r, Err(Error::QuadratureUnstable { .. })));
    }
}
