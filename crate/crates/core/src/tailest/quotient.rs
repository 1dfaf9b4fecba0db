//! Moments of bulk/boundary quotients and their `ρ`-scaling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fieldsim::{build_cov, build_grid, CovFactor, Grid};
use crate::gmc::{localized_bdy_weights, localized_bulk_weights, LOCAL_TOL};
use crate::kernels::KernelSpec;
use crate::radial::{Cutoff, RadialSampler};
use crate::rng;
use crate::stats::{self, wls_line};

/// `(2 − γ²/2)(p − q/2) − γ²(p − q/2)²`
pub fn zeta_tilde(p: f64, q: f64, gamma: f64) -> f64 {
    let u = p - 0.5 * q;
    (2.0 - 0.5 * gamma * gamma) * u - gamma * gamma * u * u
}

/// Whether `E[bulk^p / bdy^q]` is finite: `p < min(2/γ² + q/2, 4/γ²)`.
pub fn finite_predicted(p: f64, q: f64, gamma: f64) -> bool {
    let g2 = gamma * gamma;
    p < (2.0 / g2 + 0.5 * q).min(4.0 / g2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuotientMomentEstimate {
    pub p: f64,
    pub q: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub n: usize,
    pub finite_predicted: bool,
}

impl QuotientMomentEstimate {
    pub fn from_samples(p: f64, q: f64, gamma: f64, xs: &[f64]) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::EmptySample);
        }
        let (estimate, stderr) = stats::mean_stderr(xs);
        Ok(Self { p, q, estimate, stderr, n: xs.len(), finite_predicted: finite_predicted(p, q, gamma) })
    }
}

/// Which objects enter the quotient.
pub enum QuotientMode<'a> {
    /// `I^H(x)^p / I^∂(x)^q` along radial samples.
    Radial { sampler: &'a RadialSampler, cut: Cutoff },
    /// Localized masses of the far piece of a cube of size `ρ`; see
    /// [`ScalingPiece`].
    Grid { gamma: f64, rho: f64, n_bulk: usize },
}

fn check_pq(p: f64, q: f64) -> Result<()> {
    if !(p >= 0.0 && q >= 0.0) {
        return Err(Error::InvalidParameter(format!("need p, q >= 0, got p = {p}, q = {q}")));
    }
    Ok(())
}

/// Per-sample quotients `I^H(x)^p / I^∂(x)^q`.
pub fn radial_quotients(sampler: &RadialSampler, p: f64, q: f64, cut: Cutoff, n: usize, seed: u64) -> Result<Vec<f64>> {
    check_pq(p, q)?;
    sampler.batch(n, seed, |s| {
        let i = sampler.integrals(s, cut)?;
        Ok(i.ih.powf(p) / i.ibdy.powf(q))
    })
}

/// For each sample, `sup_x I^H(x)^p / I^∂(x)^q` over the cut-offs `xs`
/// together with the value at `x = ∞`.
pub fn radial_quotient_sup(sampler: &RadialSampler, p: f64, q: f64, xs: &[f64], n: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
    check_pq(p, q)?;
    sampler.batch(n, seed, |s| {
        let f = |i: crate::radial::IPair| i.ih.powf(p) / i.ibdy.powf(q);
        let sup = sampler.integral_table(s, xs)?.into_iter().map(f).fold(0.0, f64::max);
        let full = f(sampler.integrals(s, Cutoff::Infinite)?);
        Ok((sup.max(full), full))
    })
}

/// Grid geometry for the quotient `μ^H_v(R)^p / μ^∂_v(J)^q`: the cube
/// `[−ρ, ρ] × [0, 2ρ]` localized at its left corner `v = −ρ`, with `R` the
/// cells at distance at least `ρ` from `v` and `J = [0, ρ]`. Under the
/// exact-scaling kernel the whole configuration is a dilation of the `ρ = 1`
/// one, so the quotient moment is exactly a power of `ρ`.
pub struct ScalingPiece {
    pub grid: Grid,
    pub factor: CovFactor,
    pub v: f64,
    pub bulk_w: Vec<f64>,
    pub bdy_w: Vec<f64>,
}

impl ScalingPiece {
    pub fn new(gamma: f64, rho: f64, n_bulk: usize) -> Result<Self> {
        if !(rho > 0.0) {
            return Err(Error::InvalidRho(rho));
        }
        if !(gamma > 0.0 && gamma < 2.0_f64.sqrt()) {
            return Err(Error::InvalidParameter(format!("grid quotients need 0 < γ < √2, got {gamma}")));
        }
        let grid = build_grid(rho, n_bulk, 2 * n_bulk)?;
        let factor = build_cov(&grid, &KernelSpec::ExactScalingNeumann, true)?;
        let v = -rho;
        let region = grid.cells_where(|z| (z.x - v).hypot(z.y) >= rho);
        let bulk_w = localized_bulk_weights(&grid, gamma, v, &region, LOCAL_TOL)?;
        let mut bdy_w = localized_bdy_weights(&grid, gamma, v).weights;
        for (j, w) in bdy_w.iter_mut().enumerate() {
            let c = grid.bdy_centers[j];
            if !(c >= 0.0 && c <= rho) {
                *w = 0.0;
            }
        }
        Ok(Self { grid, factor, v, bulk_w, bdy_w })
    }

    /// Per-replica `(bulk, bdy)` localized masses.
    pub fn masses(&self, gamma: f64, n: usize, seed: u64) -> Vec<(f64, f64)> {
        let f = &self.factor;
        let nc = self.grid.n_cells();
        let g = gamma;
        rng::replica_chunks(n, 256, |start, end| {
            let mut z = vec![0.0; f.dim];
            let mut x = vec![0.0; f.dim];
            (start..end)
                .map(|i| {
                    f.sample_into(&mut rng::stream(seed, i as u64), &mut z, &mut x);
                    let bulk = (0..nc)
                        .filter(|&k| self.bulk_w[k] > 0.0)
                        .map(|k| self.bulk_w[k] * (g * x[k] - 0.5 * g * g * f.diag_var[k]).exp())
                        .sum();
                    let bdy = (0..self.grid.n_bdy)
                        .filter(|&k| self.bdy_w[k] > 0.0)
                        .map(|k| self.bdy_w[k] * (0.5 * g * x[nc + k] - 0.125 * g * g * f.diag_var[nc + k]).exp())
                        .sum();
                    (bulk, bdy)
                })
                .collect()
        })
    }
}

pub fn estimate_quotient_moment(p: f64, q: f64, mode: QuotientMode<'_>, n: usize, seed: u64) -> Result<QuotientMomentEstimate> {
    check_pq(p, q)?;
    match mode {
        QuotientMode::Radial { sampler, cut } => {
            let xs = radial_quotients(sampler, p, q, cut, n, seed)?;
            QuotientMomentEstimate::from_samples(p, q, sampler.config.gamma, &xs)
        }
        QuotientMode::Grid { gamma, rho, n_bulk } => {
            let piece = ScalingPiece::new(gamma, rho, n_bulk)?;
            let xs: Vec<f64> = piece.masses(gamma, n, seed).iter().map(|&(b, d)| b.powf(p) / d.powf(q)).collect();
            QuotientMomentEstimate::from_samples(p, q, gamma, &xs)
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RhoSweep {
    pub rhos: Vec<f64>,
    pub estimates: Vec<QuotientMomentEstimate>,
    pub slope: f64,
    pub stderr_slope: f64,
    pub zeta_tilde: f64,
}

/// Grid quotient moments over `rhos` (common seed) and the weighted fit of
/// `ln E` against `ln ρ`.
pub fn rho_sweep(gamma: f64, p: f64, q: f64, rhos: &[f64], n_bulk: usize, n: usize, seed: u64) -> Result<RhoSweep> {
    if rhos.len() < 2 {
        return Err(Error::InvalidParameter("need at least two radii".into()));
    }
    let estimates = rhos
        .iter()
        .map(|&rho| estimate_quotient_moment(p, q, QuotientMode::Grid { gamma, rho, n_bulk }, n, seed))
        .collect::<Result<Vec<_>>>()?;
    let x: Vec<f64> = rhos.iter().map(|r| r.ln()).collect();
    let y: Vec<f64> = estimates.iter().map(|e| e.estimate.ln()).collect();
    let w: Vec<f64> = estimates.iter().map(|e| (e.estimate / e.stderr).powi(2)).collect();
    let fit = wls_line(&x, &y, &w);
    Ok(RhoSweep { rhos: rhos.to_vec(), estimates, slope: fit.slope, stderr_slope: fit.se_slope, zeta_tilde: zeta_tilde(p, q, gamma) })
}

/// Running means `(k, mean of xs[..k])` at `n_points` log-spaced `k`.
pub fn running_mean(xs: &[f64], n_points: usize) -> Vec<(usize, f64)> {
    if xs.is_empty() {
        return Vec::new();
    }
    let mut ks: Vec<usize> = super::fit::log_grid(1.0, xs.len() as f64, n_points.max(2))
        .into_iter()
        .map(|k| (k.round() as usize).clamp(1, xs.len()))
        .collect();
    ks.dedup();
    let mut out = Vec::with_capacity(ks.len());
    let mut acc = 0.0;
    let mut done = 0;
    for k in ks {
        acc += xs[done..k].iter().sum::<f64>();
        done = k;
        out.push((k, acc / k as f64));
    }
    out
}
