//! Radial route: the maximum `M`, conditioned paths, lateral densities and
//! the integrals `I^H(x)`, `I^∂(x)`.
//!
//! Convention: the radial process is `√2 B_s − α s` with `B` standard and
//! `α = 2/γ − γ/2`; its overall maximum is Exponential with rate `α`.

pub mod lateral;
pub mod path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmc::GmcParams;
use crate::rng;

pub use lateral::{LateralFactor, LateralSample};
pub use path::{
    compute_i, conditioned_path_from, sample_conditioned_path, williams_concatenate, ConditionedPath, Cutoff, IPair,
    SliceDensities, TwoSidedPath,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftSpec {
    pub gamma: f64,
    pub alpha: f64,
}

impl DriftSpec {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 2.0) {
            return Err(Error::InvalidParameter(format!("gamma must lie in (0, 2), got {gamma}")));
        }
        Ok(Self { gamma, alpha: 2.0 / gamma - 0.5 * gamma })
    }
}

/// Exponential(`rate`) by inversion.
fn exp_draw(g: &mut impl Rng, rate: f64) -> f64 {
    -rng::open_uniform(g).ln() / rate
}

/// `M ~ Exponential(α)`: the maximum of `√2 B_s − α s`.
pub fn sample_max(spec: &DriftSpec, seed: u64) -> f64 {
    exp_draw(&mut rng::stream(seed, 0), spec.alpha)
}

/// `n` maxima drawn sequentially from stream 0 of `seed` (the first equals
/// `sample_max(spec, seed)`).
pub fn sample_max_batch(spec: &DriftSpec, seed: u64, n: usize) -> Vec<f64> {
    let mut g = rng::stream(seed, 0);
    (0..n).map(|_| exp_draw(&mut g, spec.alpha)).collect()
}

/// Maxima of the unit-variance process `B_s − α s`, Exponential(`2α`).
pub fn sample_max_unit_batch(alpha: f64, seed: u64, n: usize) -> Vec<f64> {
    let mut g = rng::stream(seed, 0);
    (0..n).map(|_| exp_draw(&mut g, 2.0 * alpha)).collect()
}

/// Discretization of the radial sampler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialConfig {
    pub gamma: f64,
    /// Horizon `T`: paths and lateral field live on `[−T, T]`.
    pub t_max: f64,
    pub ds: f64,
    pub n_theta: usize,
    pub eps: f64,
}

impl RadialConfig {
    /// Horizon `max(30, 3 ln t_max / (γ α))` from the largest tail level of
    /// interest, rounded up to a multiple of `ds`.
    pub fn default_horizon(gamma: f64, t_level: f64, ds: f64) -> f64 {
        let alpha = 2.0 / gamma - 0.5 * gamma;
        let t = (3.0 * t_level.max(1.0).ln() / (gamma * alpha)).max(30.0);
        (t / ds).ceil() * ds
    }
}

/// Samples radial objects for a fixed configuration; owns the shared
/// lateral factor.
#[derive(Debug, Clone)]
pub struct RadialSampler {
    pub config: RadialConfig,
    pub spec: DriftSpec,
    pub lateral: LateralFactor,
    zh_mean: f64,
}

/// One joint realization: maximum `M`, the max-0 two-sided conditioned path
/// and the lateral densities.
#[derive(Debug, Clone)]
pub struct RadialSample {
    pub m: f64,
    /// `N_ρ` standard score (multiply by `√(−2 ln ρ)`).
    pub n_score: f64,
    pub path: TwoSidedPath,
    pub lateral: LateralSample,
    pub seed: u64,
}

impl RadialSampler {
    pub fn new(config: RadialConfig) -> Result<Self> {
        let spec = DriftSpec::new(config.gamma)?;
        if !(config.eps > 0.0) {
            return Err(Error::DegenerateStart);
        }
        let lateral = LateralFactor::new(config.t_max, config.ds, config.n_theta)?;
        let zh_mean = lateral.zh_mean(config.gamma)?;
        Ok(Self { config, spec, lateral, zh_mean })
    }

    fn path_pair(&self, seed: u64) -> Result<TwoSidedPath> {
        let c = &self.config;
        let n = path::steps(c.t_max, c.ds);
        let mut g = rng::stream(seed, 0);
        let d = conditioned_path_from(&mut g, &self.spec, n, c.ds, c.eps)?;
        let a = conditioned_path_from(&mut g, &self.spec, n, c.ds, c.eps)?;
        TwoSidedPath::from_halves(&ConditionedPath { ds: c.ds, values: d }, &ConditionedPath { ds: c.ds, values: a })
    }

    fn scalars(&self, seed: u64) -> (f64, f64) {
        let mut g = rng::stream(seed, 0);
        let m = exp_draw(&mut g, self.spec.alpha);
        let z: f64 = g.sample(StandardNormal);
        (m, z)
    }

    /// Two joint samples sharing one lateral spectral draw (the two lateral
    /// fields are independent).
    pub fn sample_pair(&self, seed: u64) -> Result<(RadialSample, RadialSample)> {
        let (l1, l2) = self.lateral.sample_pair(rng::derive_seed(seed, 1), self.config.gamma)?;
        let mut out = Vec::with_capacity(2);
        for (i, lat) in [l1, l2].into_iter().enumerate() {
            let path = self.path_pair(rng::derive_seed(seed, 10 + i as u64))?;
            let (m, n_score) = self.scalars(rng::derive_seed(seed, 20 + i as u64));
            out.push(RadialSample { m, n_score, path, lateral: lat, seed });
        }
        let b = out.pop().unwrap();
        let a = out.pop().unwrap();
        Ok((a, b))
    }

    pub fn sample(&self, seed: u64) -> Result<RadialSample> {
        Ok(self.sample_pair(seed)?.0)
    }

    /// `I^H(x)`, `I^∂(x)` of a sample.
    pub fn integrals(&self, s: &RadialSample, cut: Cutoff) -> Result<IPair> {
        let z = SliceDensities {
            zh: &s.lateral.zh,
            zbdy: &s.lateral.zbdy,
            ds: self.config.ds,
            zh_mean: self.zh_mean,
            zbdy_mean: 2.0,
        };
        compute_i(&s.path, &z, self.config.gamma, self.spec.alpha, cut)
    }

    /// `I^H` and `I^∂` on a table of cut-offs.
    pub fn integral_table(&self, s: &RadialSample, xs: &[f64]) -> Result<Vec<IPair>> {
        xs.iter().map(|&x| self.integrals(s, Cutoff::At(x))).collect()
    }

    /// `ρ^{2−γ²/2} e^{γ N_ρ} e^{γ M} I^H(M)`, the law of `μ^H_0(Q(0, ρ))`.
    pub fn bulk_mass_of(&self, s: &RadialSample, rho: f64) -> Result<f64> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::InvalidRho(rho));
        }
        let g = self.config.gamma;
        let sd = (-2.0 * rho.ln()).sqrt();
        let i = self.integrals(s, Cutoff::At(s.m))?;
        Ok(rho.powf(2.0 - 0.5 * g * g) * (g * (sd * s.n_score + s.m)).exp() * i.ih)
    }

    /// `radial_bulk_mass`: one draw of `μ^H_0(Q(0, ρ))` for `ρ ∈ (0, r]`.
    pub fn radial_bulk_mass(&self, params: &GmcParams, rho: f64, seed: u64) -> Result<f64> {
        if (params.gamma - self.config.gamma).abs() > 0.0 {
            return Err(Error::InvalidParameter("sampler and params disagree on gamma".into()));
        }
        if rho > params.r {
            return Err(Error::InvalidParameter(format!("rho = {rho} exceeds r = {}", params.r)));
        }
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::InvalidRho(rho));
        }
        self.bulk_mass_of(&self.sample(seed)?, rho)
    }

    /// Apply `f` to `n` joint samples (pairs share lateral draws); results in
    /// index order.
    pub fn batch<T: Send>(&self, n: usize, seed: u64, f: impl Fn(&RadialSample) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
        let pairs = rng::replicas(n.div_ceil(2), |i| -> Result<Vec<T>> {
            let (a, b) = self.sample_pair(rng::derive_seed(seed, i as u64))?;
            Ok(vec![f(&a)?, f(&b)?])
        });
        let mut out = Vec::with_capacity(n);
        for p in pairs {
            out.extend(p?);
        }
        out.truncate(n);
        Ok(out)
    }
}

/// `E[e^{−γM/2} 1{e^{γM} C > t}]` for `M ~ Exponential(2/γ − γ/2)` and
/// `t >= C`: `(1 − γ²/4) C^{2/γ²} t^{−2/γ²}`.
pub fn prefactor_identity(gamma: f64, c: f64, t: f64) -> f64 {
    let p = 2.0 / (gamma * gamma);
    (1.0 - 0.25 * gamma * gamma) * c.powf(p) * t.powf(-p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RadialSampler {
        RadialSampler::new(RadialConfig { gamma: 1.0, t_max: 4.0, ds: 0.1, n_theta: 8, eps: 1e-3 }).unwrap()
    }

    #[test]
    fn max_is_deterministic_and_exponential() {
        let s = DriftSpec::new(2f64.sqrt()).unwrap();
        assert!((s.alpha - 2f64.sqrt() / 2.0).abs() < 1e-15);
        assert_eq!(sample_max(&s, 5), sample_max(&s, 5));
        assert_eq!(sample_max_batch(&s, 5, 3)[0], sample_max(&s, 5));
        let xs = sample_max_batch(&s, 1, 200_000);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((mean / 2f64.sqrt() - 1.0).abs() < 0.01);
    }

    #[test]
    fn horizon_default() {
        assert_eq!(RadialConfig::default_horizon(1.0, 100.0, 0.05), 30.0);
        assert!(RadialConfig::default_horizon(1.8, 1e8, 0.05) > 30.0);
    }

    #[test]
    fn radial_mass_checks_rho() {
        let r = small();
        let p = GmcParams::new(1.0, 0.5).unwrap();
        assert!(r.radial_bulk_mass(&p, 0.25, 3).unwrap() > 0.0);
        assert_eq!(r.radial_bulk_mass(&p, 0.25, 3).unwrap(), r.radial_bulk_mass(&p, 0.25, 3).unwrap());
        let p1 = GmcParams::new(1.0, 2.0).unwrap();
        assert!(matches!(r.radial_bulk_mass(&p1, 1.0, 3), Err(Error::InvalidRho(_))));
    }

    #[test]
    fn zero_coupling_limit_is_half_disk_area() {
        let r = RadialSampler::new(RadialConfig { gamma: 1e-6, t_max: 10.0, ds: 0.05, n_theta: 8, eps: 1e-3 }).unwrap();
        let rho: f64 = 0.25;
        let p = GmcParams::new(1e-6, 0.5).unwrap();
        let v = r.radial_bulk_mass(&p, rho, 1).unwrap();
        let area = 0.5 * std::f64::consts::PI * rho * rho;
        assert!((v / area - 1.0).abs() < 1e-3, "{v} vs {area}");
    }

    #[test]
    fn batch_is_ordered_and_reproducible() {
        let r = small();
        let a = r.batch(5, 9, |s| Ok(s.m)).unwrap();
        let b = r.batch(5, 9, |s| Ok(s.m)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 5);
    }

    #[test]
    fn prefactor_closed_form() {
        assert!((prefactor_identity(2f64.sqrt(), 1.0, 1.0) - 0.5).abs() < 1e-15);
    }
}
