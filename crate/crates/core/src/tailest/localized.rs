//! Boundary-localized importance sampling of `P[μ^H(Q_r) > t]`.
//!
//! For a boundary node `j` with midpoint `v_j`, tilting the law of the field
//! by `exp(γ/2 X_j − γ²/8 Var X_j)` shifts it by `γ/2 · Cov(·, X_j)`. Summing
//! the tilts over all segments (times `ℓ`) reproduces `μ^∂(I_r)`, so
//!
//! `P[μ^H > t] = ℓ Σ_j E[1{μ^H(X + γ/2 C_j) > t} / μ^∂(X + γ/2 C_j)]`
//!
//! exactly on the discrete field. All `j` share the same base draw `X`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fieldsim::{CovFactor, Grid};
use crate::gmc::{bulk_weights, localized_bdy_weights, localized_bulk_weights, GmcParams, LOCAL_TOL};
use crate::rng;
use crate::stats;

use super::fit::CurvePoint;

const CHUNK: usize = 256;

/// Output of [`localized_tail_estimator`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalizedRun {
    /// Importance-sampled `P[μ^H(Q_r) > t]`.
    pub curve: Vec<CurvePoint>,
    /// Number of (replica, segment) pairs whose tilted mass exceeds `t`.
    pub tilted_exceedances: Vec<usize>,
    /// Plain Monte Carlo estimate from the same base draws.
    pub plain: Vec<CurvePoint>,
    /// Untilted `μ^H(Q_r)` of every base draw.
    pub masses: Vec<f64>,
    pub n: usize,
}

fn check_sizes(grid: &Grid, factor: &CovFactor) -> Result<()> {
    if factor.dim != grid.node_count() {
        return Err(Error::IndexMismatch("factor and grid sizes differ".into()));
    }
    Ok(())
}

fn finite_weights(w: &[f64], gamma: f64) -> Result<()> {
    if w.iter().any(|x| !x.is_finite()) {
        return Err(Error::DivergentWeight { gamma });
    }
    Ok(())
}

/// Streams the `n` base fields of a run through `f(replica, values)` in
/// fixed-size chunks; partial results come back in replica order.
fn for_fields<T: Send>(factor: &CovFactor, n: usize, seed: u64, f: impl Fn(&[f64]) -> T + Sync + Send) -> Vec<T> {
    rng::replica_chunks(n, CHUNK, |start, end| {
        let mut z = vec![0.0; factor.dim];
        let mut x = vec![0.0; factor.dim];
        (start..end)
            .map(|i| {
                factor.sample_into(&mut rng::stream(seed, i as u64), &mut z, &mut x);
                f(&x)
            })
            .collect()
    })
}

/// Untilted `μ^H(Q_r)` for `n` replicas (replica `i` is
/// `sample_replica(factor, seed, i)`).
pub fn sample_bulk_masses(params: &GmcParams, grid: &Grid, factor: &CovFactor, n: usize, seed: u64) -> Result<Vec<f64>> {
    check_sizes(grid, factor)?;
    let w = bulk_weights(grid, params.gamma);
    finite_weights(&w, params.gamma)?;
    let g = params.gamma;
    let nc = grid.n_cells();
    Ok(for_fields(factor, n, seed, |x| {
        (0..nc).map(|i| w[i] * (g * x[i] - 0.5 * g * g * factor.diag_var[i]).exp()).sum()
    }))
}

/// Importance-sampled survival curve of `μ^H(Q_r)` on the thresholds `ts`,
/// localizing at every boundary midpoint with `n` shared base draws.
pub fn localized_tail_estimator(
    params: &GmcParams,
    grid: &Grid,
    factor: &CovFactor,
    ts: &[f64],
    n: usize,
    seed: u64,
) -> Result<LocalizedRun> {
    check_sizes(grid, factor)?;
    if n < 2 {
        return Err(Error::InvalidParameter("need at least two replicas".into()));
    }
    if ts.iter().any(|&t| !(t > 0.0)) || ts.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("thresholds must be positive and increasing".into()));
    }
    let g = params.gamma;
    let nc = grid.n_cells();
    let nb = grid.n_bdy;
    let w = bulk_weights(grid, g);
    finite_weights(&w, g)?;
    let l = grid.seg_len;
    // a[j][i] = w_i e^{γ²/2 C(i, j)}, b[j][k] = ℓ e^{γ²/4 C(k, j)}
    let a: Vec<Vec<f64>> = (0..nb)
        .map(|j| (0..nc).map(|i| w[i] * (0.5 * g * g * factor.cov(i, nc + j)).exp()).collect())
        .collect();
    let b: Vec<Vec<f64>> = (0..nb)
        .map(|j| (0..nb).map(|k| l * (0.25 * g * g * factor.cov(nc + k, nc + j)).exp()).collect())
        .collect();
    let nt = ts.len();

    struct Rep {
        y: Vec<f64>,
        hits: Vec<u32>,
        mass: f64,
    }
    let reps = for_fields(factor, n, seed, |x| {
        let e: Vec<f64> = (0..nc).map(|i| (g * x[i] - 0.5 * g * g * factor.diag_var[i]).exp()).collect();
        let f: Vec<f64> = (0..nb)
            .map(|k| (0.5 * g * x[nc + k] - 0.125 * g * g * factor.diag_var[nc + k]).exp())
            .collect();
        let mass: f64 = w.iter().zip(&e).map(|(p, q)| p * q).sum();
        let mut y = vec![0.0; nt];
        let mut hits = vec![0u32; nt];
        for j in 0..nb {
            let mh: f64 = a[j].iter().zip(&e).map(|(p, q)| p * q).sum();
            let mb: f64 = b[j].iter().zip(&f).map(|(p, q)| p * q).sum();
            // thresholds below mh all count
            let k = ts.partition_point(|&t| t < mh);
            for s in 0..k {
                y[s] += l / mb;
                hits[s] += 1;
            }
        }
        Rep { y, hits, mass }
    });

    let mut curve = Vec::with_capacity(nt);
    let mut tilted_exceedances = Vec::with_capacity(nt);
    for s in 0..nt {
        let ys: Vec<f64> = reps.iter().map(|r| r.y[s]).collect();
        let (m, se) = stats::mean_stderr(&ys);
        curve.push(CurvePoint::new(ts[s], m, se));
        tilted_exceedances.push(reps.iter().map(|r| r.hits[s] as usize).sum());
    }
    let masses: Vec<f64> = reps.iter().map(|r| r.mass).collect();
    let plain = super::fit::survival_curve(&masses, ts)?;
    Ok(LocalizedRun { curve, tilted_exceedances, plain, masses, n })
}

/// One point of [`locality_gap`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapPoint {
    pub t: f64,
    /// `E[1{μ^H_v(Q_r) > t} / μ^∂_v(I_r)]`
    pub full: f64,
    /// `E[1{μ^H_v(Q(v, ρ)) > t} / μ^∂_v(I(v, ρ))]`
    pub local: f64,
    pub gap: f64,
    pub stderr_gap: f64,
    pub stderr_local: f64,
}

/// Localized masses at `v` over the whole cube and over the `ρ`-neighbourhood
/// of `v`, for `n` replicas: `(full bulk, full bdy, local bulk, local bdy)`.
pub fn localized_mass_pairs(
    params: &GmcParams,
    grid: &Grid,
    factor: &CovFactor,
    v: f64,
    rho: f64,
    n: usize,
    seed: u64,
) -> Result<Vec<[f64; 4]>> {
    check_sizes(grid, factor)?;
    let r = grid.r;
    if !(2.0 * rho < (r - v).min(v + r)) {
        return Err(Error::GeometryViolation(format!("2ρ = {} must be below min(r − v, v + r) = {}", 2.0 * rho, (r - v).min(v + r))));
    }
    let g = params.gamma;
    let nc = grid.n_cells();
    let wb = localized_bulk_weights(grid, g, v, &grid.all_cells(), LOCAL_TOL)?;
    finite_weights(&wb, g)?;
    let wd = localized_bdy_weights(grid, g, v).weights;
    let near = grid.half_disk(v, rho);
    let near_i = grid.interval_around(v, rho);
    let mut in_near = vec![false; nc];
    near.0.iter().for_each(|&i| in_near[i] = true);
    let mut in_near_i = vec![false; grid.n_bdy];
    near_i.0.iter().for_each(|&j| in_near_i[j] = true);
    Ok(for_fields(factor, n, seed, |x| {
        let mut out = [0.0; 4];
        for i in 0..nc {
            let m = wb[i] * (g * x[i] - 0.5 * g * g * factor.diag_var[i]).exp();
            out[0] += m;
            if in_near[i] {
                out[2] += m;
            }
        }
        for k in 0..grid.n_bdy {
            let m = wd[k] * (0.5 * g * x[nc + k] - 0.125 * g * g * factor.diag_var[nc + k]).exp();
            out[1] += m;
            if in_near_i[k] {
                out[3] += m;
            }
        }
        out
    }))
}

/// Gap between the whole-cube and the local term of the localized tail
/// integrand at `v`, on paired draws.
pub fn locality_gap_from(pairs: &[[f64; 4]], ts: &[f64]) -> Vec<GapPoint> {
    ts.iter()
        .map(|&t| {
            let full: Vec<f64> = pairs.iter().map(|p| if p[0] > t { 1.0 / p[1] } else { 0.0 }).collect();
            let local: Vec<f64> = pairs.iter().map(|p| if p[2] > t { 1.0 / p[3] } else { 0.0 }).collect();
            let diff: Vec<f64> = full.iter().zip(&local).map(|(a, b)| a - b).collect();
            let (f, _) = stats::mean_stderr(&full);
            let (lo, se_l) = stats::mean_stderr(&local);
            let (d, se) = stats::mean_stderr(&diff);
            GapPoint { t, full: f, local: lo, gap: d, stderr_gap: se, stderr_local: se_l }
        })
        .collect()
}

pub fn locality_gap(
    params: &GmcParams,
    grid: &Grid,
    factor: &CovFactor,
    v: f64,
    rho: f64,
    ts: &[f64],
    n: usize,
    seed: u64,
) -> Result<Vec<GapPoint>> {
    let pairs = localized_mass_pairs(params, grid, factor, v, rho, n, seed)?;
    Ok(locality_gap_from(&pairs, ts))
}
