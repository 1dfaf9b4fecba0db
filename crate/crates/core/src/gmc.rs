//! Bulk, boundary and localized GMC masses of grid fields.
//!
//! Masses use the exact discrete renormalization `exp(γ X_i − γ²/2 E[X_i²])`
//! so that unshifted means equal the integrated weights.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fieldsim::{BdyInterval, BulkRegion, CovFactor, FieldSample, Grid};
use crate::quad::{gl8, Rect};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmcParams {
    pub gamma: f64,
    pub r: f64,
}

impl GmcParams {
    pub fn new(gamma: f64, r: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 2.0) {
            return Err(Error::InvalidParameter(format!("gamma must lie in (0, 2), got {gamma}")));
        }
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidParameter(format!("r must be positive, got {r}")));
        }
        Ok(Self { gamma, r })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureSample {
    pub bulk_mass: f64,
    pub bdy_mass: f64,
    pub loc_bulk: Option<f64>,
    pub loc_bdy: Option<f64>,
    pub v: Option<f64>,
}

/// `∫_cell y^(-a) dx dy`; infinite for cells on the boundary when `a >= 1`.
pub fn cell_weight(rect: &Rect, a: f64) -> f64 {
    let (y0, y1) = (rect.y0, rect.y1);
    let w = rect.width();
    if a == 0.0 {
        return w * (y1 - y0);
    }
    if (a - 1.0).abs() < 1e-15 {
        return if y0 == 0.0 { f64::INFINITY } else { w * (y1 / y0).ln() };
    }
    if a > 1.0 && y0 == 0.0 {
        return f64::INFINITY;
    }
    let e = 1.0 - a;
    w * (y1.powf(e) - y0.powf(e)) / e
}

/// Weights `w_i = ∫_cell y^(-γ²/2)` for every bulk cell.
pub fn bulk_weights(grid: &Grid, gamma: f64) -> Vec<f64> {
    let a = 0.5 * gamma * gamma;
    (0..grid.n_cells()).map(|i| cell_weight(&grid.cell_rect(i), a)).collect()
}

/// Renormalized exponentials of a field.
#[derive(Debug, Clone)]
pub struct Densities {
    /// `exp(γ X_i − γ²/2 Var X_i)` per bulk cell
    pub bulk: Vec<f64>,
    /// `exp(γ/2 X_j − γ²/8 Var X_j)` per boundary segment
    pub bdy: Vec<f64>,
}

pub fn densities(values: &[f64], factor: &CovFactor, grid: &Grid, gamma: f64) -> Densities {
    let nc = grid.n_cells();
    let g2 = gamma * gamma;
    let bulk = (0..nc).map(|i| (gamma * values[i] - 0.5 * g2 * factor.diag_var[i]).exp()).collect();
    let bdy = (nc..grid.node_count())
        .map(|i| (0.5 * gamma * values[i] - 0.125 * g2 * factor.diag_var[i]).exp())
        .collect();
    Densities { bulk, bdy }
}

fn weighted_sum(weights: &[f64], dens: &[f64], idx: &[usize], gamma: f64) -> Result<f64> {
    let mut acc = 0.0;
    for &i in idx {
        let w = weights[i];
        if !w.is_finite() {
            return Err(Error::DivergentWeight { gamma });
        }
        acc += w * dens[i];
    }
    Ok(acc)
}

fn check(field: &FieldSample, factor: &CovFactor, grid: &Grid) -> Result<()> {
    if field.values.len() != grid.node_count() || factor.dim != grid.node_count() {
        return Err(Error::IndexMismatch("field, factor and grid sizes differ".into()));
    }
    Ok(())
}

/// `μ^H(region) = Σ w_i exp(γ X_i − γ²/2 Var X_i)`.
pub fn bulk_mass(field: &FieldSample, factor: &CovFactor, grid: &Grid, params: &GmcParams, region: &BulkRegion) -> Result<f64> {
    check(field, factor, grid)?;
    grid.check_region(region)?;
    let d = densities(&field.values, factor, grid, params.gamma);
    weighted_sum(&bulk_weights(grid, params.gamma), &d.bulk, &region.0, params.gamma)
}

/// `μ^∂(interval) = Σ ℓ exp(γ/2 X_j − γ²/8 Var X_j)`.
pub fn bdy_mass(field: &FieldSample, factor: &CovFactor, grid: &Grid, params: &GmcParams, interval: &BdyInterval) -> Result<f64> {
    check(field, factor, grid)?;
    grid.check_interval(interval)?;
    let d = densities(&field.values, factor, grid, params.gamma);
    Ok(interval.0.iter().map(|&j| grid.seg_len * d.bdy[j]).sum())
}

/// `∫_rect y^(-a) |z − (v, 0)|^(-b) dx dy` by adaptive dyadic subdivision
/// with tensor Gauss-Legendre panels. The point singularity is handled
/// through self-similarity of the corner square: its integral is the sum
/// over the three half-size sub-squares away from the corner, divided by
/// `1 − 2^-(2-a-b)`.
pub fn localized_cell_weight(rect: &Rect, v: f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    if rect.y0 == 0.0 && a >= 1.0 {
        return Err(Error::DivergentWeight { gamma: (2.0 * a).sqrt() });
    }
    let touches = rect.y0 == 0.0 && v >= rect.x0 && v <= rect.x1;
    if !touches {
        return Ok(adaptive(&Rect::new(rect.x0 - v, rect.x1 - v, rect.y0, rect.y1), a, b, tol, 0));
    }
    if a + b >= 2.0 {
        return Err(Error::SupercriticalWeight { gamma: (2.0 * a).sqrt() });
    }
    let h = rect.height();
    let mut total = 0.0;
    // by the reflection x -> 2v - x, the left part is a corner rectangle too
    for w in [v - rect.x0, rect.x1 - v] {
        if w > 0.0 {
            total += corner(w, h, a, b, tol);
        }
    }
    Ok(total)
}

fn corner(w: f64, h: f64, a: f64, b: f64, tol: f64) -> f64 {
    let m = w.min(h);
    let s = 2.0 - a - b;
    let unit = (adaptive(&Rect::new(0.5, 1.0, 0.0, 0.5), a, b, tol, 0)
        + adaptive(&Rect::new(0.0, 0.5, 0.5, 1.0), a, b, tol, 0)
        + adaptive(&Rect::new(0.5, 1.0, 0.5, 1.0), a, b, tol, 0))
        / (1.0 - 0.5f64.powf(s));
    let mut total = m.powf(s) * unit;
    if w > m {
        total += adaptive(&Rect::new(m, w, 0.0, h), a, b, tol, 0);
    }
    if h > m {
        total += adaptive(&Rect::new(0.0, m, m, h), a, b, tol, 0);
    }
    total
}

/// Tensor rule for `y^(-a) |z|^(-b)` on a rectangle avoiding the origin.
fn panel(r: &Rect, a: f64, b: f64) -> f64 {
    let rule = gl8();
    let mut acc = 0.0;
    if r.y0 == 0.0 && a > 0.0 {
        // y = y1 u^(1/(1-a)) absorbs y^(-a)
        let e = 1.0 / (1.0 - a);
        let scale = r.y1.powf(1.0 - a) * e;
        for (x, wx) in rule.on(r.x0, r.x1) {
            for (u, wu) in rule.on(0.0, 1.0) {
                let y = r.y1 * u.powf(e);
                acc += wx * wu * scale * x.hypot(y).powf(-b);
            }
        }
    } else {
        for (x, wx) in rule.on(r.x0, r.x1) {
            for (y, wy) in rule.on(r.y0, r.y1) {
                acc += wx * wy * y.powf(-a) * x.hypot(y).powf(-b);
            }
        }
    }
    acc
}

fn adaptive(r: &Rect, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let coarse = panel(r, a, b);
    let (xm, ym) = r.center();
    let kids = [
        Rect::new(r.x0, xm, r.y0, ym),
        Rect::new(xm, r.x1, r.y0, ym),
        Rect::new(r.x0, xm, ym, r.y1),
        Rect::new(xm, r.x1, ym, r.y1),
    ];
    let fine: f64 = kids.iter().map(|k| panel(k, a, b)).sum();
    if (fine - coarse).abs() <= tol * fine.abs() || depth >= 14 {
        return fine;
    }
    kids.iter().map(|k| adaptive(k, a, b, tol, depth + 1)).sum()
}

/// Default relative tolerance for localized weights.
pub const LOCAL_TOL: f64 = 1e-7;

/// Per-cell weights `∫_cell y^(-γ²/2) |z − v|^(-γ²)` for the given cells
/// (others are left at zero).
pub fn localized_bulk_weights(grid: &Grid, gamma: f64, v: f64, cells: &BulkRegion, tol: f64) -> Result<Vec<f64>> {
    grid.check_region(cells)?;
    let a = 0.5 * gamma * gamma;
    let b = gamma * gamma;
    let mut w = vec![0.0; grid.n_cells()];
    for &i in &cells.0 {
        w[i] = localized_cell_weight(&grid.cell_rect(i), v, a, b, tol)?;
    }
    Ok(w)
}

/// Boundary weights `∫_seg |w − v|^(-γ²/2) dw`.
#[derive(Debug, Clone)]
pub struct LocalizedBdyWeights {
    pub weights: Vec<f64>,
    /// Window `[v − ℓ/2, v + ℓ/2]` removed from the integration domain when
    /// the weight is not integrable at `v` (γ ≥ √2).
    pub excluded_window: Option<(f64, f64)>,
}

pub fn localized_bdy_weights(grid: &Grid, gamma: f64, v: f64) -> LocalizedBdyWeights {
    let c = 0.5 * gamma * gamma;
    let anti = |u: f64| {
        if u == 0.0 {
            0.0
        } else if (c - 1.0).abs() < 1e-15 {
            u.signum() * u.abs().ln()
        } else {
            u.signum() * u.abs().powf(1.0 - c) / (1.0 - c)
        }
    };
    let piece = |p: f64, q: f64| if q > p { anti(q - v) - anti(p - v) } else { 0.0 };
    let window = (c >= 1.0).then(|| (v - 0.5 * grid.seg_len, v + 0.5 * grid.seg_len));
    let weights = (0..grid.n_bdy)
        .map(|j| {
            let (a, b) = grid.segment(j);
            match window {
                None => piece(a, b),
                Some((lo, hi)) => piece(a, b.min(lo)) + piece(a.max(hi), b),
            }
        })
        .collect();
    LocalizedBdyWeights { weights, excluded_window: window }
}

/// `μ^H_v(region)`: bulk mass with the extra weight `|z − v|^(-γ²)`
/// integrated jointly with `y^(-γ²/2)` over each cell.
pub fn localized_bulk_mass(
    field: &FieldSample,
    factor: &CovFactor,
    grid: &Grid,
    params: &GmcParams,
    v: f64,
    region: &BulkRegion,
) -> Result<f64> {
    check(field, factor, grid)?;
    if v.abs() >= grid.r {
        return Err(Error::InvalidParameter(format!("|v| = {} must be below r = {}", v.abs(), grid.r)));
    }
    let w = localized_bulk_weights(grid, params.gamma, v, region, LOCAL_TOL)?;
    let d = densities(&field.values, factor, grid, params.gamma);
    weighted_sum(&w, &d.bulk, &region.0, params.gamma)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalizedBdyMass {
    pub mass: f64,
    pub excluded_window: Option<(f64, f64)>,
}

/// `μ^∂_v(interval)`.
pub fn localized_bdy_mass(
    field: &FieldSample,
    factor: &CovFactor,
    grid: &Grid,
    params: &GmcParams,
    v: f64,
    interval: &BdyInterval,
) -> Result<LocalizedBdyMass> {
    check(field, factor, grid)?;
    grid.check_interval(interval)?;
    let lw = localized_bdy_weights(grid, params.gamma, v);
    let d = densities(&field.values, factor, grid, params.gamma);
    let mass = interval.0.iter().map(|&j| lw.weights[j] * d.bdy[j]).sum();
    Ok(LocalizedBdyMass { mass, excluded_window: lw.excluded_window })
}

/// All masses of one field over `region` / `interval`, localized at `v` if
/// given.
pub fn measure_sample(
    field: &FieldSample,
    factor: &CovFactor,
    grid: &Grid,
    params: &GmcParams,
    region: &BulkRegion,
    interval: &BdyInterval,
    v: Option<f64>,
) -> Result<MeasureSample> {
    let bulk = bulk_mass(field, factor, grid, params, region)?;
    let bdy = bdy_mass(field, factor, grid, params, interval)?;
    let (loc_bulk, loc_bdy) = match v {
        Some(v) => (
            Some(localized_bulk_mass(field, factor, grid, params, v, region)?),
            Some(localized_bdy_mass(field, factor, grid, params, v, interval)?.mass),
        ),
        None => (None, None),
    };
    Ok(MeasureSample { bulk_mass: bulk, bdy_mass: bdy, loc_bulk, loc_bdy, v })
}
