//! Lateral noise `Y^H` on the cylinder `s ∈ [−T, T]`, `θ ∈ [0, π]`.
//!
//! Each `s`-slice carries `n_theta` interior angular cells plus the two
//! boundary rays `θ = 0` and `θ = π` (node 0 and node `n_theta + 1`). The
//! field is stationary in `s`, so its block-Toeplitz covariance is embedded
//! in a block-circulant one and sampled by FFT: one complex draw gives two
//! independent real fields.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use rustfft::num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::kernels::lateral_lag;
use crate::quad::{gl16, gl4, gl8, log_avg_rects, log_avg_seg_rect, log_avg_segments, power_singular, Rect};
use crate::rng;

/// `ln |e^{Δ} − 1| − ln |Δ|` for `Δ = dx + i dy ≠ 0`.
fn ln_expm1_ratio(dx: f64, dy: f64) -> f64 {
    let half = (0.5 * dy).sin();
    let re = dx.exp_m1() * dy.cos() - 2.0 * half * half;
    let im = dx.exp() * dy.sin();
    re.hypot(im).ln() - dx.hypot(dy).ln()
}

/// `ln|z − w|` averaged over two boxes in the `(s, θ)` plane; a box of zero
/// height is a segment at fixed angle.
fn log_avg_boxes(a: &Rect, b: &Rect) -> f64 {
    match (a.height() == 0.0, b.height() == 0.0) {
        (false, false) => log_avg_rects(a, b),
        (true, false) => log_avg_seg_rect(a.x0, a.x1, a.y0, b),
        (false, true) => log_avg_seg_rect(b.x0, b.x1, b.y0, a),
        (true, true) if a.y0 == b.y0 => log_avg_segments(a.x0, a.x1, b.x0, b.x1),
        (true, true) => {
            let rule = gl16();
            let dy = a.y0 - b.y0;
            let mut acc = 0.0;
            for (x, wx) in rule.on(a.x0, a.x1) {
                for (u, wu) in rule.on(b.x0, b.x1) {
                    acc += wx * wu * (x - u).hypot(dy).ln();
                }
            }
            acc / (a.width() * b.width())
        }
    }
}

/// Nodes of an angular range: Gauss-Legendre on a cell, the point itself
/// on a ray. Weights sum to one.
fn theta_nodes(lo: f64, hi: f64) -> Vec<(f64, f64)> {
    if hi == lo {
        vec![(lo, 1.0)]
    } else {
        gl8().on(lo, hi).map(|(t, w)| (t, w / (hi - lo))).collect()
    }
}

/// Covariance of the averages of the lateral field over node `a` in the
/// slice `[0, ds]` and node `b` in the slice `lag` steps later. Each node
/// is an angular range `[lo, hi]` (`lo == hi` on a ray). The direct and
/// mirrored logarithms are averaged in closed form, the smooth remainder
/// with Gauss-Legendre in the lag `u = s − s'` (triangle weight).
fn pair_cov(ds: f64, lag: usize, a: (f64, f64), b: (f64, f64)) -> f64 {
    let shift = lag as f64 * ds;
    let ra = Rect::new(0.0, ds, a.0, a.1);
    let rb = Rect::new(shift, shift + ds, b.0, b.1);
    // the mirrored singularity sits at θ + θ' = 0 or 2π
    let k = if a.0 + a.1 + b.0 + b.1 < 2.0 * PI { 0.0 } else { 1.0 };
    let rm = Rect::new(shift, shift + ds, 2.0 * PI * k - b.1, 2.0 * PI * k - b.0);
    let singular = -log_avg_boxes(&ra, &rb) - log_avg_boxes(&ra, &rm);
    let ta = theta_nodes(a.0, a.1);
    let tb = theta_nodes(b.0, b.1);
    let rule = gl8();
    let mut acc = 0.0;
    for (lo, hi) in [(-ds, 0.0), (0.0, ds)] {
        for (u, wu) in rule.on(lo, hi) {
            let d = u - shift;
            let tri = (ds - u.abs()) / (ds * ds);
            for &(t1, w1) in &ta {
                for &(t2, w2) in &tb {
                    let rem = 2.0 * d.max(0.0)
                        - ln_expm1_ratio(d, t2 - t1)
                        - ln_expm1_ratio(d, 2.0 * PI * k - t1 - t2);
                    acc += wu * tri * w1 * w2 * rem;
                }
            }
        }
    }
    singular + acc
}

/// Cell average of the lateral kernel for well-separated nodes, where it is
/// smooth: tensor Gauss-Legendre on the lag and both angular ranges.
fn far_cov(ds: f64, lag: usize, a: (f64, f64), b: (f64, f64)) -> Result<f64> {
    let rule = gl4();
    let nodes = |(lo, hi): (f64, f64)| -> Vec<(f64, f64)> {
        if hi == lo {
            vec![(lo, 1.0)]
        } else {
            rule.on(lo, hi).map(|(t, w)| (t, w / (hi - lo))).collect()
        }
    };
    let (ta, tb) = (nodes(a), nodes(b));
    let shift = lag as f64 * ds;
    let mut acc = 0.0;
    for (lo, hi) in [(-ds, 0.0), (0.0, ds)] {
        for (u, wu) in rule.on(lo, hi) {
            let tri = (ds - u.abs()) / (ds * ds);
            for &(t1, w1) in &ta {
                for &(t2, w2) in &tb {
                    acc += wu * tri * w1 * w2 * lateral_lag(u - shift, t1, t2)?;
                }
            }
        }
    }
    Ok(acc)
}

/// Covariance blocks `c(lag)[a][b]` (row-major `m × m`) for
/// `lag = 0..n_lags`: covariances of node averages over one slice. The
/// angular mean of the field vanishes, so the blocks are nearly singular
/// and every entry must be a genuine cell average, not a point value.
fn lag_blocks(ds: f64, n_theta: usize, n_lags: usize) -> Result<Vec<f64>> {
    let m = n_theta + 2;
    let dtheta = PI / n_theta as f64;
    let range = |a: usize| -> (f64, f64) {
        if a == 0 {
            (0.0, 0.0)
        } else if a == m - 1 {
            (PI, PI)
        } else {
            ((a - 1) as f64 * dtheta, a as f64 * dtheta)
        }
    };
    let h = ds.max(dtheta);
    let rule = gl4();
    let xs: Vec<(f64, f64)> = rule.on(0.0, dtheta).map(|(x, w)| (x, w / dtheta)).collect();
    let nq = xs.len();
    let blocks: Vec<Vec<f64>> = (0..n_lags)
        .into_par_iter()
        .map(|lag| -> Result<Vec<f64>> {
            let shift = lag as f64 * ds;
            // interior far pairs only depend on b − a and a + b: tabulate the
            // lag-averaged ln|e^{d + iy} − 1| over the angular node offsets
            let us: Vec<(f64, f64)> = [(-ds, 0.0), (0.0, ds)]
                .into_iter()
                .flat_map(|(lo, hi)| rule.on(lo, hi).map(move |(u, w)| (u - shift, w * (ds - u.abs()) / (ds * ds))))
                .collect();
            let drift: f64 = us.iter().map(|&(d, w)| 2.0 * w * d.max(0.0)).sum();
            let tab = |y: f64| -> f64 {
                us.iter()
                    .map(|&(d, w)| {
                        let half = (0.5 * y).sin();
                        let re = d.exp_m1() * y.cos() - 2.0 * half * half;
                        w * re.hypot(d.exp() * y.sin()).ln()
                    })
                    .sum()
            };
            let mut qd = vec![0.0; (2 * n_theta - 1) * nq * nq];
            let mut qs = vec![0.0; (2 * n_theta - 1) * nq * nq];
            for k in 0..2 * n_theta - 1 {
                for j in 0..nq {
                    for l in 0..nq {
                        let i = (k * nq + j) * nq + l;
                        qd[i] = tab((k as f64 - (n_theta - 1) as f64) * dtheta + xs[l].0 - xs[j].0);
                        qs[i] = tab(k as f64 * dtheta + xs[j].0 + xs[l].0);
                    }
                }
            }
            let ds_gap = (lag as f64 - 1.0).max(0.0) * ds;
            let mut c = vec![0.0; m * m];
            for a in 0..m {
                for b in a..m {
                    let (ra, rb) = (range(a), range(b));
                    let direct = (rb.0 - ra.1).max(ra.0 - rb.1).max(0.0);
                    let mirror = (ra.0 + rb.0).min(2.0 * PI - ra.1 - rb.1);
                    let v = if ds_gap.hypot(direct.min(mirror)) <= NEAR * h {
                        pair_cov(ds, lag, ra, rb)
                    } else if a == 0 || b == m - 1 {
                        far_cov(ds, lag, ra, rb)?
                    } else {
                        let kd = b - a + n_theta - 1;
                        let ks = a + b - 2;
                        let mut acc = drift;
                        for j in 0..nq {
                            for l in 0..nq {
                                let w = xs[j].1 * xs[l].1;
                                acc -= w * (qd[(kd * nq + j) * nq + l] + qs[(ks * nq + j) * nq + l]);
                            }
                        }
                        acc
                    };
                    c[a * m + b] = v;
                    c[b * m + a] = v;
                }
            }
            Ok(c)
        })
        .collect::<Result<_>>()?;
    Ok(blocks.concat())
}

/// `∫_lo^hi (sin θ)^(-a) dθ`.
fn sin_weight(lo: f64, hi: f64, a: f64) -> f64 {
    let rule = gl16();
    if lo <= 0.0 {
        power_singular(a, hi, rule, |t| if t == 0.0 { 1.0 } else { (t / t.sin()).powf(a) })
    } else if hi >= PI {
        sin_weight(0.0, PI - lo, a)
    } else {
        rule.integrate(lo, hi, |t| t.sin().powf(-a))
    }
}

/// Largest tolerated clipped negative spectral mass.
const CLIP_LIMIT: f64 = 1e-6;

/// Node pairs closer than `NEAR` cells use exact cell averages.
const NEAR: f64 = 4.0;

/// Precomputed spectral factor of the lateral field.
#[derive(Debug, Clone)]
pub struct LateralFactor {
    pub t_max: f64,
    pub ds: f64,
    pub n_theta: usize,
    /// Slices on `[−T, T]`.
    pub n_slices: usize,
    /// Circulant period in slices.
    pub n_embed: usize,
    /// Nodes per slice (`n_theta + 2`).
    pub m: usize,
    /// Angle of each node in a slice.
    pub thetas: Vec<f64>,
    /// Realized variance of each node.
    pub var: Vec<f64>,
    /// Negative spectral mass clipped away, relative to the total.
    pub clipped: f64,
    /// `factors[k]` is `V_k diag(√λ⁺)` (column-major m×m), `k = 0..=n_embed/2`.
    factors: Vec<Vec<f64>>,
}

/// One realization of the lateral field with its densities.
#[derive(Debug, Clone, PartialEq)]
pub struct LateralSample {
    /// Row-major `n_slices × m`.
    pub values: Vec<f64>,
    pub zh: Vec<f64>,
    pub zbdy: Vec<f64>,
}

impl LateralFactor {
    pub fn new(t_max: f64, ds: f64, n_theta: usize) -> Result<Self> {
        if !(t_max > 0.0 && ds > 0.0) || n_theta == 0 {
            return Err(Error::InvalidParameter(format!("bad lateral grid T={t_max} ds={ds} n_theta={n_theta}")));
        }
        let half = (t_max / ds).round() as usize;
        if half == 0 || ((half as f64) * ds - t_max).abs() > 1e-9 * t_max {
            return Err(Error::InvalidParameter(format!("T = {t_max} must be a multiple of ds = {ds}")));
        }
        let n_slices = 2 * half;
        let n_embed = 2 * n_slices;
        let m = n_theta + 2;
        let dtheta = PI / n_theta as f64;
        let mut thetas = vec![0.0; m];
        for a in 0..n_theta {
            thetas[a + 1] = (a as f64 + 0.5) * dtheta;
        }
        thetas[m - 1] = PI;

        let n_lags = n_embed / 2 + 1;
        let c = lag_blocks(ds, n_theta, n_lags)?;

        // Λ_k[a][b] = Σ_ℓ c(min(ℓ, n − ℓ))[a][b] cos(2π k ℓ / n)
        let mut planner = FftPlanner::<f64>::new();
        let fft = planner.plan_fft_forward(n_embed);
        let mut lambda = vec![0.0; n_lags * m * m];
        let mut buf = vec![Complex64::new(0.0, 0.0); n_embed];
        for a in 0..m {
            for b in a..m {
                for (l, slot) in buf.iter_mut().enumerate() {
                    let lag = l.min(n_embed - l);
                    *slot = Complex64::new(c[(lag * m + a) * m + b], 0.0);
                }
                fft.process(&mut buf);
                for k in 0..n_lags {
                    lambda[(k * m + a) * m + b] = buf[k].re;
                    lambda[(k * m + b) * m + a] = buf[k].re;
                }
            }
        }

        let mut factors = Vec::with_capacity(n_lags);
        let mut var = vec![0.0; m];
        let mut neg = 0.0;
        let mut pos = 0.0;
        for k in 0..n_lags {
            let block = DMatrix::from_row_slice(m, m, &lambda[k * m * m..(k + 1) * m * m]);
            let eig = SymmetricEigen::new(block);
            let mult = if k == 0 || k == n_embed / 2 { 1.0 } else { 2.0 };
            let mut f = vec![0.0; m * m];
            for j in 0..m {
                let l = eig.eigenvalues[j];
                if l < 0.0 {
                    neg += -l * mult;
                    continue;
                }
                pos += l * mult;
                let s = l.sqrt();
                for i in 0..m {
                    let v = eig.eigenvectors[(i, j)];
                    f[j * m + i] = v * s;
                    var[i] += mult * l * v * v;
                }
            }
            factors.push(f);
        }
        for v in var.iter_mut() {
            *v /= n_embed as f64;
        }
        let clipped = neg / pos;
        if clipped > CLIP_LIMIT {
            return Err(Error::NotPositiveDefinite { jitter: clipped });
        }
        Ok(Self { t_max, ds, n_theta, n_slices, n_embed, m, thetas, var, clipped, factors })
    }

    /// `∫ (sin θ)^(-γ²/2)` over each interior angular cell.
    pub fn sin_weights(&self, gamma: f64) -> Result<Vec<f64>> {
        let a = 0.5 * gamma * gamma;
        if a >= 1.0 {
            return Err(Error::DivergentWeight { gamma });
        }
        let d = PI / self.n_theta as f64;
        Ok((0..self.n_theta).map(|i| sin_weight(i as f64 * d, (i + 1) as f64 * d, a)).collect())
    }

    /// Two independent realizations from one complex spectral draw.
    pub fn sample_pair_with(&self, g: &mut impl rand::Rng, gamma: f64) -> Result<(LateralSample, LateralSample)> {
        let m = self.m;
        let n = self.n_embed;
        let mut spec = vec![Complex64::new(0.0, 0.0); m * n];
        let mut xr = vec![0.0; m];
        let mut xi = vec![0.0; m];
        for k in 0..n {
            let f = &self.factors[k.min(n - k)];
            rng::fill_normals(g, &mut xr);
            rng::fill_normals(g, &mut xi);
            for j in 0..m {
                let (a, b) = (xr[j], xi[j]);
                let col = &f[j * m..(j + 1) * m];
                for i in 0..m {
                    spec[i * n + k].re += col[i] * a;
                    spec[i * n + k].im += col[i] * b;
                }
            }
        }
        let mut planner = FftPlanner::<f64>::new();
        let ifft = planner.plan_fft_inverse(n);
        let norm = 1.0 / (n as f64).sqrt();
        let mut v1 = vec![0.0; self.n_slices * m];
        let mut v2 = vec![0.0; self.n_slices * m];
        for i in 0..m {
            let row = &mut spec[i * n..(i + 1) * n];
            ifft.process(row);
            for s in 0..self.n_slices {
                v1[s * m + i] = row[s].re * norm;
                v2[s * m + i] = row[s].im * norm;
            }
        }
        let w = self.sin_weights(gamma)?;
        Ok((self.densities(v1, &w, gamma), self.densities(v2, &w, gamma)))
    }

    pub fn sample_pair(&self, seed: u64, gamma: f64) -> Result<(LateralSample, LateralSample)> {
        self.sample_pair_with(&mut rng::stream(seed, 0), gamma)
    }

    /// `sample_lateral`: one realization for `seed`.
    pub fn sample(&self, seed: u64, gamma: f64) -> Result<LateralSample> {
        Ok(self.sample_pair(seed, gamma)?.0)
    }

    fn densities(&self, values: Vec<f64>, w: &[f64], gamma: f64) -> LateralSample {
        let m = self.m;
        let g2 = gamma * gamma;
        let mut zh = vec![0.0; self.n_slices];
        let mut zbdy = vec![0.0; self.n_slices];
        for s in 0..self.n_slices {
            let row = &values[s * m..(s + 1) * m];
            let mut acc = 0.0;
            for a in 1..=self.n_theta {
                acc += w[a - 1] * (gamma * row[a] - 0.5 * g2 * self.var[a]).exp();
            }
            zh[s] = acc;
            zbdy[s] = (0.5 * gamma * row[0] - 0.125 * g2 * self.var[0]).exp()
                + (0.5 * gamma * row[m - 1] - 0.125 * g2 * self.var[m - 1]).exp();
        }
        LateralSample { values, zh, zbdy }
    }

    /// Exact `E[Z^H_s]`.
    pub fn zh_mean(&self, gamma: f64) -> Result<f64> {
        Ok(self.sin_weights(gamma)?.iter().sum())
    }

    /// Covariance of two nodes at slice lag `lag` as realized by the
    /// embedding (after clipping).
    pub fn realized_cov(&self, lag: usize, a: usize, b: usize) -> f64 {
        let m = self.m;
        let n = self.n_embed;
        let mut acc = 0.0;
        for k in 0..n {
            let f = &self.factors[k.min(n - k)];
            let mut lab = 0.0;
            for j in 0..m {
                lab += f[j * m + a] * f[j * m + b];
            }
            acc += lab * (2.0 * PI * (k * lag) as f64 / n as f64).cos();
        }
        acc / n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sin_weights_sum_to_beta_integral() {
        let f = LateralFactor::new(1.0, 0.1, 16).unwrap();
        // ∫_0^π sin^{-1/2} = B(1/2, 1/4) = Γ(1/2)Γ(1/4)/Γ(3/4)
        let exact = 5.244115108584239;
        assert!((f.zh_mean(1.0).unwrap() - exact).abs() < 1e-9);
        assert!((f.zh_mean(0.5).unwrap() - 3.45026205860877).abs() < 1e-6);
        assert!(matches!(f.sin_weights(1.5), Err(Error::DivergentWeight { .. })));
    }

    #[test]
    fn interior_diagonal_matches_brute_force() {
        let ds = 0.1;
        let (lo, hi) = (0.3, 0.4);
        let n = 24;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n + 1 {
                    for l in 0..n + 1 {
                        let s1 = ds * (i as f64 + 0.5) / n as f64;
                        let t1 = lo + (hi - lo) * (j as f64 + 0.5) / n as f64;
                        let s2 = ds * (k as f64 + 0.5) / (n + 1) as f64;
                        let t2 = lo + (hi - lo) * (l as f64 + 0.5) / (n + 1) as f64;
                        acc += lateral_lag(s1 - s2, t1, t2).unwrap();
                    }
                }
            }
        }
        let brute = acc / (n * n * (n + 1) * (n + 1)) as f64;
        assert!((pair_cov(ds, 0, (lo, hi), (lo, hi)) - brute).abs() < 5e-3);
        // the end cells feel the mirror singularity
        let (lo, hi) = (PI - 0.1, PI);
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n + 1 {
                    for l in 0..n + 1 {
                        let s1 = ds * (i as f64 + 0.5) / n as f64;
                        let t1 = lo + (hi - lo) * (j as f64 + 0.5) / n as f64;
                        let s2 = ds * (k as f64 + 0.5) / (n + 1) as f64;
                        let t2 = lo + (hi - lo) * (l as f64 + 0.5) / (n + 1) as f64;
                        acc += lateral_lag(s1 - s2, t1, t2).unwrap();
                    }
                }
            }
        }
        let brute = acc / (n * n * (n + 1) * (n + 1)) as f64;
        assert!((pair_cov(ds, 0, (lo, hi), (lo, hi)) - brute).abs() < 5e-3, "{} {}", pair_cov(ds, 0, (lo, hi), (lo, hi)), brute);
    }

    #[test]
    fn embedding_reproduces_covariance() {
        let f = LateralFactor::new(2.0, 0.1, 8).unwrap();
        assert!(f.clipped < 1e-6, "clipped {}", f.clipped);
        let c = lag_blocks(0.1, 8, f.n_slices).unwrap();
        let m = f.m;
        for (lag, a, b) in [(0, 0, 0), (1, 0, 0), (3, 2, 5), (0, 1, 4), (7, 9, 0), (0, 4, 4)] {
            let want = c[(lag * m + a) * m + b];
            assert!((f.realized_cov(lag, a, b) - want).abs() < 1e-6 * (1.0 + want.abs()));
        }
        // distant entries are close to point values
        let point = lateral_lag(0.7, f.thetas[2], f.thetas[5]).unwrap();
        assert!((c[(7 * m + 2) * m + 5] - point).abs() < 1e-2);
    }

    #[test]
    fn cell_averages_match_brute_force() {
        // adjacent interior cells, a ray against its neighbour cell, lag one
        let ds = 0.1;
        let cases = [(0, (0.2, 0.3), (0.3, 0.4)), (0, (0.0, 0.0), (0.0, 0.1)), (1, (0.1, 0.2), (0.1, 0.2)), (2, (PI, PI), (PI - 0.1, PI))];
        for (lag, a, b) in cases {
            let n = 30;
            let pts = |(lo, hi): (f64, f64), k: usize, j: usize| if hi == lo { lo } else { lo + (hi - lo) * (j as f64 + 0.5) / k as f64 };
            let (na, nb) = (if a.0 == a.1 { 1 } else { n }, if b.0 == b.1 { 1 } else { n + 1 });
            let mut acc = 0.0;
            for i in 0..n {
                let s1 = ds * (i as f64 + 0.5) / n as f64;
                for k in 0..n + 1 {
                    let s2 = ds * (lag as f64 + (k as f64 + 0.5) / (n + 1) as f64);
                    for j in 0..na {
                        for l in 0..nb {
                            acc += lateral_lag(s1 - s2, pts(a, na, j), pts(b, nb, l)).unwrap();
                        }
                    }
                }
            }
            let brute = acc / (n * (n + 1) * na * nb) as f64;
            let exact = pair_cov(ds, lag, a, b);
            assert!((exact - brute).abs() < 1e-2, "{lag} {a:?} {b:?}: {exact} vs {brute}");
        }
    }

    #[test]
    fn tabulated_far_entries_match_direct_average() {
        let n = 16;
        let m = n + 2;
        let d = PI / n as f64;
        let c = lag_blocks(0.1, n, 9).unwrap();
        for (lag, a, b) in [(8, 1, 1), (0, 2, 12), (6, 3, 9), (8, 16, 16)] {
            let want = far_cov(0.1, lag, ((a - 1) as f64 * d, a as f64 * d), ((b - 1) as f64 * d, b as f64 * d)).unwrap();
            assert!((c[(lag * m + a) * m + b] - want).abs() < 1e-10, "{lag} {a} {b}");
        }
    }

    #[test]
    fn angular_mean_has_no_variance() {
        let n = 16;
        let c = lag_blocks(0.1, n, 3).unwrap();
        let m = n + 2;
        for lag in 0..3 {
            for a in 0..m {
                let row: f64 = (1..m - 1).map(|b| c[(lag * m + a) * m + b]).sum();
                assert!(row.abs() < 1e-8, "lag {lag} node {a}: {row}");
            }
        }
    }

    #[test]
    fn pair_is_reproducible() {
        let f = LateralFactor::new(1.0, 0.1, 8).unwrap();
        let a = f.sample_pair(4, 1.0).unwrap();
        let b = f.sample_pair(4, 1.0).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.0.values, a.1.values);
        assert!(a.0.zh.iter().chain(&a.0.zbdy).all(|&z| z > 0.0));
    }
}
