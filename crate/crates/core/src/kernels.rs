//! Covariance kernels on the closed upper half-plane.
//!
//! Points are `z = x + iy` with `y >= 0`. All log-kernels reject their
//! diagonal; cell-averaged diagonals are the grid builder's business.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfPlanePoint {
    pub x: f64,
    pub y: f64,
}

impl HalfPlanePoint {
    pub fn new(x: f64, y: f64) -> Result<Self> {
        if y >= 0.0 && x.is_finite() && y.is_finite() {
            Ok(Self { x, y })
        } else {
            Err(Error::OutOfDomain(y))
        }
    }

    /// Point on the real axis.
    pub fn boundary(x: f64) -> Self {
        Self { x, y: 0.0 }
    }

    /// Polar point `e^{-t} e^{iθ}`.
    pub fn polar(t: f64, theta: f64) -> Self {
        let r = (-t).exp();
        Self { x: r * theta.cos(), y: (r * theta.sin()).max(0.0) }
    }

    pub fn is_boundary(&self) -> bool {
        self.y == 0.0
    }

    pub fn dist(&self, w: &HalfPlanePoint) -> f64 {
        (self.x - w.x).hypot(self.y - w.y)
    }

    /// `|z − w̄|`
    pub fn dist_conj(&self, w: &HalfPlanePoint) -> f64 {
        (self.x - w.x).hypot(self.y + w.y)
    }

    pub fn modulus(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

type GFn = dyn Fn(HalfPlanePoint, HalfPlanePoint) -> f64 + Send + Sync;

/// Smooth symmetric correction `g(z, w)` added to the exact-scaling kernel.
#[derive(Clone)]
pub struct Perturbation {
    g: Arc<GFn>,
    label: String,
}

impl Perturbation {
    /// Wrap `g`. Symmetry is probed on a fixed set of points.
    pub fn new(
        label: impl Into<String>,
        g: impl Fn(HalfPlanePoint, HalfPlanePoint) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let p = Self { g: Arc::new(g), label: label.into() };
        let probes = [(-0.7, 0.3), (0.2, 0.0), (0.9, 1.4), (-0.1, 2.2), (0.45, 0.05)];
        for a in probes {
            for b in probes {
                let z = HalfPlanePoint { x: a.0, y: a.1 };
                let w = HalfPlanePoint { x: b.0, y: b.1 };
                let (u, v) = (p.eval(z, w), p.eval(w, z));
                if (u - v).abs() > 1e-12 * (1.0 + u.abs()) {
                    return Err(Error::InvalidParameter(format!("perturbation {} is not symmetric", p.label)));
                }
            }
        }
        Ok(p)
    }

    /// `g ≡ c`.
    pub fn constant(c: f64) -> Self {
        Self { g: Arc::new(move |_, _| c), label: format!("const({c})") }
    }

    pub fn eval(&self, z: HalfPlanePoint, w: HalfPlanePoint) -> f64 {
        (self.g)(z, w)
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl fmt::Debug for Perturbation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Perturbation").field("label", &self.label).finish()
    }
}

/// Which covariance kernel.
#[derive(Debug, Clone)]
pub enum KernelSpec {
    /// `K_C(z, w) = −ln |z − w||z − w̄|`
    ExactScalingNeumann,
    /// `K_D(z, w) = −ln (|z − w| / |z̄ − w|)`
    DirichletPart,
    /// `K_R(z, w) = −2 ln |z̄ − w|`, equal to `−2 ln|x − y|` on the boundary
    BoundaryRestriction,
    /// `K_C(z, w) + 2 ln max(|z|, |w|)`: the lateral covariance read in
    /// half-plane coordinates `z = e^{-t} e^{iθ}`
    Lateral,
    /// `K_C + g`
    Perturbed(Perturbation),
}

impl KernelSpec {
    pub fn name(&self) -> String {
        match self {
            KernelSpec::ExactScalingNeumann => "exact-scaling-neumann".into(),
            KernelSpec::DirichletPart => "dirichlet-part".into(),
            KernelSpec::BoundaryRestriction => "boundary-restriction".into(),
            KernelSpec::Lateral => "lateral".into(),
            KernelSpec::Perturbed(p) => format!("perturbed[{}]", p.label()),
        }
    }

    pub fn eval(&self, z: HalfPlanePoint, w: HalfPlanePoint) -> Result<f64> {
        match self {
            KernelSpec::ExactScalingNeumann => eval_neumann(z, w),
            KernelSpec::DirichletPart => {
                let d = z.dist(&w);
                if d == 0.0 {
                    return Err(Error::DiagonalSingularity);
                }
                Ok(-(d / z.dist_conj(&w)).ln())
            }
            KernelSpec::BoundaryRestriction => {
                let d = z.dist_conj(&w);
                if d == 0.0 {
                    return Err(Error::DiagonalSingularity);
                }
                Ok(-2.0 * d.ln())
            }
            KernelSpec::Lateral => {
                let k = eval_neumann(z, w)?;
                Ok(k + 2.0 * z.modulus().max(w.modulus()).ln())
            }
            KernelSpec::Perturbed(g) => eval_perturbed(z, w, g),
        }
    }

    /// The perturbation, if any.
    pub fn perturbation(&self) -> Option<&Perturbation> {
        match self {
            KernelSpec::Perturbed(g) => Some(g),
            _ => None,
        }
    }
}

/// `K_C(z, w) = −ln(|z − w| · |z − w̄|)`.
pub fn eval_neumann(z: HalfPlanePoint, w: HalfPlanePoint) -> Result<f64> {
    let d = z.dist(&w);
    if d == 0.0 {
        return Err(Error::DiagonalSingularity);
    }
    Ok(-(d.ln() + z.dist_conj(&w).ln()))
}

/// `−2 ln |x − y|`.
pub fn eval_boundary(x: f64, y: f64) -> Result<f64> {
    if x == y {
        return Err(Error::DiagonalSingularity);
    }
    Ok(-2.0 * (x - y).abs().ln())
}

/// `ln |e^{Δ} − 1|` for `Δ = dx + i dy`, accurate for small `Δ`.
fn ln_abs_expm1(dx: f64, dy: f64) -> f64 {
    let half = (0.5 * dy).sin();
    let re = dx.exp_m1() * dy.cos() - 2.0 * half * half;
    let im = dx.exp() * dy.sin();
    re.hypot(im).ln()
}

/// Lateral covariance between `e^{-t} e^{iθ}` and `e^{-t2} e^{iθ2}`:
/// `ln[(e^{-t} ∨ e^{-t2})² / (|a − b| |a − b̄|)]`.
pub fn eval_lateral(t: f64, theta: f64, t2: f64, theta2: f64) -> Result<f64> {
    lateral_lag(t - t2, theta, theta2)
}

/// Lateral covariance as a function of the lag `d = t − t2`.
pub fn lateral_lag(d: f64, theta: f64, theta2: f64) -> Result<f64> {
    if d == 0.0 && theta == theta2 {
        return Err(Error::DiagonalSingularity);
    }
    let v = 2.0 * d.max(0.0) - ln_abs_expm1(d, theta2 - theta) - ln_abs_expm1(d, -(theta2 + theta));
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::DiagonalSingularity)
    }
}

/// Covariance `2 min(s, t)` of the unnormalized semicircle average
/// `A_t = (1/π) ∫_0^π X(e^{-t} e^{iθ}) dθ`.
pub fn semicircle_avg_cov(s: f64, t: f64) -> f64 {
    debug_assert!(s >= 0.0 && t >= 0.0);
    2.0 * s.min(t)
}

/// `(1/π²) ∫_0^π ∫_0^π f(θ, φ) dθ dφ` with `n` midpoint nodes in `φ` and the
/// outer nodes shifted by `±h/6`. When `f` has the log singularity of
/// `K_C` on a common circle, the inner nodes together with their mirror
/// images form a uniform grid on the full circle, and the `h/6` offset makes
/// the singular contribution vanish exactly (`2 sin(π/6) = 1`).
pub fn semicircle_double_average(n: usize, mut f: impl FnMut(f64, f64) -> f64) -> f64 {
    let h = PI / n as f64;
    let mut acc = 0.0;
    for i in 0..n {
        for off in [1.0 / 6.0, -1.0 / 6.0] {
            let theta = (i as f64 + 0.5 + off) * h;
            let mut inner = 0.0;
            for j in 0..n {
                inner += f(theta, (j as f64 + 0.5) * h);
            }
            acc += 0.5 * inner;
        }
    }
    acc * h * h / (PI * PI)
}

fn semicircle_neumann(s: f64, t: f64, n: usize) -> Result<f64> {
    let mut err = None;
    let v = semicircle_double_average(n, |a, b| {
        eval_neumann(HalfPlanePoint::polar(s, a), HalfPlanePoint::polar(t, b)).unwrap_or_else(|e| {
            err = Some(e);
            0.0
        })
    });
    match err {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

/// Double average of `K_C` over the semicircles of radii `e^{-s}`, `e^{-t}`.
/// Fails with `QuadratureUnstable` if the `n` and `n/2` rules differ by more
/// than `tol`.
pub fn quadrature_cov(s: f64, t: f64, n_nodes: usize, tol: f64) -> Result<f64> {
    if n_nodes < 2 || n_nodes % 2 != 0 {
        return Err(Error::InvalidParameter(format!("n_nodes must be even and >= 2, got {n_nodes}")));
    }
    let fine = semicircle_neumann(s, t, n_nodes)?;
    let coarse = semicircle_neumann(s, t, n_nodes / 2)?;
    let diff = (fine - coarse).abs();
    if diff > tol {
        return Err(Error::QuadratureUnstable { diff, tol });
    }
    Ok(fine)
}

/// Double angular average of the lateral covariance at fixed `(t, t2)`.
pub fn lateral_angular_average(t: f64, t2: f64, n_nodes: usize) -> f64 {
    semicircle_double_average(n_nodes, |a, b| lateral_lag(t - t2, a, b).unwrap_or(0.0))
}

/// `K_C(z, w) + g(z, w)`.
pub fn eval_perturbed(z: HalfPlanePoint, w: HalfPlanePoint, g: &Perturbation) -> Result<f64> {
    Ok(eval_neumann(z, w)? + g.eval(z, w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(x: f64, y: f64) -> HalfPlanePoint {
        HalfPlanePoint::new(x, y).unwrap()
    }

    #[test]
    fn neumann_examples() {
        assert!((eval_neumann(p(0.0, 1.0), p(0.0, 2.0)).unwrap() + 3f64.ln()).abs() < 1e-15);
        assert!((eval_neumann(p(1.0, 0.0), p(-1.0, 0.0)).unwrap() + 2.0 * 2f64.ln()).abs() < 1e-15);
        assert!(matches!(eval_neumann(p(0.0, 1.0), p(0.0, 1.0)), Err(Error::DiagonalSingularity)));
        assert!(HalfPlanePoint::new(0.0, -1e-9).is_err());
    }

    #[test]
    fn boundary_examples() {
        assert_eq!(eval_boundary(0.0, 1.0).unwrap(), 0.0);
        assert!((eval_boundary(0.0, 0.5).unwrap() - 2.0 * 2f64.ln()).abs() < 1e-15);
        assert!((eval_boundary(0.0, std::f64::consts::E).unwrap() + 2.0).abs() < 1e-15);
        assert!(eval_boundary(0.3, 0.3).is_err());
    }

    #[test]
    fn lateral_examples() {
        // z = i, w = 1
        let v = eval_lateral(0.0, PI / 2.0, 0.0, 0.0).unwrap();
        assert!((v + 2f64.ln()).abs() < 1e-15);
        assert!(eval_lateral(0.4, 1.0, 0.4, 1.0).is_err());
        // rays on the same circle are distinct points
        assert!(eval_lateral(0.0, 0.0, 0.0, PI).is_ok());
    }

    #[test]
    fn lateral_agrees_with_direct_formula() {
        for &(t, a, t2, b) in &[(0.3, 0.2, 1.1, 2.9), (2.0, 1.5, 0.1, 0.4), (0.0, 3.0, 0.01, 3.1)] {
            let z = HalfPlanePoint::polar(t, a);
            let w = HalfPlanePoint::polar(t2, b);
            let direct = 2.0 * (-(t as f64).min(t2)) - z.dist(&w).ln() - z.dist_conj(&w).ln();
            let v = eval_lateral(t, a, t2, b).unwrap();
            assert!((v - direct).abs() < 1e-12, "{v} {direct}");
            assert!((KernelSpec::Lateral.eval(z, w).unwrap() - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn semicircle_examples() {
        assert_eq!(semicircle_avg_cov(1.0, 2.0), 2.0);
        assert_eq!(semicircle_avg_cov(0.0, 5.0), 0.0);
        assert_eq!(semicircle_avg_cov(3.0, 3.0), 6.0);
    }

    #[test]
    fn quadrature_examples() {
        let v = quadrature_cov(1.0, 2.0, 2048, 1e-6).unwrap();
        assert!((v - 2.0).abs() < 1e-6);
        let v = quadrature_cov(0.5, 0.5, 2048, 1e-4).unwrap();
        assert!((v - 1.0).abs() < 1e-4);
        assert!(matches!(quadrature_cov(1.0, 2.0, 8, 1e-6), Err(Error::QuadratureUnstable { .. })));
    }

    #[test]
    fn diagonal_quadrature_is_exact_at_any_resolution() {
        for n in [4, 16, 64] {
            let v = semicircle_neumann(0.7, 0.7, n).unwrap();
            assert!((v - 1.4).abs() < 1e-12, "n = {n}: {v}");
        }
    }

    #[test]
    fn plain_midpoint_offset_is_not_enough() {
        // offsetting the outer nodes by h/2 leaves an O(ln 2 / n) error on the diagonal
        let n = 2048;
        let h = PI / n as f64;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                let z = HalfPlanePoint::polar(0.5, i as f64 * h + 0.01 * h);
                let w = HalfPlanePoint::polar(0.5, (j as f64 + 0.5) * h);
                acc += eval_neumann(z, w).unwrap();
            }
        }
        let midpoint = acc * h * h / (PI * PI);
        assert!((midpoint - 1.0).abs() > 1e-4);
    }

    #[test]
    fn perturbed_examples() {
        let z = p(1.0, 1.0);
        let w = p(2.0, 1.0);
        let k = eval_neumann(z, w).unwrap();
        assert_eq!(eval_perturbed(z, w, &Perturbation::constant(0.0)).unwrap(), k);
        assert!((eval_perturbed(z, w, &Perturbation::constant(0.7)).unwrap() - k - 0.7).abs() < 1e-15);
        let g = Perturbation::new("xx", |a, b| 0.1 * a.x * b.x).unwrap();
        assert!((eval_perturbed(z, w, &g).unwrap() - k - 0.2).abs() < 1e-15);
        assert!(Perturbation::new("bad", |a, _| a.x).is_err());
    }

    #[test]
    fn split_into_dirichlet_and_restriction() {
        let z = p(0.3, 0.8);
        let w = p(-0.2, 0.1);
        let c = KernelSpec::ExactScalingNeumann.eval(z, w).unwrap();
        let d = KernelSpec::DirichletPart.eval(z, w).unwrap();
        let r = KernelSpec::BoundaryRestriction.eval(z, w).unwrap();
        assert!((c - d - r).abs() < 1e-14);
        // Dirichlet part vanishes on the boundary
        assert_eq!(KernelSpec::DirichletPart.eval(p(0.1, 0.0), p(0.4, 0.0)).unwrap(), 0.0);
    }

    #[test]
    fn semicircle_identity_grid() {
        let vals = [0.25, 0.5, 1.0, 2.0];
        for &s in &vals {
            for &t in &vals {
                if s != t {
                    let q = quadrature_cov(s, t, 2048, 1e-6).unwrap();
                    assert!((q - semicircle_avg_cov(s, t)).abs() <= 1e-6, "({s},{t}): {q}");
                }
            }
        }
    }

    #[test]
    fn lateral_zero_average() {
        for &(t, t2) in &[(0.0, 0.0), (0.3, 1.0), (2.0, 0.5), (1.0, 1.0)] {
            assert!(lateral_angular_average(t, t2, 1024).abs() < 1e-5);
        }
    }

    fn point() -> impl Strategy<Value = HalfPlanePoint> {
        (-3.0f64..3.0, prop_oneof![Just(0.0), 0.0f64..3.0]).prop_map(|(x, y)| HalfPlanePoint { x, y })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn kernels_are_symmetric(z in point(), w in point()) {
            prop_assume!(z.dist(&w) > 1e-9);
            let g = Perturbation::constant(0.3);
            for k in [KernelSpec::ExactScalingNeumann, KernelSpec::DirichletPart,
                      KernelSpec::BoundaryRestriction, KernelSpec::Lateral, KernelSpec::Perturbed(g)] {
                let a = k.eval(z, w).unwrap();
                let b = k.eval(w, z).unwrap();
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
            }
        }

        #[test]
        fn boundary_consistency(x in -3.0f64..3.0, y in -3.0f64..3.0) {
            prop_assume!(x != y);
            let a = eval_neumann(HalfPlanePoint::boundary(x), HalfPlanePoint::boundary(y)).unwrap();
            prop_assert_eq!(a, eval_boundary(x, y).unwrap());
        }

        #[test]
        fn lateral_stationary(t in -2.0f64..2.0, t2 in -2.0f64..2.0, a in 0.0..PI, b in 0.0..PI) {
            prop_assume!((t - t2).abs() > 1e-6 || (a - b).abs() > 1e-6);
            let c = 1.7;
            let u = eval_lateral(t, a, t2, b).unwrap();
            let v = eval_lateral(t + c, a, t2 + c, b).unwrap();
            prop_assert!((u - v).abs() <= 1e-12 * (1.0 + u.abs()), "{} {}", u, v);
            let w = eval_lateral(t2, b, t, a).unwrap();
            prop_assert!((u - w).abs() <= 1e-12 * (1.0 + u.abs()));
        }
    }
}
