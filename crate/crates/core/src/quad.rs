//! Quadrature helpers: Gauss-Legendre rules and closed-form averages of
//! `ln|x - y|` over segments and rectangles.

use std::sync::OnceLock;

/// Gauss-Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "need at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Integrate `f` over [a, b].
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }

    /// Scaled nodes and weights for [a, b].
    pub fn on(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes.iter().zip(&self.weights).map(move |(x, w)| (mid + half * x, w * half))
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Shared 16-point rule.
pub fn gl16() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(16))
}

/// Shared 4-point rule.
pub fn gl4() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(4))
}

/// Shared 8-point rule.
pub fn gl8() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(8))
}

/// `∫_0^c θ^(-a) f(θ) dθ` for `a < 1`, removing the endpoint singularity
/// with `θ = c·u^(1/(1-a))`.
pub fn power_singular(a: f64, c: f64, rule: &GaussLegendre, mut f: impl FnMut(f64) -> f64) -> f64 {
    debug_assert!(a < 1.0);
    if c <= 0.0 {
        return 0.0;
    }
    let e = 1.0 / (1.0 - a);
    let scale = c.powf(1.0 - a) * e;
    scale * rule.integrate(0.0, 1.0, |u| f(c * u.powf(e)))
}

/// Second antiderivative of `ln|u|`: `u² ln|u| / 2 − 3u²/4`.
fn phi1(u: f64) -> f64 {
    if u == 0.0 {
        0.0
    } else {
        let u2 = u * u;
        0.5 * u2 * u.abs().ln() - 0.75 * u2
    }
}

/// Average of `ln|x − y|` for x ∈ [a1, b1], y ∈ [a2, b2].
pub fn log_avg_segments(a1: f64, b1: f64, a2: f64, b2: f64) -> f64 {
    let total = phi1(b1 - a2) - phi1(b1 - b2) - phi1(a1 - a2) + phi1(a1 - b2);
    total / ((b1 - a1) * (b2 - a2))
}

/// Fourth antiderivative of `ln|z|` in the plane, ∂x²∂y² F = ln √(x² + y²).
/// Even in each variable; the atan jumps across the axes carry cubic
/// factors, so the mixed fourth derivative has no singular part there.
fn f4(x: f64, y: f64) -> f64 {
    let x2 = x * x;
    let y2 = y * y;
    let r2 = x2 + y2;
    if r2 == 0.0 {
        return 0.0;
    }
    let mut v = -25.0 / 48.0 * x2 * y2 + (-x2 * x2 / 48.0 + x2 * y2 / 8.0 - y2 * y2 / 48.0) * r2.ln();
    if x != 0.0 && y != 0.0 {
        v += (x2 * x * y * (y / x).atan() + x * y2 * y * (x / y).atan()) / 6.0;
    }
    v
}

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self { x0, x1, y0, y1 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
    }

    /// Mirror image in the real axis.
    pub fn reflected(&self) -> Self {
        Self { x0: self.x0, x1: self.x1, y0: -self.y1, y1: -self.y0 }
    }

    fn diameter(&self) -> f64 {
        self.width().hypot(self.height())
    }

    fn gap(&self, other: &Rect) -> f64 {
        let dx = (other.x0 - self.x1).max(self.x0 - other.x1).max(0.0);
        let dy = (other.y0 - self.y1).max(self.y0 - other.y1).max(0.0);
        dx.hypot(dy)
    }
}

/// Average of `ln|z − w|` for z ∈ `a`, w ∈ `b`. Exact closed form when the
/// rectangles are close; tensor Gauss-Legendre when they are well separated
/// (the closed form loses digits to cancellation there).
pub fn log_avg_rects(a: &Rect, b: &Rect) -> f64 {
    let size = a.diameter().max(b.diameter());
    if a.gap(b) > 4.0 * size {
        let rule = gl8();
        let mut acc = 0.0;
        for (x, wx) in rule.on(a.x0, a.x1) {
            for (y, wy) in rule.on(a.y0, a.y1) {
                for (u, wu) in rule.on(b.x0, b.x1) {
                    for (v, wv) in rule.on(b.y0, b.y1) {
                        acc += wx * wy * wu * wv * (x - u).hypot(y - v).ln();
                    }
                }
            }
        }
        return acc / (a.area() * b.area());
    }
    let xs = [(a.x1 - b.x0, 1.0), (a.x1 - b.x1, -1.0), (a.x0 - b.x0, -1.0), (a.x0 - b.x1, 1.0)];
    let ys = [(a.y1 - b.y0, 1.0), (a.y1 - b.y1, -1.0), (a.y0 - b.y0, -1.0), (a.y0 - b.y1, 1.0)];
    let mut total = 0.0;
    for (x, sx) in xs {
        for (y, sy) in ys {
            total += sx * sy * f4(x, y);
        }
    }
    total / (a.area() * b.area())
}

/// Third antiderivative of `ln|z|`, ∂x²∂y H = ln √(x² + y²).
fn h3(x: f64, y: f64) -> f64 {
    let x2 = x * x;
    let y2 = y * y;
    let r2 = x2 + y2;
    if r2 == 0.0 {
        return 0.0;
    }
    let l = r2.ln();
    let mut v = 0.25 * x2 * y * l - 11.0 / 12.0 * x2 * y - y2 * y * l / 12.0;
    if x != 0.0 && y != 0.0 {
        v += x2 * x * (y / x).atan() / 6.0 + 0.5 * x * y2 * (x / y).atan();
    }
    v
}

/// Average of `ln|z − w|` for z on the horizontal segment `[x0, x1] × {c}`
/// and w ∈ `b`.
pub fn log_avg_seg_rect(x0: f64, x1: f64, c: f64, b: &Rect) -> f64 {
    let seg = Rect::new(x0, x1, c, c);
    let size = seg.diameter().max(b.diameter());
    if seg.gap(b) > 4.0 * size {
        let rule = gl8();
        let mut acc = 0.0;
        for (x, wx) in rule.on(x0, x1) {
            for (u, wu) in rule.on(b.x0, b.x1) {
                for (v, wv) in rule.on(b.y0, b.y1) {
                    acc += wx * wu * wv * (x - u).hypot(c - v).ln();
                }
            }
        }
        return acc / ((x1 - x0) * b.area());
    }
    let xs = [(x1 - b.x0, 1.0), (x1 - b.x1, -1.0), (x0 - b.x0, -1.0), (x0 - b.x1, 1.0)];
    let ys = [(c - b.y0, 1.0), (c - b.y1, -1.0)];
    let mut total = 0.0;
    for (x, sx) in xs {
        for (y, sy) in ys {
            total += sx * sy * h3(x, y);
        }
    }
    total / ((x1 - x0) * b.area())
}

/// Self-average of `ln|z − w|` over a `w × h` rectangle.
pub fn log_self_avg(w: f64, h: f64) -> f64 {
    let r = Rect::new(0.0, w, 0.0, h);
    log_avg_rects(&r, &r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_rects(a: &Rect, b: &Rect, n: usize) -> f64 {
        // midpoint lattices of sizes n and n + 1, so nodes never coincide
        let m = n + 1;
        let mut acc = 0.0;
        for i in 0..n {
            let x = a.x0 + a.width() * (i as f64 + 0.5) / n as f64;
            for j in 0..n {
                let y = a.y0 + a.height() * (j as f64 + 0.5) / n as f64;
                for k in 0..m {
                    let u = b.x0 + b.width() * (k as f64 + 0.5) / m as f64;
                    for l in 0..m {
                        let v = b.y0 + b.height() * (l as f64 + 0.5) / m as f64;
                        acc += (x - u).hypot(y - v).ln();
                    }
                }
            }
        }
        acc / ((n * n * m * m) as f64)
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let rule = GaussLegendre::new(8);
        let v = rule.integrate(0.0, 2.0, |x| x.powi(15));
        assert!((v - 2f64.powi(16) / 16.0).abs() < 1e-9);
        let s: f64 = rule.weights.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn segment_self_average() {
        let l: f64 = 0.3;
        assert!((log_avg_segments(0.0, l, 0.0, l) - (l.ln() - 1.5)).abs() < 1e-14);
        // disjoint segments: smooth integrand, compare with Gauss-Legendre
        let rule = gl16();
        let direct = rule.integrate(0.0, 1.0, |x| rule.integrate(2.0, 2.5, |y| (y - x).ln())) / 0.5;
        assert!((log_avg_segments(0.0, 1.0, 2.0, 2.5) - direct).abs() < 1e-12);
    }

    #[test]
    fn unit_square_self_average() {
        // mean log-distance of two uniform points in the unit square
        let exact = 2f64.ln() / 3.0 + std::f64::consts::PI / 3.0 - 25.0 / 12.0;
        assert!((log_self_avg(1.0, 1.0) - exact).abs() < 1e-12, "{}", log_self_avg(1.0, 1.0));
    }

    #[test]
    fn rect_average_matches_brute_force() {
        let cases = [
            (Rect::new(0.0, 1.0, 0.0, 0.5), Rect::new(0.0, 1.0, 0.0, 0.5)),
            (Rect::new(0.0, 1.0, 0.0, 1.0), Rect::new(1.0, 2.0, -1.0, 0.0)),
            (Rect::new(-0.2, 0.3, 0.1, 0.4), Rect::new(-0.2, 0.3, -0.4, -0.1)),
            (Rect::new(0.0, 1.0, 0.0, 1.0), Rect::new(-3.0, -2.5, 0.5, 2.0)),
        ];
        for (a, b) in cases {
            let exact = log_avg_rects(&a, &b);
            let brute = brute_rects(&a, &b, 40);
            assert!((exact - brute).abs() < 2e-3, "{a:?} {b:?}: {exact} vs {brute}");
            assert!((log_avg_rects(&b, &a) - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn far_rects_switch_is_continuous() {
        let a = Rect::new(0.0, 0.1, 0.0, 0.1);
        for d in [0.55, 0.6, 0.65] {
            let b = Rect::new(d, d + 0.1, 0.0, 0.1);
            let near = {
                let xs = [(a.x1 - b.x0, 1.0), (a.x1 - b.x1, -1.0), (a.x0 - b.x0, -1.0), (a.x0 - b.x1, 1.0)];
                let ys = [(a.y1 - b.y0, 1.0), (a.y1 - b.y1, -1.0), (a.y0 - b.y0, -1.0), (a.y0 - b.y1, 1.0)];
                let mut t = 0.0;
                for (x, sx) in xs {
                    for (y, sy) in ys {
                        t += sx * sy * f4(x, y);
                    }
                }
                t / (a.area() * b.area())
            };
            assert!((near - log_avg_rects(&a, &b)).abs() < 1e-9);
        }
    }

    #[test]
    fn segment_rect_average_matches_brute_force() {
        let cases = [
            (0.0, 1.0, 0.0, Rect::new(0.0, 1.0, 0.0, 0.3)),
            (0.0, 0.1, 0.0, Rect::new(0.2, 0.3, -0.05, 0.0)),
            (-0.5, 0.5, 0.2, Rect::new(0.0, 1.0, -0.1, 0.4)),
            (0.0, 0.1, 0.0, Rect::new(3.0, 3.1, 0.0, 0.2)),
        ];
        for (x0, x1, c, b) in cases {
            let n = 300;
            let m = 61;
            let mut acc = 0.0;
            for i in 0..n {
                let x = x0 + (x1 - x0) * (i as f64 + 0.5) / n as f64;
                for k in 0..m {
                    let u = b.x0 + b.width() * (k as f64 + 0.5) / m as f64;
                    for l in 0..m {
                        let v = b.y0 + b.height() * (l as f64 + 0.5) / m as f64;
                        acc += (x - u).hypot(c - v).ln();
                    }
                }
            }
            let brute = acc / (n * m * m) as f64;
            let exact = log_avg_seg_rect(x0, x1, c, &b);
            assert!((exact - brute).abs() < 2e-3, "{x0} {x1} {c} {b:?}: {exact} vs {brute}");
        }
    }

    #[test]
    fn thin_rect_limit_agrees_with_segment() {
        let b = Rect::new(0.0, 0.1, 0.0, 0.05);
        let thin = Rect::new(0.0, 0.1, 0.0, 1e-4);
        let seg = log_avg_seg_rect(0.0, 0.1, 0.0, &b);
        assert!((log_avg_rects(&thin, &b) - seg).abs() < 1e-2, "{} {seg}", log_avg_rects(&thin, &b));
    }

    #[test]
    fn power_singular_matches_closed_form() {
        let rule = gl16();
        let a = 0.5;
        let v = power_singular(a, 0.3, rule, |_| 1.0);
        assert!((v - 0.3f64.powf(0.5) / 0.5).abs() < 1e-13);
    }
}
