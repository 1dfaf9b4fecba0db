//! Grid discretization of the Carleson cube `Q_r = [-r, r] × [0, 2r]`, exact
//! covariance factorization and field sampling.
//!
//! Node `i < n_bulk²` is the bulk cell in row `i / n_bulk` (counted from the
//! boundary) and column `i % n_bulk`; the boundary segments follow.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::kernels::{HalfPlanePoint, KernelSpec};
use crate::quad::{gl16, gl8, log_avg_rects, log_avg_segments, log_self_avg, Rect};
use crate::rng;

/// Largest node count accepted for dense factorization.
pub const MAX_NODES: usize = 4096;

#[derive(Debug, Clone)]
pub struct Grid {
    pub r: f64,
    pub n_bulk: usize,
    pub n_bdy: usize,
    pub bulk_centers: Vec<HalfPlanePoint>,
    pub bdy_centers: Vec<f64>,
    pub cell_area: f64,
    pub seg_len: f64,
    /// Side length of a (square) bulk cell.
    pub cell_side: f64,
}

/// Set of bulk cells, indexed `0..n_bulk²`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BulkRegion(pub Vec<usize>);

/// Set of boundary segments, indexed `0..n_bdy`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BdyInterval(pub Vec<usize>);

/// Uniform tiling of `Q_r`.
pub fn build_grid(r: f64, n_bulk: usize, n_bdy: usize) -> Result<Grid> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidResolution(format!("r must be positive, got {r}")));
    }
    if n_bulk == 0 || n_bdy == 0 {
        return Err(Error::InvalidResolution("need at least one cell and one segment".into()));
    }
    let nodes = n_bulk * n_bulk + n_bdy;
    if nodes > MAX_NODES {
        return Err(Error::InvalidResolution(format!("{nodes} nodes exceeds the dense ceiling {MAX_NODES}")));
    }
    let h = 2.0 * r / n_bulk as f64;
    let l = 2.0 * r / n_bdy as f64;
    let mut bulk_centers = Vec::with_capacity(n_bulk * n_bulk);
    for row in 0..n_bulk {
        for col in 0..n_bulk {
            bulk_centers.push(HalfPlanePoint { x: -r + (col as f64 + 0.5) * h, y: (row as f64 + 0.5) * h });
        }
    }
    let bdy_centers = (0..n_bdy).map(|j| -r + (j as f64 + 0.5) * l).collect();
    Ok(Grid { r, n_bulk, n_bdy, bulk_centers, bdy_centers, cell_area: h * h, seg_len: l, cell_side: h })
}

impl Grid {
    pub fn n_cells(&self) -> usize {
        self.n_bulk * self.n_bulk
    }

    pub fn node_count(&self) -> usize {
        self.n_cells() + self.n_bdy
    }

    pub fn row(&self, cell: usize) -> usize {
        cell / self.n_bulk
    }

    pub fn cell_rect(&self, cell: usize) -> Rect {
        let h = self.cell_side;
        let row = (cell / self.n_bulk) as f64;
        let col = (cell % self.n_bulk) as f64;
        Rect::new(-self.r + col * h, -self.r + (col + 1.0) * h, row * h, (row + 1.0) * h)
    }

    pub fn segment(&self, j: usize) -> (f64, f64) {
        let a = -self.r + j as f64 * self.seg_len;
        (a, a + self.seg_len)
    }

    pub fn all_cells(&self) -> BulkRegion {
        BulkRegion((0..self.n_cells()).collect())
    }

    pub fn all_segments(&self) -> BdyInterval {
        BdyInterval((0..self.n_bdy).collect())
    }

    /// Cells whose center satisfies `pred`.
    pub fn cells_where(&self, pred: impl Fn(HalfPlanePoint) -> bool) -> BulkRegion {
        BulkRegion((0..self.n_cells()).filter(|&i| pred(self.bulk_centers[i])).collect())
    }

    /// Segments whose center satisfies `pred`.
    pub fn segments_where(&self, pred: impl Fn(f64) -> bool) -> BdyInterval {
        BdyInterval((0..self.n_bdy).filter(|&j| pred(self.bdy_centers[j])).collect())
    }

    /// Cells centered in the half-disk `|z − v| < rho`.
    pub fn half_disk(&self, v: f64, rho: f64) -> BulkRegion {
        self.cells_where(|z| (z.x - v).hypot(z.y) < rho)
    }

    /// Segments centered in `[v − rho, v + rho]`.
    pub fn interval_around(&self, v: f64, rho: f64) -> BdyInterval {
        self.segments_where(|x| (x - v).abs() <= rho)
    }

    pub fn check_region(&self, region: &BulkRegion) -> Result<()> {
        match region.0.iter().find(|&&i| i >= self.n_cells()) {
            Some(&index) => Err(Error::RegionMismatch { index, len: self.n_cells() }),
            None => Ok(()),
        }
    }

    pub fn check_interval(&self, interval: &BdyInterval) -> Result<()> {
        match interval.0.iter().find(|&&j| j >= self.n_bdy) {
            Some(&index) => Err(Error::RegionMismatch { index, len: self.n_bdy }),
            None => Ok(()),
        }
    }

    /// Index of the segment whose midpoint is `v`, if any.
    pub fn midpoint_segment(&self, v: f64) -> Option<usize> {
        let j = ((v + self.r) / self.seg_len).floor();
        if j < 0.0 || j >= self.n_bdy as f64 {
            return None;
        }
        let j = j as usize;
        ((v - self.bdy_centers[j]).abs() <= 1e-9 * self.seg_len).then_some(j)
    }

    fn node_point(&self, i: usize) -> HalfPlanePoint {
        if i < self.n_cells() {
            self.bulk_centers[i]
        } else {
            HalfPlanePoint::boundary(self.bdy_centers[i - self.n_cells()])
        }
    }
}

/// Factored covariance of the grid field.
#[derive(Debug, Clone)]
pub struct CovFactor {
    pub dim: usize,
    /// Lower Cholesky factor, packed by rows: entry `(i, j)`, `j <= i`, sits
    /// at `i (i + 1) / 2 + j`.
    pub lower_factor: Vec<f64>,
    /// Diagonal of the (jittered) covariance.
    pub diag_var: Vec<f64>,
    pub jitter_used: f64,
    /// The (jittered) covariance, packed like `lower_factor`.
    cov: Vec<f64>,
    n_cells: usize,
    kernel: KernelSpec,
    coupling_bdy: bool,
}

#[inline]
fn packed(i: usize, j: usize) -> usize {
    let (i, j) = if j > i { (j, i) } else { (i, j) };
    i * (i + 1) / 2 + j
}

impl CovFactor {
    pub fn cov(&self, i: usize, j: usize) -> f64 {
        self.cov[packed(i, j)]
    }

    pub fn l(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.lower_factor[packed(i, j)]
        }
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.dim).map(|i| self.cov(i, j)).collect()
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn coupling_bdy(&self) -> bool {
        self.coupling_bdy
    }

    /// `out = L z`.
    pub fn apply(&self, z: &[f64], out: &mut [f64]) {
        let mut k = 0;
        for i in 0..self.dim {
            let row = &self.lower_factor[k..k + i + 1];
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(&z[..=i]) {
                acc += a * b;
            }
            out[i] = acc;
            k += i + 1;
        }
    }

    /// Draw a field into `out` using `z` as scratch.
    pub fn sample_into(&self, rng: &mut impl Rng, z: &mut [f64], out: &mut [f64]) {
        rng::fill_normals(rng, z);
        self.apply(z, out);
    }

    /// Largest relative entrywise error of `L Lᵀ` against the stored
    /// covariance.
    pub fn reconstruction_error(&self) -> f64 {
        let scale = self.cov.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for j in 0..=i {
                let mut acc = 0.0;
                for k in 0..=j {
                    acc += self.l(i, k) * self.l(j, k);
                }
                worst = worst.max((acc - self.cov(i, j)).abs() / scale);
            }
        }
        worst
    }
}

/// One realization of the grid field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    pub values: Vec<f64>,
    pub seed: u64,
    pub shift: Option<Vec<f64>>,
}

fn rect_average(rule: &crate::quad::GaussLegendre, r: &Rect, mut f: impl FnMut(HalfPlanePoint, HalfPlanePoint) -> f64) -> f64 {
    let mut acc = 0.0;
    for (x, wx) in rule.on(r.x0, r.x1) {
        for (y, wy) in rule.on(r.y0, r.y1) {
            for (u, wu) in rule.on(r.x0, r.x1) {
                for (v, wv) in rule.on(r.y0, r.y1) {
                    acc += wx * wy * wu * wv * f(HalfPlanePoint { x, y }, HalfPlanePoint { x: u, y: v });
                }
            }
        }
    }
    acc / (r.area() * r.area())
}

fn segment_average(a: f64, b: f64, mut f: impl FnMut(f64, f64) -> f64) -> f64 {
    let rule = gl16();
    let mut acc = 0.0;
    for (x, wx) in rule.on(a, b) {
        for (y, wy) in rule.on(a, b) {
            acc += wx * wy * f(x, y);
        }
    }
    acc / ((b - a) * (b - a))
}

/// Self-average of the kernel over a bulk cell.
fn cell_self_cov(kernel: &KernelSpec, r: &Rect) -> f64 {
    let direct = -log_self_avg(r.width(), r.height());
    let mirror = -log_avg_rects(r, &r.reflected());
    match kernel {
        KernelSpec::ExactScalingNeumann => direct + mirror,
        KernelSpec::DirichletPart => direct - mirror,
        KernelSpec::BoundaryRestriction => 2.0 * mirror,
        KernelSpec::Lateral => {
            direct + mirror + 2.0 * rect_average(gl8(), r, |z, w| z.modulus().max(w.modulus()).ln())
        }
        KernelSpec::Perturbed(g) => direct + mirror + rect_average(gl8(), r, |z, w| g.eval(z, w)),
    }
}

/// Self-average of the kernel over a boundary segment.
fn segment_self_cov(kernel: &KernelSpec, a: f64, b: f64) -> f64 {
    let log_part = -2.0 * log_avg_segments(a, b, a, b);
    match kernel {
        KernelSpec::ExactScalingNeumann | KernelSpec::BoundaryRestriction => log_part,
        KernelSpec::DirichletPart => 0.0,
        KernelSpec::Lateral => log_part + 2.0 * segment_average(a, b, |x, y| x.abs().max(y.abs()).ln()),
        KernelSpec::Perturbed(g) => {
            log_part + segment_average(a, b, |x, y| g.eval(HalfPlanePoint::boundary(x), HalfPlanePoint::boundary(y)))
        }
    }
}

/// Average over `x ∈ [a, b]` of the kernel between `(x, 0)` and `(v, 0)`.
fn segment_point_cov(kernel: &KernelSpec, a: f64, b: f64, v: f64) -> f64 {
    let psi = |u: f64| if u == 0.0 { 0.0 } else { u * u.abs().ln() - u };
    let log_part = -2.0 * (psi(b - v) - psi(a - v)) / (b - a);
    let avg = |f: &dyn Fn(f64) -> f64| {
        // split at v, where the smooth parts may have a kink
        let rule = gl16();
        let mut acc = 0.0;
        if v > a && v < b {
            acc += rule.integrate(a, v, f) + rule.integrate(v, b, f);
        } else {
            acc += rule.integrate(a, b, f);
        }
        acc / (b - a)
    };
    match kernel {
        KernelSpec::ExactScalingNeumann | KernelSpec::BoundaryRestriction => log_part,
        KernelSpec::DirichletPart => 0.0,
        KernelSpec::Lateral => log_part + 2.0 * avg(&|x: f64| x.abs().max(v.abs()).ln()),
        KernelSpec::Perturbed(g) => {
            log_part + avg(&|x: f64| g.eval(HalfPlanePoint::boundary(x), HalfPlanePoint::boundary(v)))
        }
    }
}

/// Assemble the covariance matrix (without jitter).
pub fn covariance_matrix(grid: &Grid, kernel: &KernelSpec, coupling_bdy: bool) -> Result<DMatrix<f64>> {
    let n = grid.node_count();
    let nc = grid.n_cells();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..i {
            let cross = (i < nc) != (j < nc);
            let v = if cross && !coupling_bdy {
                0.0
            } else {
                kernel.eval(grid.node_point(i), grid.node_point(j)).map_err(|e| e.context(format!("entry ({i}, {j})")))?
            };
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        m[(i, i)] = if i < nc {
            cell_self_cov(kernel, &grid.cell_rect(i))
        } else {
            let (a, b) = grid.segment(i - nc);
            segment_self_cov(kernel, a, b)
        };
    }
    Ok(m)
}

/// Build and factor the grid covariance, escalating diagonal jitter from
/// `1e-12 · trace / dim` by factors of ten (at most six retries) if the
/// plain matrix does not factor.
pub fn build_cov(grid: &Grid, kernel: &KernelSpec, coupling_bdy: bool) -> Result<CovFactor> {
    let m = covariance_matrix(grid, kernel, coupling_bdy)?;
    factor_matrix(m, grid.n_cells(), kernel.clone(), coupling_bdy)
}

fn factor_matrix(m: DMatrix<f64>, n_cells: usize, kernel: KernelSpec, coupling_bdy: bool) -> Result<CovFactor> {
    let n = m.nrows();
    let base = 1e-12 * m.trace().abs() / n as f64;
    let mut jitter = 0.0;
    for attempt in 0..8 {
        if attempt > 0 {
            jitter = base * 10f64.powi(attempt - 1);
        }
        let mut a = m.clone();
        for i in 0..n {
            a[(i, i)] += jitter;
        }
        if let Some(chol) = a.clone().cholesky() {
            let l = chol.l();
            let mut lower_factor = Vec::with_capacity(n * (n + 1) / 2);
            let mut cov = Vec::with_capacity(n * (n + 1) / 2);
            for i in 0..n {
                for j in 0..=i {
                    lower_factor.push(l[(i, j)]);
                    cov.push(a[(i, j)]);
                }
            }
            let diag_var: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
            if diag_var.iter().any(|&d| d <= 0.0) {
                break;
            }
            return Ok(CovFactor { dim: n, lower_factor, diag_var, jitter_used: jitter, cov, n_cells, kernel, coupling_bdy });
        }
    }
    Err(Error::NotPositiveDefinite { jitter })
}

/// Field realization for `seed`: `L ξ` with ξ drawn from stream 0 of `seed`.
pub fn sample_field(factor: &CovFactor, seed: u64) -> FieldSample {
    sample_replica(factor, seed, 0)
}

/// Replica `i` of a run seeded with `seed`.
pub fn sample_replica(factor: &CovFactor, seed: u64, replica: u64) -> FieldSample {
    let mut g = rng::stream(seed, replica);
    let mut z = vec![0.0; factor.dim];
    let mut values = vec![0.0; factor.dim];
    factor.sample_into(&mut g, &mut z, &mut values);
    FieldSample { values, seed, shift: None }
}

/// Girsanov drift `K(node, (v, 0))` for every node. At a segment midpoint
/// this is exactly the covariance column of that segment's node, so tilting
/// by the boundary node value is an exact change of measure. Elsewhere the
/// containing segment's entry is the kernel averaged over the segment.
pub fn shift_vector(factor: &CovFactor, grid: &Grid, v: f64) -> Result<Vec<f64>> {
    if !(v > -grid.r && v < grid.r) {
        return Err(Error::InvalidParameter(format!("v = {v} outside (-{0}, {0})", grid.r)));
    }
    let nc = grid.n_cells();
    if let Some(j) = grid.midpoint_segment(v) {
        return Ok(factor.column(nc + j));
    }
    let pos = (v + grid.r) / grid.seg_len;
    if (pos - pos.round()).abs() < 1e-12 * grid.n_bdy as f64 {
        return Err(Error::SingularShift(v));
    }
    let containing = (pos.floor() as usize).min(grid.n_bdy - 1);
    let kernel = &factor.kernel;
    let vp = HalfPlanePoint::boundary(v);
    let mut s = vec![0.0; factor.dim];
    if factor.coupling_bdy {
        for (i, z) in grid.bulk_centers.iter().enumerate() {
            s[i] = kernel.eval(*z, vp)?;
        }
    }
    for k in 0..grid.n_bdy {
        s[nc + k] = if k == containing {
            let (a, b) = grid.segment(k);
            segment_point_cov(kernel, a, b, v)
        } else {
            kernel.eval(HalfPlanePoint::boundary(grid.bdy_centers[k]), vp)?
        };
    }
    Ok(s)
}

/// Add `charge · K(·, (v, 0))` to the field.
pub fn girsanov_shift(field: &FieldSample, factor: &CovFactor, grid: &Grid, v: f64, charge: f64) -> Result<FieldSample> {
    if field.values.len() != factor.dim || factor.dim != grid.node_count() || factor.n_cells != grid.n_cells() {
        return Err(Error::IndexMismatch("field, factor and grid sizes differ".into()));
    }
    let s = shift_vector(factor, grid, v)?;
    let values = field.values.iter().zip(&s).map(|(x, d)| x + charge * d).collect();
    let total = match &field.shift {
        Some(prev) => prev.iter().zip(&s).map(|(p, d)| p + charge * d).collect(),
        None => s.iter().map(|d| charge * d).collect(),
    };
    Ok(FieldSample { values, seed: field.seed, shift: Some(total) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::Perturbation;

    #[test]
    fn grid_examples() {
        let g = build_grid(1.0, 2, 2).unwrap();
        assert_eq!(g.n_cells(), 4);
        assert_eq!(g.cell_area, 1.0);
        assert_eq!(g.seg_len, 1.0);
        assert_eq!(g.bdy_centers, vec![-0.5, 0.5]);
        let g = build_grid(0.5, 4, 4).unwrap();
        assert_eq!(g.n_cells(), 16);
        assert!((g.cell_area - 0.0625).abs() < 1e-15);
        assert!(matches!(build_grid(-1.0, 4, 4), Err(Error::InvalidResolution(_))));
        assert!(matches!(build_grid(1.0, 64, 32), Err(Error::InvalidResolution(_))));
    }

    #[test]
    fn cells_tile_the_cube() {
        let g = build_grid(0.5, 6, 12).unwrap();
        let area: f64 = (0..g.n_cells()).map(|i| g.cell_rect(i).area()).sum();
        assert!((area - 1.0).abs() < 1e-12);
        assert!(g.bulk_centers.iter().all(|z| z.y > 0.0));
        assert!(g.bdy_centers.iter().all(|x| x.abs() < 0.5));
        assert_eq!(g.cell_rect(7).center(), (g.bulk_centers[7].x, g.bulk_centers[7].y));
    }

    #[test]
    fn two_node_boundary_restriction() {
        let g = build_grid(1.0, 1, 2).unwrap();
        let m = covariance_matrix(&g, &KernelSpec::BoundaryRestriction, true).unwrap();
        assert_eq!(m[(1, 2)], 0.0);
    }

    #[test]
    fn constant_perturbation_shifts_every_entry() {
        let g = build_grid(0.5, 4, 8).unwrap();
        let a = covariance_matrix(&g, &KernelSpec::ExactScalingNeumann, true).unwrap();
        let b = covariance_matrix(&g, &KernelSpec::Perturbed(Perturbation::constant(0.4)), true).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((y - x - 0.4).abs() < 1e-12);
        }
    }

    #[test]
    fn factor_reconstructs_covariance() {
        let g = build_grid(0.5, 6, 12).unwrap();
        let f = build_cov(&g, &KernelSpec::ExactScalingNeumann, true).unwrap();
        assert_eq!(f.jitter_used, 0.0);
        assert!(f.reconstruction_error() <= 1e-10);
        assert!(f.diag_var.iter().all(|&d| d > 0.0));
    }

    #[test]
    fn diagonal_is_cell_average() {
        // bulk self-covariance against a brute-force midpoint average
        let g = build_grid(0.5, 4, 4).unwrap();
        let m = covariance_matrix(&g, &KernelSpec::ExactScalingNeumann, true).unwrap();
        let r = g.cell_rect(5);
        let n = 30;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                let z = HalfPlanePoint { x: r.x0 + r.width() * (i as f64 + 0.5) / n as f64, y: r.y0 + r.height() * (j as f64 + 0.5) / n as f64 };
                for k in 0..n + 1 {
                    for l in 0..n + 1 {
                        let w = HalfPlanePoint { x: r.x0 + r.width() * (k as f64 + 0.5) / (n + 1) as f64, y: r.y0 + r.height() * (l as f64 + 0.5) / (n + 1) as f64 };
                        acc += crate::kernels::eval_neumann(z, w).unwrap();
                    }
                }
            }
        }
        let brute = acc / (n * n * (n + 1) * (n + 1)) as f64;
        assert!((m[(5, 5)] - brute).abs() < 5e-3, "{} {}", m[(5, 5)], brute);
        // boundary self-covariance: 3 − 2 ln ℓ
        let d = m[(16, 16)];
        assert!((d - (3.0 - 2.0 * g.seg_len.ln())).abs() < 1e-12);
    }

    #[test]
    fn sampling_is_deterministic() {
        let g = build_grid(0.5, 4, 8).unwrap();
        let f = build_cov(&g, &KernelSpec::ExactScalingNeumann, true).unwrap();
        assert_eq!(sample_field(&f, 11), sample_field(&f, 11));
        assert_ne!(sample_field(&f, 11).values, sample_field(&f, 12).values);
    }

    #[test]
    fn shift_group_property() {
        let g = build_grid(0.5, 6, 12).unwrap();
        let f = build_cov(&g, &KernelSpec::ExactScalingNeumann, true).unwrap();
        let x = sample_field(&f, 3);
        let v = g.bdy_centers[4];
        let same = girsanov_shift(&x, &f, &g, v, 0.0).unwrap();
        assert_eq!(same.values, x.values);
        let back = girsanov_shift(&girsanov_shift(&x, &f, &g, v, 0.7).unwrap(), &f, &g, v, -0.7).unwrap();
        for (a, b) in back.values.iter().zip(&x.values) {
            assert!((a - b).abs() < 1e-12);
        }
        // off-midpoint v uses kernel values, with a finite entry on its own segment
        let s = shift_vector(&f, &g, 0.01).unwrap();
        assert!(s.iter().all(|v| v.is_finite()));
        assert!(matches!(shift_vector(&f, &g, 0.0), Err(Error::SingularShift(_))));
    }

    #[test]
    fn midpoint_shift_is_covariance_column() {
        let g = build_grid(0.5, 4, 8).unwrap();
        let f = build_cov(&g, &KernelSpec::ExactScalingNeumann, true).unwrap();
        let j = 3;
        let s = shift_vector(&f, &g, g.bdy_centers[j]).unwrap();
        let k = crate::kernels::eval_neumann(g.bulk_centers[9], HalfPlanePoint::boundary(g.bdy_centers[j])).unwrap();
        assert_eq!(s[9], k);
        assert_eq!(s[g.n_cells() + j], f.diag_var[g.n_cells() + j]);
    }

    #[test]
    fn region_checks() {
        let g = build_grid(0.5, 4, 8).unwrap();
        assert!(g.check_region(&BulkRegion(vec![0, 15])).is_ok());
        assert!(matches!(g.check_region(&BulkRegion(vec![16])), Err(Error::RegionMismatch { .. })));
        assert!(g.check_interval(&BdyInterval(vec![8])).is_err());
    }
}
