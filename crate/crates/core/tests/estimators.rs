use gmclab::fieldsim::{build_cov, build_grid, girsanov_shift, sample_replica, CovFactor, Grid};
use gmclab::gmc::{bdy_mass, bulk_mass, GmcParams};
use gmclab::kernels::KernelSpec;
use gmclab::rng;
use gmclab::stats;
use gmclab::tailest::{localized_tail_estimator, sample_bulk_masses, survival_curve};

fn setup(nb: usize) -> (Grid, CovFactor, GmcParams) {
    let grid = build_grid(0.5, nb, 2 * nb).unwrap();
    let f = build_cov(&grid, &KernelSpec::ExactScalingNeumann, true).unwrap();
    (grid, f, GmcParams::new(1.0, 0.5).unwrap())
}

#[test]
fn localized_estimator_matches_plain_monte_carlo() {
    let (grid, f, p) = setup(6);
    let n = 100_000;
    let plain = sample_bulk_masses(&p, &grid, &f, n, 11).unwrap();
    let t = stats::quantile(&plain, 0.9);
    let direct = survival_curve(&plain, &[t]).unwrap()[0];
    let run = localized_tail_estimator(&p, &grid, &f, &[t], n, 12).unwrap();
    let is = run.curve[0];
    let z = (is.p - direct.p) / is.stderr.hypot(direct.stderr);
    assert!(z.abs() < 3.0, "IS {} ± {} vs plain {} ± {}", is.p, is.stderr, direct.p, direct.stderr);
}

#[test]
fn localized_estimator_wins_deep_in_the_tail() {
    let (grid, f, p) = setup(6);
    let n = 100_000;
    let pilot = sample_bulk_masses(&p, &grid, &f, n, 21).unwrap();
    let t = stats::quantile(&pilot, 0.999);
    let run = localized_tail_estimator(&p, &grid, &f, &[t], n, 22).unwrap();
    let (is, plain) = (run.curve[0], run.plain[0]);
    assert!(is.stderr < plain.stderr, "IS stderr {} vs plain {}", is.stderr, plain.stderr);
    let direct = survival_curve(&pilot, &[t]).unwrap()[0];
    let z = (is.p - direct.p) / is.stderr.hypot(direct.stderr);
    assert!(z.abs() < 3.0, "IS {} ± {} vs pilot {} ± {}", is.p, is.stderr, direct.p, direct.stderr);
}

/// `E[f(μ^H) μ^∂(I_r)] / 2r` by reweighting the unshifted field,
/// against `(1/2r) Σ_j ℓ E[f(μ^H(X + γ/2 C_j))]` from shifted fields.
#[test]
fn boundary_tilt_equals_sum_of_point_shifts() {
    let (grid, f, p) = setup(4);
    let n = 40_000;
    let all = grid.all_cells();
    let whole = grid.all_segments();
    let h = |x: f64| x.tanh();
    let num: Vec<f64> = rng::replicas(n, |i| {
        let x = sample_replica(&f, 31, i as u64);
        h(bulk_mass(&x, &f, &grid, &p, &all).unwrap()) * bdy_mass(&x, &f, &grid, &p, &whole).unwrap()
    });
    let (a, sa) = stats::mean_stderr(&num);
    let lhs = a / (2.0 * grid.r);

    let shifted: Vec<f64> = rng::replicas(n, |i| {
        let x = sample_replica(&f, 32, i as u64);
        let mut acc = 0.0;
        for &v in &grid.bdy_centers {
            let y = girsanov_shift(&x, &f, &grid, v, 0.5).unwrap();
            acc += grid.seg_len * h(bulk_mass(&y, &f, &grid, &p, &all).unwrap());
        }
        acc / (2.0 * grid.r)
    });
    let (rhs, sr) = stats::mean_stderr(&shifted);
    let z = (lhs - rhs) / (sa / (2.0 * grid.r)).hypot(sr);
    assert!(z.abs() < 3.0, "reweighted {lhs} ± {sa} vs shifted {rhs} ± {sr}");
}
