//! Importance-sampled tail of `μ^H(Q_r)` and the power-law fit.
//!
//! `cargo run --release --example tail_fit -- [n] [gamma]`

use gmclab::fieldsim::{build_cov, build_grid};
use gmclab::gmc::GmcParams;
use gmclab::kernels::KernelSpec;
use gmclab::stats;
use gmclab::tailest::*;

fn main() -> gmclab::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(20_000);
    let gamma: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1.0);
    let grid = build_grid(0.5, 16, 32)?;
    let f = build_cov(&grid, &KernelSpec::ExactScalingNeumann, true)?;
    let params = GmcParams::new(gamma, 0.5)?;

    let pilot = sample_bulk_masses(&params, &grid, &f, 5000, 1)?;
    let q50 = stats::quantile(&pilot, 0.5);
    let ts = log_grid(q50, q50 * 1e4, 60);
    let run = localized_tail_estimator(&params, &grid, &f, &ts, n, 2)?;
    let window = default_window(&run.masses, &ts, &run.tilted_exceedances, 50)?;
    let fit = fit_loglog(&run.curve, window)?;
    let target = 2.0 / (gamma * gamma);
    println!("window [{:.3}, {:.1}]: exponent {:.4} ± {:.4} (2/γ² = {target:.4})", window.0, window.1, fit.exponent, fit.stderr_exponent);
    let (c, se) = fit_constant(&run.curve, window, target)?;
    println!("constant with the exponent fixed at 2/γ²: {c:.4} ± {se:.4}");

    println!("\n{:>10} {:>12} {:>10} {:>12}", "t", "P[μ>t]", "stderr", "plain MC");
    for (c, p) in run.curve.iter().zip(&run.plain).step_by(6) {
        println!("{:>10.3} {:>12.4e} {:>10.2e} {:>12.4e}", c.t, c.p, c.stderr, p.p);
    }
    println!("\nexponent against the lower end of the window:");
    for (lo, f) in exponent_stability(&run.curve, &log_grid(window.0 / 2.0, window.1 / 4.0, 8), window.1) {
        println!("  t_min {lo:>9.3}: {:.4} ± {:.4}", f.exponent, f.stderr_exponent);
    }
    Ok(())
}
