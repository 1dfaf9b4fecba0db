//! How much of the localized tail integrand comes from outside the
//! neighbourhood of the localization point.

use gmclab::fieldsim::{build_cov, build_grid};
use gmclab::gmc::GmcParams;
use gmclab::kernels::KernelSpec;
use gmclab::stats;
use gmclab::tailest::{locality_gap_from, localized_mass_pairs};

fn main() -> gmclab::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20_000);
    let grid = build_grid(0.5, 16, 32)?;
    let f = build_cov(&grid, &KernelSpec::ExactScalingNeumann, true)?;
    let params = GmcParams::new(1.0, 0.5)?;
    let pairs = localized_mass_pairs(&params, &grid, &f, 0.0, 0.125, n, 9)?;
    let full: Vec<f64> = pairs.iter().map(|p| p[0]).collect();
    let ts: Vec<f64> = [0.5, 0.9, 0.99].iter().map(|&q| stats::quantile(&full, q)).collect();
    println!("{:>9} {:>11} {:>11} {:>11} {:>8}", "t", "full", "local", "gap", "|gap|/local");
    for g in locality_gap_from(&pairs, &ts) {
        println!("{:>9.3} {:>11.4e} {:>11.4e} {:>11.4e} {:>8.4}", g.t, g.full, g.local, g.gap, g.gap.abs() / g.local);
    }
    Ok(())
}
