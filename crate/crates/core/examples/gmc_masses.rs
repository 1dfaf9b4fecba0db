//! Bulk, boundary and localized GMC masses of grid fields, with their exact
//! means.

use gmclab::fieldsim::{build_cov, build_grid, sample_replica};
use gmclab::gmc::{bdy_mass, bulk_mass, bulk_weights, localized_bdy_mass, localized_bulk_mass, GmcParams};
use gmclab::kernels::KernelSpec;
use gmclab::{rng, stats};

fn main() -> gmclab::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20_000);
    let grid = build_grid(0.5, 8, 16)?;
    let f = build_cov(&grid, &KernelSpec::ExactScalingNeumann, true)?;
    let params = GmcParams::new(1.0, 0.5)?;
    let (all, whole) = (grid.all_cells(), grid.all_segments());

    let x = sample_replica(&f, 7, 0);
    let near = grid.half_disk(0.0, 0.25);
    println!("one draw:");
    println!("  μ^H(Q_r)        = {:.4}", bulk_mass(&x, &f, &grid, &params, &all)?);
    println!("  μ^∂(I_r)        = {:.4}", bdy_mass(&x, &f, &grid, &params, &whole)?);
    println!("  μ^H_0(Q(0,1/4)) = {:.4}", localized_bulk_mass(&x, &f, &grid, &params, 0.0, &near)?);
    println!("  μ^∂_0(I_r)      = {:.4}", localized_bdy_mass(&x, &f, &grid, &params, 0.0, &whole)?.mass);

    let masses = rng::replicas(n, |i| {
        let x = sample_replica(&f, 8, i as u64);
        (bulk_mass(&x, &f, &grid, &params, &all).unwrap(), bdy_mass(&x, &f, &grid, &params, &whole).unwrap())
    });
    let (mh, sh) = stats::mean_stderr(&masses.iter().map(|m| m.0).collect::<Vec<_>>());
    let (mb, sb) = stats::mean_stderr(&masses.iter().map(|m| m.1).collect::<Vec<_>>());
    let target: f64 = bulk_weights(&grid, 1.0).iter().sum();
    println!("\nover {n} draws:");
    println!("  E[μ^H(Q_r)] = {mh:.4} ± {sh:.4}  (Σ w_i = {target:.4})");
    println!("  E[μ^∂(I_r)] = {mb:.4} ± {sb:.4}  (2r = 1)");
    Ok(())
}
