//! Parameter witnesses for the two inequality systems of the tail bounds.

use gmclab::tailest::{feasible_params, slacks, ParamSystem};

fn main() -> gmclab::Result<()> {
    for gamma in [0.5, 1.0, 2f64.sqrt(), 1.8] {
        for system in [ParamSystem::Upper, ParamSystem::Lower] {
            let w = feasible_params(gamma, system)?;
            let min = slacks(gamma, &w).into_iter().fold(f64::INFINITY, f64::min);
            println!(
                "γ = {gamma:.4} {system}: p = {:.6}, η = {:.6}, δ = {:.3e}, Δp = {:.3e}, min slack {min:.2e}",
                w.p, w.eta, w.delta, w.dp
            );
        }
    }
    Ok(())
}
