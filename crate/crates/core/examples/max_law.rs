//! The overall maximum of the radial drift process and the prefactor
//! identity it yields.

use gmclab::radial::{prefactor_identity, sample_max_batch, DriftSpec};
use gmclab::stats;

fn main() -> gmclab::Result<()> {
    let n = 1_000_000;
    for gamma in [1.0, 2f64.sqrt()] {
        let spec = DriftSpec::new(gamma)?;
        let m = sample_max_batch(&spec, 3, n);
        let ks = stats::ks_distance(&m, |x| 1.0 - (-spec.alpha * x).exp());
        println!("γ = {gamma:.4}: α = {:.4}, KS distance to Exponential(α) = {ks:.5}", spec.alpha);
        for ratio in [2.0, 10.0] {
            let ys: Vec<f64> =
                m.iter().map(|&x| if (gamma * x).exp() > ratio { (-0.5 * gamma * x).exp() } else { 0.0 }).collect();
            let (mean, se) = stats::mean_stderr(&ys);
            println!("  t/C = {ratio:>4}: MC {mean:.6} ± {se:.6}, closed form {:.6}", prefactor_identity(gamma, 1.0, ratio));
        }
    }
    Ok(())
}
