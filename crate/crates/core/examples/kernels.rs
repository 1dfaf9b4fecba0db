//! Covariance kernels: the Neumann kernel, its semicircle averages and the
//! lateral (cylinder) covariance.

use gmclab::kernels::{
    eval_lateral, lateral_angular_average, quadrature_cov, semicircle_avg_cov, HalfPlanePoint, KernelSpec, Perturbation,
};

fn main() -> gmclab::Result<()> {
    let z = HalfPlanePoint::new(0.1, 0.3)?;
    let w = HalfPlanePoint::new(-0.2, 0.05)?;
    for k in [KernelSpec::ExactScalingNeumann, KernelSpec::Perturbed(Perturbation::constant(0.5))] {
        println!("{:<28} K(z, w) = {:.6}", k.name(), k.eval(z, w)?);
    }

    println!("\nsemicircle averages (should equal 2 min(s, t))");
    for (s, t) in [(1.0, 2.0), (0.5, 0.5), (0.25, 1.0), (2.0, 0.5)] {
        let q = quadrature_cov(s, t, 2048, 1e-6)?;
        println!("  s = {s:<4} t = {t:<4} quad = {q:.9}  exact = {}", semicircle_avg_cov(s, t));
    }

    println!("\nlateral covariance depends on t − t2 only, and has zero angular mean");
    let a = eval_lateral(0.3, 0.4, 1.1, 2.0)?;
    let b = eval_lateral(2.3, 0.4, 3.1, 2.0)?;
    println!("  shifted by 2: {a:.12} vs {b:.12}");
    for (t, t2) in [(0.0, 0.0), (0.0, 1.0), (0.5, 3.0)] {
        println!("  angular average at ({t}, {t2}): {:.2e}", lateral_angular_average(t, t2, 1024));
    }
    Ok(())
}
