//! Gram matrices and effective dimension for the three kernel families.

use dpkernel::kernel::{effective_dimension, KernelSpec};
use dpkernel::rng;

fn main() -> dpkernel::Result<()> {
    let mut s = rng::stream(7);
    let points: Vec<Vec<f64>> = (0..200)
        .map(|_| (0..3).map(|_| rng::uniform(&mut s)).collect())
        .collect();

    for kernel in [
        KernelSpec::gaussian(0.5)?,
        KernelSpec::laplace(1.0)?,
        KernelSpec::linear(3.0)?,
    ] {
        let gram = kernel.gram(&points)?;
        let ev = gram.eigenvalues_desc();
        print!(
            "{:<9} kappa^2 = {:.2}  top eigenvalues",
            kernel.name(),
            kernel.kappa_sq()
        );
        for v in &ev[..4] {
            print!(" {v:8.3}");
        }
        println!();
        for lambda in [1e-1, 1e-2, 1e-3] {
            let d = effective_dimension(&ev, points.len(), lambda)?;
            println!("    d_eff(lambda = {lambda:.0e}) = {d:.2}");
        }
    }
    Ok(())
}
