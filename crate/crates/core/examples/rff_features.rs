//! Random Fourier features for shift-invariant kernels.

use dpkernel::kernel::KernelSpec;
use dpkernel::rff::sample_rff;

fn main() -> dpkernel::Result<()> {
    let x = vec![0.1, 0.2, 0.3];
    let y = vec![0.4, 0.1, -0.2];
    for kernel in [KernelSpec::gaussian(1.0)?, KernelSpec::laplace(1.0)?] {
        for m in [10, 100, 1000, 10000] {
            let map = sample_rff(kernel, 3, m, 99)?;
            let (fx, fy) = (map.feature(&x)?, map.feature(&y)?);
            let approx: f64 = fx.iter().zip(&fy).map(|(a, b)| a * b).sum();
            let norm: f64 = fx.iter().map(|v| v * v).sum();
            println!(
                "{:<8} M = {m:>5}: approx {approx:.4} exact {:.4}  ||phi||^2 = {norm:.3}",
                kernel.name(),
                kernel.eval(&x, &y)?
            );
        }
    }

    // The linear kernel has no spectral density.
    println!(
        "linear: {}",
        sample_rff(KernelSpec::linear(1.0)?, 3, 10, 1).unwrap_err()
    );
    Ok(())
}
