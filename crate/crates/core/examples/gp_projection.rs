//! Samples a GP random projection and extends it lazily to new points.

use dpkernel::gp::{norm_bound, GpSampler};
use dpkernel::kernel::KernelSpec;
use dpkernel::rng;

fn main() -> dpkernel::Result<()> {
    let kernel = KernelSpec::gaussian(1.0)?;
    let mut s = rng::stream(11);
    let anchors: Vec<Vec<f64>> = (0..50)
        .map(|_| vec![rng::uniform(&mut s), rng::uniform(&mut s)])
        .collect();

    let m = 400;
    let map = GpSampler::new(kernel, &anchors)?.sample(m, 2024)?;
    println!(
        "{} paths at {} anchors, jitter {:e}",
        map.dim(),
        anchors.len(),
        map.jitter()
    );

    // <h(x), h(y)> approximates k(x, y).
    let (a, b) = (&anchors[0], &anchors[1]);
    let (fa, fb) = (map.feature(a)?, map.feature(b)?);
    let dot: f64 = fa.iter().zip(&fb).map(|(u, v)| u * v).sum();
    println!("<h(a), h(b)> = {dot:.4}, k(a, b) = {:.4}", kernel.eval(a, b)?);

    // A point outside the anchor set is drawn from the conditional law and cached.
    let fresh = vec![0.25, 0.75];
    let f1 = map.feature(&fresh)?;
    let f2 = map.feature(&fresh)?;
    println!(
        "new point: {} extensions, repeat query identical: {}",
        map.extension_count(),
        f1 == f2
    );

    let bound = norm_bound(kernel.kappa_sq(), m, 0.01)?;
    let norm_sq: f64 = f1.iter().map(|v| v * v).sum();
    println!("||h(x)||^2 = {norm_sq:.4}, 99% bound {bound:.4}");
    Ok(())
}
