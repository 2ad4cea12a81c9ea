//! Noise magnitudes of every mechanism across a range of budgets.

use dpkernel::privacy::{self, FeatureKind, PrivacyBudget};

fn main() -> dpkernel::Result<()> {
    let (n, m, t) = (1000, 100, 1.0);
    let loss = dpkernel::loss::LossSpec::logistic();
    let (c1, c2) = (loss.c1().unwrap(), loss.c2().unwrap());
    println!("n = {n}, M = {m}, T = {t}, delta = 1e-3");
    println!(
        "{:>8} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "eps", "rp C", "rp u", "rff C", "op_rp b", "op floor", "functional"
    );
    for eps in [0.1, 0.3, 1.0, 3.0, 10.0, f64::INFINITY] {
        let b = if eps.is_finite() {
            PrivacyBudget::new(eps, 1e-3)?
        } else {
            PrivacyBudget::non_private(1e-3)?
        };
        let rp = privacy::ridge_scales_rp(1.0, t, m, n, &b)?;
        let rff = privacy::ridge_scales_rff(t, n, &b)?;
        let op = privacy::objpert_scales(1.0, m, n, c1, c2, 0.0, &b, FeatureKind::Rp)?;
        let fp = privacy::functional_noise_scale(2.0 * t, 1.0, n, 1e-2, &b)?;
        println!(
            "{eps:>8} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.2e} {:>10.4}",
            rp.ridge_c_scale, rp.ridge_u_scale, rff.ridge_c_scale, op.objpert_b_std, op.lambda_floor, fp
        );
    }

    // Sequential composition adds budgets.
    let total = PrivacyBudget::new(0.5, 1e-4)?.compose(PrivacyBudget::new(1.0, 1e-4)?)?;
    println!("composed: eps {}, delta {}", total.epsilon(), total.delta());
    Ok(())
}
