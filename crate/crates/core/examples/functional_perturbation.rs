//! Functional perturbation: exact kernel ridge plus a scaled GP sample path.

use dpkernel::data::{gen_synthetic, mse, SyntheticSpec};
use dpkernel::erm::{fit_functional_pert, FunctionalConfig, ModelParams, Seeds};
use dpkernel::kernel::KernelSpec;
use dpkernel::loss::LossSpec;
use dpkernel::privacy::PrivacyBudget;

fn main() -> dpkernel::Result<()> {
    let (train, test) = gen_synthetic(&SyntheticSpec::new(3, 400, 200, 21))?;
    let kernel = KernelSpec::gaussian(1.0)?;
    let signal = test.signal.as_ref().unwrap();
    for eps in [1.0, 10.0, 100.0] {
        let cfg = FunctionalConfig {
            lambda: 1e-2,
            loss: LossSpec::squared(),
            truncation: Some(10.1),
            budget: PrivacyBudget::new(eps, 1e-3)?,
        };
        // The noise path is realized jointly at the training and test points.
        let model = fit_functional_pert(&train.x, &train.y, kernel, &cfg, Seeds::from_base(1), &test.x)?;
        let ModelParams::Functional(part) = &model.params else {
            unreachable!()
        };
        let exact: Vec<f64> = test.x.iter().map(|x| part.mean(kernel, x)).collect::<Result<_, _>>()?;
        println!(
            "eps {eps:>5}: noise scale {:.4}, private mse {:.4}, non-private mse {:.4}",
            part.noise_scale,
            mse(&model.predict_many(&test.x)?, signal)?,
            mse(&exact, signal)?
        );
    }
    Ok(())
}
