//! Private classification by objective perturbation.

use dpkernel::data::{gen_synthetic, median, SyntheticSpec};
use dpkernel::erm::{fit_objpert, ObjpertConfig, Seeds};
use dpkernel::kernel::KernelSpec;
use dpkernel::loss::LossSpec;
use dpkernel::privacy::{FeatureKind, PrivacyBudget};

fn accuracy(pred: &[f64], labels: &[f64]) -> f64 {
    pred.iter().zip(labels).filter(|(p, y)| p.signum() == **y).count() as f64 / labels.len() as f64
}

fn main() -> dpkernel::Result<()> {
    let (train, test) = gen_synthetic(&SyntheticSpec::new(5, 2000, 500, 8))?;
    let threshold = median(&train.y);
    let (train, test) = (train.to_labels(threshold), test.to_labels(threshold));
    let kernel = KernelSpec::gaussian(1.0)?;

    for loss in [LossSpec::logistic(), LossSpec::huber(0.5)?] {
        for kind in [FeatureKind::Rp, FeatureKind::Rff] {
            for eps in [0.5, 2.0, 8.0] {
                let cfg = ObjpertConfig {
                    m: 50,
                    lambda: 1e-3,
                    loss,
                    budget: PrivacyBudget::new(eps, 1e-4)?,
                };
                let model = fit_objpert(&train.x, &train.y, kind, kernel, &cfg, Seeds::from_base(5), &test.x)?;
                println!(
                    "{:<8} {kind:?} eps {eps:>3}: lambda0 {:.2e}, test accuracy {:.3}",
                    loss.name(),
                    model.lambda_effective,
                    accuracy(&model.predict_many(&test.x)?, &test.y)
                );
            }
        }
    }
    Ok(())
}
