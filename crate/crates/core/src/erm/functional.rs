//! Functional perturbation: the exact RKHS minimizer plus a scaled GP path.

use nalgebra::DMatrix;

use super::ridge::merge_anchors;
use super::{check_training_data, FittedModel, Method, ModelParams, Seeds, UClip};
use crate::error::{Error, Result};
use crate::gp::{sample_projection, GpProjectionMap};
use crate::kernel::KernelSpec;
use crate::linalg::Cholesky;
use crate::loss::LossSpec;
use crate::privacy::{self, PrivacyBudget};

use super::objpert::minimize_perturbed;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunctionalConfig {
    pub lambda: f64,
    pub loss: LossSpec,
    /// Required for the squared loss: responses are truncated to `[-T, T]`
    /// and `2T` serves as its Lipschitz constant on that range.
    pub truncation: Option<f64>,
    pub budget: PrivacyBudget,
}

/// `f(x) = sum_i alpha_i k(x_i, x) + noise_scale * h(x)`.
#[derive(Debug, Clone)]
pub struct FunctionalPart {
    pub train: Vec<Vec<f64>>,
    pub alpha: Vec<f64>,
    pub noise_scale: f64,
    /// One GP path, realized at the training and evaluation points.
    pub noise: GpProjectionMap,
}

impl FunctionalPart {
    /// The non-private part `f_hat(x)`.
    pub fn mean(&self, kernel: KernelSpec, x: &[f64]) -> Result<f64> {
        let mut acc = 0.0;
        for (p, a) in self.train.iter().zip(&self.alpha) {
            acc += a * kernel.eval(p, x)?;
        }
        Ok(acc)
    }

    pub fn predict(&self, kernel: KernelSpec, x: &[f64]) -> Result<f64> {
        let mean = self.mean(kernel, x)?;
        if self.noise_scale == 0.0 {
            return Ok(mean);
        }
        Ok(mean + self.noise_scale * self.noise.path_row(x)?[0])
    }
}

fn representer_coefficients(
    kernel: KernelSpec,
    x: &[Vec<f64>],
    y: &[f64],
    cfg: &FunctionalConfig,
) -> Result<(Vec<f64>, f64)> {
    let n = x.len();
    let gram = kernel.gram(x)?.entries;
    match cfg.loss.c1() {
        None => {
            let t = match cfg.truncation {
                Some(t) if t > 0.0 && t.is_finite() => t,
                _ => {
                    return Err(Error::config(
                        "functional perturbation with the squared loss needs a truncation level T",
                    ))
                }
            };
            let yt: Vec<f64> = y.iter().map(|&v| privacy::truncate_response(v, t)).collect();
            let shifted = &gram + DMatrix::identity(n, n) * (n as f64 * cfg.lambda);
            let chol = Cholesky::with_jitter_ladder(&shifted, kernel.kappa_sq())?;
            Ok((chol.solve(&yt), 2.0 * t))
        }
        Some(c1) => {
            cfg.loss.check_labels(y)?;
            // With K = L L^T and theta = L^T alpha the problem is a
            // regularized linear model on the rows of L.
            let chol = Cholesky::with_jitter_ladder(&gram, kernel.kappa_sq())?;
            let l = chol.to_dmatrix();
            let theta = minimize_perturbed(&l, y, cfg.loss, cfg.lambda, &vec![0.0; n])?;
            Ok((chol.backward_solve(&theta), c1))
        }
    }
}

/// Regularized ERM over the whole RKHS, released with an additive GP path
/// scaled by `c1 kappa (1 + sqrt(2 log(1/delta))) / (n lambda eps)`.
///
/// The path is sampled jointly at the training points and `eval_points`;
/// predictions elsewhere extend it conditionally.
pub fn fit_functional_pert(
    x: &[Vec<f64>],
    y: &[f64],
    kernel: KernelSpec,
    cfg: &FunctionalConfig,
    seeds: Seeds,
    eval_points: &[Vec<f64>],
) -> Result<FittedModel> {
    check_training_data(x, y)?;
    if !(cfg.lambda > 0.0 && cfg.lambda.is_finite()) {
        return Err(Error::config(format!("lambda must be positive, got {}", cfg.lambda)));
    }
    let (alpha, c1) = representer_coefficients(kernel, x, y, cfg)?;
    let noise_scale = privacy::functional_noise_scale(c1, kernel.kappa_sq(), x.len(), cfg.lambda, &cfg.budget)?;
    let anchors = merge_anchors(x, eval_points);
    let noise = sample_projection(kernel, &anchors, 1, seeds.noise)?;
    let mut model = FittedModel {
        method: Method::FunctionalPert,
        kernel,
        lambda: cfg.lambda,
        lambda_effective: cfg.lambda,
        budget: cfg.budget,
        seeds,
        loss: cfg.loss,
        truncation: if cfg.loss.is_margin() { None } else { cfg.truncation },
        u_clip: UClip::Elementwise,
        params: ModelParams::Functional(FunctionalPart {
            train: x.to_vec(),
            alpha,
            noise_scale,
            noise,
        }),
        standardizer: None,
        response_shift: None,
        self_test: Vec::new(),
    };
    model.record_self_test(x)?;
    Ok(model)
}
