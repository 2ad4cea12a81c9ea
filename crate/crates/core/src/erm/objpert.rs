//! Objective perturbation for Lipschitz, smooth margin losses.

use nalgebra::{DMatrix, DVector};

use super::ridge::merge_anchors;
use super::{check_training_data, FeatureMap, FittedModel, Method, ModelParams, Seeds, UClip};
use crate::error::{Error, Result};
use crate::gp::sample_projection;
use crate::kernel::KernelSpec;
use crate::loss::LossSpec;
use crate::optim::{lbfgs, LbfgsOptions, Objective};
use crate::privacy::{self, FeatureKind, PrivacyBudget};
use crate::rff::sample_rff;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjpertConfig {
    pub m: usize,
    pub lambda: f64,
    pub loss: LossSpec,
    pub budget: PrivacyBudget,
}

/// `F(beta) = (1/n) sum_i l(y_i, z_i . beta) + (lambda0/2) ||beta||^2 + b . beta / n`.
pub struct PerturbedObjective<'a> {
    pub z: &'a DMatrix<f64>,
    pub y: &'a [f64],
    pub loss: LossSpec,
    pub lambda0: f64,
    pub b: &'a [f64],
}

impl Objective for PerturbedObjective<'_> {
    fn dim(&self) -> usize {
        self.z.ncols()
    }

    fn eval(&self, beta: &[f64], grad: &mut [f64]) -> f64 {
        let n = self.z.nrows() as f64;
        let pred = self.z * DVector::from_column_slice(beta);
        let mut value = 0.0;
        let mut dl = DVector::zeros(self.z.nrows());
        for (i, (&p, &y)) in pred.iter().zip(self.y).enumerate() {
            value += self.loss.value_unchecked(y, p);
            dl[i] = self.loss.grad_unchecked(y, p) / n;
        }
        value /= n;
        let g = self.z.tr_mul(&dl);
        let mut sq = 0.0;
        let mut lin = 0.0;
        for j in 0..beta.len() {
            grad[j] = g[j] + self.lambda0 * beta[j] + self.b[j] / n;
            sq += beta[j] * beta[j];
            lin += self.b[j] * beta[j];
        }
        value + 0.5 * self.lambda0 * sq + lin / n
    }
}

/// Minimizes [`PerturbedObjective`] from `beta = 0`.
///
/// Passing `b = 0` gives the non-private regularized ERM solution.
pub fn minimize_perturbed(z: &DMatrix<f64>, y: &[f64], loss: LossSpec, lambda0: f64, b: &[f64]) -> Result<Vec<f64>> {
    if !loss.is_margin() {
        return Err(Error::config("objective perturbation needs the logistic or huber loss"));
    }
    if z.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: z.nrows(),
            got: y.len(),
        });
    }
    if b.len() != z.ncols() {
        return Err(Error::DimensionMismatch {
            expected: z.ncols(),
            got: b.len(),
        });
    }
    if !(lambda0 > 0.0 && lambda0.is_finite()) {
        return Err(Error::config(format!(
            "effective penalty must be positive, got {lambda0}"
        )));
    }
    loss.check_labels(y)?;
    let objective = PerturbedObjective { z, y, loss, lambda0, b };
    let opts = LbfgsOptions::for_dim(z.ncols());
    Ok(lbfgs(&objective, &vec![0.0; z.ncols()], &opts)?.x)
}

/// Private margin-loss classification on GP projection (`Rp`) or Fourier
/// (`Rff`) features.
///
/// The perturbation `b` is drawn from the stream keyed by `seeds.noise`. The
/// penalty is raised to the privacy floor when `lambda` is below it.
pub fn fit_objpert(
    x: &[Vec<f64>],
    y: &[f64],
    features: FeatureKind,
    kernel: KernelSpec,
    cfg: &ObjpertConfig,
    seeds: Seeds,
    extra_anchors: &[Vec<f64>],
) -> Result<FittedModel> {
    check_training_data(x, y)?;
    let (Some(c1), Some(c2)) = (cfg.loss.c1(), cfg.loss.c2()) else {
        return Err(Error::config("objective perturbation needs the logistic or huber loss"));
    };
    cfg.loss.check_labels(y)?;
    if !(cfg.lambda >= 0.0 && cfg.lambda.is_finite()) {
        return Err(Error::config(format!("lambda must be nonnegative, got {}", cfg.lambda)));
    }
    if cfg.lambda == 0.0 && !cfg.budget.is_private() {
        return Err(Error::config(
            "lambda = 0 with epsilon = inf leaves the objective without a penalty",
        ));
    }
    if cfg.m == 0 {
        return Err(Error::config("projection dimension M must be at least 1"));
    }
    let n = x.len();
    let scales = privacy::objpert_scales(kernel.kappa_sq(), cfg.m, n, c1, c2, cfg.lambda, &cfg.budget, features)?;
    let lambda0 = scales.effective_lambda(cfg.lambda);
    let mut s = rng::stream(seeds.noise);
    let b: Vec<f64> = rng::normals(&mut s, cfg.m)
        .into_iter()
        .map(|v| v * scales.objpert_b_std)
        .collect();

    let (method, map, z) = match features {
        FeatureKind::Rp => {
            let anchors = merge_anchors(x, extra_anchors);
            let map = sample_projection(kernel, &anchors, cfg.m, seeds.map)?;
            let z = map.anchor_features().rows(0, n).into_owned();
            (Method::RpObjpert, FeatureMap::Rp(map), z)
        }
        FeatureKind::Rff => {
            let map = sample_rff(kernel, x[0].len(), cfg.m, seeds.map)?;
            let z = map.features(x)?;
            (Method::RffObjpert, FeatureMap::Rff(map), z)
        }
    };
    let beta = minimize_perturbed(&z, y, cfg.loss, lambda0, &b)?;
    let mut model = FittedModel {
        method,
        kernel,
        lambda: cfg.lambda,
        lambda_effective: lambda0,
        budget: cfg.budget,
        seeds,
        loss: cfg.loss,
        truncation: None,
        u_clip: UClip::Elementwise,
        params: ModelParams::Linear { map, beta },
        standardizer: None,
        response_shift: None,
        self_test: Vec::new(),
    };
    model.record_self_test(x)?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut s = rng::stream(seed);
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![rng::uniform(&mut s), rng::uniform(&mut s)])
            .collect();
        let y = x
            .iter()
            .map(|r| {
                if r[0] + 0.3 * rng::normal(&mut s) > 0.5 {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect();
        (x, y)
    }

    fn cfg(loss: LossSpec, lambda: f64, eps: f64) -> ObjpertConfig {
        ObjpertConfig {
            m: 20,
            lambda,
            loss,
            budget: PrivacyBudget::new(eps, 1e-4).unwrap(),
        }
    }

    #[test]
    fn zero_perturbation_solves_the_erm() {
        let (x, y) = toy(80, 1);
        let map = sample_rff(KernelSpec::gaussian(0.5).unwrap(), 2, 15, 3).unwrap();
        let z = map.features(&x).unwrap();
        for loss in [LossSpec::logistic(), LossSpec::huber(0.5).unwrap()] {
            let b = vec![0.0; 15];
            let beta = minimize_perturbed(&z, &y, loss, 1e-3, &b).unwrap();
            let obj = PerturbedObjective {
                z: &z,
                y: &y,
                loss,
                lambda0: 1e-3,
                b: &b,
            };
            let mut g = vec![0.0; 15];
            obj.eval(&beta, &mut g);
            let mut g0 = vec![0.0; 15];
            obj.eval(&[0.0; 15], &mut g0);
            let tol = 1e-9 * g0.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            assert!(g.iter().all(|v| v.abs() <= tol), "{loss}");
        }
    }

    #[test]
    fn huge_penalty_norm_bound() {
        let (x, y) = toy(50, 2);
        let map = sample_rff(KernelSpec::gaussian(1.0).unwrap(), 2, 10, 4).unwrap();
        let z = map.features(&x).unwrap();
        let mut s = rng::stream(6);
        let b = rng::normals(&mut s, 10);
        let lambda0 = 1e6;
        let beta = minimize_perturbed(&z, &y, LossSpec::logistic(), lambda0, &b).unwrap();
        let zmax = z.row_iter().map(|r| r.norm()).fold(0.0, f64::max);
        let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        let norm = beta.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm <= (zmax + bnorm / 50.0) / lambda0);
    }

    #[test]
    fn rejects_invalid_inputs() {
        let (x, y) = toy(20, 3);
        let k = KernelSpec::gaussian(1.0).unwrap();
        let seeds = Seeds::from_base(1);
        assert!(matches!(
            fit_objpert(
                &x,
                &y,
                FeatureKind::Rp,
                k,
                &cfg(LossSpec::squared(), 0.1, 1.0),
                seeds,
                &[]
            ),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            fit_objpert(
                &x,
                &y,
                FeatureKind::Rp,
                k,
                &cfg(LossSpec::logistic(), 0.0, f64::INFINITY),
                seeds,
                &[]
            ),
            Err(Error::Config(_))
        ));
        let real: Vec<f64> = y.iter().map(|v| v * 0.5).collect();
        assert!(matches!(
            fit_objpert(
                &x,
                &real,
                FeatureKind::Rff,
                k,
                &cfg(LossSpec::logistic(), 0.1, 1.0),
                seeds,
                &[]
            ),
            Err(Error::InvalidLabel { .. })
        ));
    }

    #[test]
    fn penalty_floor_applies() {
        let (x, y) = toy(40, 4);
        let k = KernelSpec::gaussian(1.0).unwrap();
        let m = fit_objpert(
            &x,
            &y,
            FeatureKind::Rff,
            k,
            &cfg(LossSpec::logistic(), 0.0, 1.0),
            Seeds::from_base(2),
            &[],
        )
        .unwrap();
        let expected = 2.0 * 0.25 / (40.0 * (0.25f64).exp_m1());
        assert!((m.lambda_effective - expected).abs() < 1e-12 * expected);
        let m = fit_objpert(
            &x,
            &y,
            FeatureKind::Rp,
            k,
            &cfg(LossSpec::logistic(), 0.1, f64::INFINITY),
            Seeds::from_base(2),
            &[],
        )
        .unwrap();
        assert_eq!(m.lambda_effective, 0.1);
    }
}
