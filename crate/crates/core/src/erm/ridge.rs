//! Kernel ridge regression by perturbing the sufficient statistics
//! `C = Z^T Z / n` and `u = Z^T [y]_T / n` of the projected problem.

use nalgebra::{DMatrix, DVector};

use super::{check_training_data, FeatureMap, FittedModel, Method, ModelParams, Seeds, UClip};
use crate::error::{Error, Result};
use crate::gp::sample_projection;
use crate::kernel::KernelSpec;
use crate::linalg::SymmetricSolver;
use crate::loss::LossSpec;
use crate::privacy::{self, PrivacyBudget};
use crate::rff::sample_rff;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RidgeConfig {
    /// Projection dimension `M`.
    pub m: usize,
    pub lambda: f64,
    /// Truncation level `T`.
    pub truncation: f64,
    pub budget: PrivacyBudget,
    pub u_clip: UClip,
}

impl RidgeConfig {
    fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::config(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.truncation > 0.0 && self.truncation.is_finite()) {
            return Err(Error::config(format!(
                "truncation level T must be positive, got {}",
                self.truncation
            )));
        }
        if self.m == 0 {
            return Err(Error::config("projection dimension M must be at least 1"));
        }
        Ok(())
    }
}

/// `(C_hat, u_hat)` of the projected least-squares problem.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStats {
    pub c_hat: DMatrix<f64>,
    pub u_hat: DVector<f64>,
    pub n: usize,
    pub truncation: f64,
}

/// Builds the statistics from the feature matrix `z` (one row per sample).
///
/// `C_hat` is symmetric bit for bit. With [`UClip::Elementwise`] responses
/// are truncated to `[-T, T]`; with [`UClip::L2Norm`] the raw `u` is scaled
/// down to norm `T` when longer.
pub fn sufficient_stats(z: &DMatrix<f64>, y: &[f64], truncation: f64, clip: UClip) -> Result<SufficientStats> {
    let n = z.nrows();
    if n != y.len() {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    let inv_n = 1.0 / n as f64;
    let mut c_hat = z.tr_mul(z) * inv_n;
    let m = c_hat.nrows();
    for i in 0..m {
        for j in 0..i {
            c_hat[(i, j)] = c_hat[(j, i)];
        }
    }
    let u_hat = match clip {
        UClip::Elementwise => {
            let yt = DVector::from_iterator(n, y.iter().map(|&v| privacy::truncate_response(v, truncation)));
            z.tr_mul(&yt) * inv_n
        }
        UClip::L2Norm => {
            let u = z.tr_mul(&DVector::from_column_slice(y)) * inv_n;
            let norm = u.norm();
            if norm > truncation {
                u * (truncation / norm)
            } else {
                u
            }
        }
    };
    Ok(SufficientStats {
        c_hat,
        u_hat,
        n,
        truncation,
    })
}

/// Privatized statistics `(C~, u~)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrivateStats {
    pub c_tilde: DMatrix<f64>,
    pub u_tilde: DVector<f64>,
}

/// `C~ = C_hat + c_scale (E + E^T)/2`, `u~ = u_hat + u_scale e`, with `E`
/// (row by row) and then `e` drawn from the stream keyed by `seed`.
///
/// The draws are made even when a scale is zero, so the noise for a given
/// seed does not depend on the budget.
pub fn privatize(stats: &SufficientStats, c_scale: f64, u_scale: f64, seed: u64) -> PrivateStats {
    let m = stats.c_hat.nrows();
    let mut s = rng::stream(seed);
    let e = DMatrix::from_row_slice(m, m, &rng::normals(&mut s, m * m));
    let mut c_tilde = stats.c_hat.clone();
    for i in 0..m {
        for j in i..m {
            let v = c_tilde[(i, j)] + c_scale * (0.5 * (e[(i, j)] + e[(j, i)]));
            c_tilde[(i, j)] = v;
            c_tilde[(j, i)] = v;
        }
    }
    let noise = DVector::from_vec(rng::normals(&mut s, m));
    let u_tilde = &stats.u_hat + noise * u_scale;
    PrivateStats { c_tilde, u_tilde }
}

/// Solves `(C~ + lambda I) beta = u~` for several `lambda` from one
/// eigendecomposition. `C~` may be indefinite.
#[derive(Debug, Clone)]
pub struct RidgeSolver {
    solver: SymmetricSolver,
    u: DVector<f64>,
}

impl RidgeSolver {
    pub fn new(stats: &PrivateStats) -> Self {
        Self {
            solver: SymmetricSolver::new(stats.c_tilde.clone()),
            u: stats.u_tilde.clone(),
        }
    }

    pub fn condition(&self, lambda: f64) -> f64 {
        self.solver.condition(lambda)
    }

    pub fn solve(&self, lambda: f64) -> Result<Vec<f64>> {
        Ok(self.solver.solve_shifted(lambda, &self.u)?.as_slice().to_vec())
    }
}

/// Standard deviations of the noise on `C` and on `u`.
pub(crate) fn ridge_noise(
    method: Method,
    kernel: KernelSpec,
    m: usize,
    n: usize,
    truncation: f64,
    budget: &PrivacyBudget,
    clip: UClip,
) -> Result<(f64, f64)> {
    match method {
        Method::RpRidge => {
            let s = privacy::ridge_scales_rp(kernel.kappa_sq(), truncation, m, n, budget)?;
            let u = match clip {
                UClip::Elementwise => s.ridge_u_scale,
                UClip::L2Norm => privacy::l2clip_u_scale(truncation, n, budget)?,
            };
            Ok((s.ridge_c_scale, u))
        }
        Method::RffRidge => {
            if clip == UClip::L2Norm {
                return Err(Error::config("l2norm clipping is only defined for rp_ridge"));
            }
            let s = privacy::ridge_scales_rff(truncation, n, budget)?;
            Ok((s.ridge_c_scale, s.ridge_u_scale))
        }
        other => Err(Error::config(format!("{other} is not a ridge method"))),
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    method: Method,
    kernel: KernelSpec,
    map: FeatureMap,
    z: &DMatrix<f64>,
    x: &[Vec<f64>],
    y: &[f64],
    cfg: &RidgeConfig,
    seeds: Seeds,
) -> Result<FittedModel> {
    let stats = sufficient_stats(z, y, cfg.truncation, cfg.u_clip)?;
    let (c_scale, u_scale) = ridge_noise(method, kernel, cfg.m, y.len(), cfg.truncation, &cfg.budget, cfg.u_clip)?;
    let private = privatize(&stats, c_scale, u_scale, seeds.noise);
    let beta = RidgeSolver::new(&private).solve(cfg.lambda)?;
    let mut model = FittedModel {
        method,
        kernel,
        lambda: cfg.lambda,
        lambda_effective: cfg.lambda,
        budget: cfg.budget,
        seeds,
        loss: LossSpec::squared(),
        truncation: Some(cfg.truncation),
        u_clip: cfg.u_clip,
        params: ModelParams::Linear { map, beta },
        standardizer: None,
        response_shift: None,
        self_test: Vec::new(),
    };
    model.record_self_test(x)?;
    Ok(model)
}

/// Points of `extra` that are neither in `x` nor repeated.
pub(crate) fn merge_anchors(x: &[Vec<f64>], extra: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut seen: std::collections::HashSet<Vec<u64>> = x.iter().map(|p| rng::point_key(p)).collect();
    let mut anchors = x.to_vec();
    for p in extra {
        if seen.insert(rng::point_key(p)) {
            anchors.push(p.clone());
        }
    }
    anchors
}

/// Private kernel ridge regression on the GP random projection.
///
/// The projection paths are realized jointly at the training points and at
/// `extra_anchors` (for example a test set); predictions elsewhere use the
/// conditional extension.
pub fn fit_rp_ridge(
    x: &[Vec<f64>],
    y: &[f64],
    kernel: KernelSpec,
    cfg: &RidgeConfig,
    seeds: Seeds,
    extra_anchors: &[Vec<f64>],
) -> Result<FittedModel> {
    check_training_data(x, y)?;
    cfg.validate()?;
    let anchors = merge_anchors(x, extra_anchors);
    let map = sample_projection(kernel, &anchors, cfg.m, seeds.map)?;
    let all = map.anchor_features();
    let z = all.rows(0, x.len()).into_owned();
    finish(Method::RpRidge, kernel, FeatureMap::Rp(map), &z, x, y, cfg, seeds)
}

/// Private kernel ridge regression on random Fourier features.
pub fn fit_rff_ridge(
    x: &[Vec<f64>],
    y: &[f64],
    kernel: KernelSpec,
    cfg: &RidgeConfig,
    seeds: Seeds,
) -> Result<FittedModel> {
    check_training_data(x, y)?;
    cfg.validate()?;
    let map = sample_rff(kernel, x[0].len(), cfg.m, seeds.map)?;
    let z = map.features(x)?;
    finish(Method::RffRidge, kernel, FeatureMap::Rff(map), &z, x, y, cfg, seeds)
}
