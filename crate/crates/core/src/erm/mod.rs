//! Private kernel learners and the fitted-model type.
//!
//! | method            | features        | mechanism                       |
//! |-------------------|-----------------|---------------------------------|
//! | `rp_ridge`        | GP projection   | sufficient-statistics noise     |
//! | `rff_ridge`       | Fourier         | sufficient-statistics noise     |
//! | `rp_objpert`      | GP projection   | objective perturbation          |
//! | `rff_objpert`     | Fourier         | objective perturbation          |
//! | `functional_pert` | full RKHS       | additive GP sample path         |

mod functional;
mod model_io;
mod objpert;
pub(crate) mod ridge;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

pub use functional::{fit_functional_pert, FunctionalConfig, FunctionalPart};
pub use model_io::{load_model, save_model, FORMAT_VERSION};
pub use objpert::{fit_objpert, minimize_perturbed, ObjpertConfig, PerturbedObjective};
pub use ridge::{
    fit_rff_ridge, fit_rp_ridge, privatize, sufficient_stats, PrivateStats, RidgeConfig, RidgeSolver, SufficientStats,
};

use crate::data::Standardizer;
use crate::error::{Error, Result};
use crate::gp::GpProjectionMap;
use crate::kernel::KernelSpec;
use crate::loss::LossSpec;
use crate::privacy::PrivacyBudget;
use crate::rff::RffMap;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    RpRidge,
    RpObjpert,
    RffRidge,
    RffObjpert,
    FunctionalPert,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::RpRidge,
        Method::RpObjpert,
        Method::RffRidge,
        Method::RffObjpert,
        Method::FunctionalPert,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::RpRidge => "rp_ridge",
            Method::RpObjpert => "rp_objpert",
            Method::RffRidge => "rff_ridge",
            Method::RffObjpert => "rff_objpert",
            Method::FunctionalPert => "functional_pert",
        }
    }

    /// Stable numeric code, used in model files and seed derivation.
    pub fn code(&self) -> u8 {
        match self {
            Method::RpRidge => 1,
            Method::RpObjpert => 2,
            Method::RffRidge => 3,
            Method::RffObjpert => 4,
            Method::FunctionalPert => 5,
        }
    }

    pub fn from_code(code: u8) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.code() == code)
    }

    pub fn is_ridge(&self) -> bool {
        matches!(self, Method::RpRidge | Method::RffRidge)
    }

    pub fn is_objpert(&self) -> bool {
        matches!(self, Method::RpObjpert | Method::RffObjpert)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::config(format!("unknown method '{s}'")))
    }
}

/// How the response statistic `u` is bounded before noise is added.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UClip {
    /// Truncate each response to `[-T, T]`.
    #[default]
    Elementwise,
    /// Rescale the untruncated `u` to norm at most `T`.
    L2Norm,
}

impl UClip {
    pub fn name(&self) -> &'static str {
        match self {
            UClip::Elementwise => "elementwise",
            UClip::L2Norm => "l2norm",
        }
    }
}

impl FromStr for UClip {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "elementwise" => Ok(UClip::Elementwise),
            "l2norm" => Ok(UClip::L2Norm),
            other => Err(Error::config(format!("unknown u-clip mode '{other}'"))),
        }
    }
}

const MAP_TAG: u64 = 1;
const NOISE_TAG: u64 = 2;

/// Seeds of every random draw in a fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seeds {
    /// Feature map (projection paths or Fourier frequencies).
    pub map: u64,
    /// Privacy noise (statistic noise, perturbation vector or noise path).
    pub noise: u64,
}

impl Seeds {
    pub fn from_base(seed: u64) -> Self {
        Self {
            map: rng::seed_split(seed, &[MAP_TAG]),
            noise: rng::seed_split(seed, &[NOISE_TAG]),
        }
    }
}

/// The random feature map of a finite-dimensional fit.
#[derive(Debug, Clone)]
pub enum FeatureMap {
    Rp(GpProjectionMap),
    Rff(RffMap),
}

impl FeatureMap {
    pub fn dim(&self) -> usize {
        match self {
            FeatureMap::Rp(m) => m.dim(),
            FeatureMap::Rff(m) => m.dim(),
        }
    }

    pub fn feature(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            FeatureMap::Rp(m) => m.feature(x),
            FeatureMap::Rff(m) => m.feature(x),
        }
    }

    /// One row per point.
    pub fn features(&self, points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        match self {
            FeatureMap::Rff(m) => m.features(points),
            FeatureMap::Rp(m) => {
                let mut z = DMatrix::zeros(points.len(), m.dim());
                for (i, p) in points.iter().enumerate() {
                    let f = m.feature(p)?;
                    z.row_mut(i).copy_from_slice(&f);
                }
                Ok(z)
            }
        }
    }
}

/// Learned parameters.
#[derive(Debug, Clone)]
pub enum ModelParams {
    /// `f(x) = beta . phi(x)`.
    Linear { map: FeatureMap, beta: Vec<f64> },
    /// `f(x) = sum_i alpha_i k(x_i, x) + scale * h(x)`.
    Functional(FunctionalPart),
}

/// A fitted private predictor with everything needed to reproduce it.
#[derive(Debug, Clone)]
pub struct FittedModel {
    pub method: Method,
    pub kernel: KernelSpec,
    pub lambda: f64,
    /// Penalty actually used (`lambda0` for objective perturbation).
    pub lambda_effective: f64,
    pub budget: PrivacyBudget,
    pub seeds: Seeds,
    pub loss: LossSpec,
    pub truncation: Option<f64>,
    pub u_clip: UClip,
    pub params: ModelParams,
    /// Feature transform expected on raw inputs, if the model was fitted on
    /// standardized data.
    pub standardizer: Option<Standardizer>,
    /// Response centering applied before fitting.
    pub response_shift: Option<f64>,
    /// Inputs (already transformed) and predictions recorded at fit time.
    pub self_test: Vec<(Vec<f64>, f64)>,
}

/// Number of training points whose predictions are stored with a model.
pub const SELF_TEST_POINTS: usize = 8;

impl FittedModel {
    /// `f~(x)` for an input in the space the model was fitted in.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        match &self.params {
            ModelParams::Linear { map, beta } => {
                let z = map.feature(x)?;
                Ok(z.iter().zip(beta).map(|(a, b)| a * b).sum())
            }
            ModelParams::Functional(part) => part.predict(self.kernel, x),
        }
    }

    pub fn predict_many(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        xs.iter().map(|x| self.predict(x)).collect()
    }

    /// Applies the stored standardization to a raw input and predicts on the
    /// centered response scale.
    pub fn predict_raw(&self, x: &[f64]) -> Result<f64> {
        match &self.standardizer {
            Some(st) => self.predict(&st.apply(x)?),
            None => self.predict(x),
        }
    }

    /// [`predict_raw`](Self::predict_raw) with the response centering undone.
    pub fn predict_response(&self, x: &[f64]) -> Result<f64> {
        Ok(self.predict_raw(x)? + self.response_shift.unwrap_or(0.0))
    }

    pub fn beta(&self) -> Option<&[f64]> {
        match &self.params {
            ModelParams::Linear { beta, .. } => Some(beta),
            ModelParams::Functional(_) => None,
        }
    }

    pub fn feature_map(&self) -> Option<&FeatureMap> {
        match &self.params {
            ModelParams::Linear { map, .. } => Some(map),
            ModelParams::Functional(_) => None,
        }
    }

    pub(crate) fn record_self_test(&mut self, points: &[Vec<f64>]) -> Result<()> {
        self.self_test = points
            .iter()
            .take(SELF_TEST_POINTS)
            .map(|p| Ok((p.clone(), self.predict(p)?)))
            .collect::<Result<_>>()?;
        Ok(())
    }
}

pub(crate) fn check_training_data(x: &[Vec<f64>], y: &[f64]) -> Result<()> {
    if x.is_empty() {
        return Err(Error::data("training set is empty"));
    }
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let d = x[0].len();
    for row in x {
        if row.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: row.len(),
            });
        }
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("responses".into()));
    }
    Ok(())
}
