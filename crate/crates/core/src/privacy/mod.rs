//! Privacy budgets, sensitivities and Gaussian-mechanism noise scales.
//!
//! All formulas are evaluated in double-double ([`dd`]) and rounded once, so
//! every returned scale is within one ulp of its exact value and is
//! bit-identical on recomputation.
//!
//! `epsilon = +inf` is the no-privacy sentinel: every noise scale and penalty
//! floor becomes exactly zero, so private and non-private fits run through the
//! same code.

pub mod dd;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;
use dd::{concentration_factor, Dd};

/// An `(epsilon, delta)` pair. `epsilon = inf` disables all noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyBudget {
    epsilon: f64,
    delta: f64,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if epsilon.is_nan() || epsilon <= 0.0 {
            return Err(Error::config(format!("epsilon must be positive, got {epsilon}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::config(format!("delta must lie in (0, 1), got {delta}")));
        }
        Ok(Self { epsilon, delta })
    }

    /// The no-privacy sentinel.
    pub fn non_private(delta: f64) -> Result<Self> {
        Self::new(f64::INFINITY, delta)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn is_private(&self) -> bool {
        self.epsilon.is_finite()
    }

    /// Sequential composition: `(eps_a + eps_b, delta_a + delta_b)`.
    /// Infinite epsilon absorbs everything.
    pub fn compose(self, other: PrivacyBudget) -> Result<PrivacyBudget> {
        PrivacyBudget::new(self.epsilon + other.epsilon, self.delta + other.delta)
    }
}

/// Sensitivities and derived noise magnitudes for one fit.
///
/// Fields that a given algorithm does not use are zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseScales {
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    /// Standard deviation multiplier of the symmetrized matrix noise on `C`.
    pub ridge_c_scale: f64,
    /// Standard deviation of the vector noise on `u`.
    pub ridge_u_scale: f64,
    /// Standard deviation of each coordinate of the objective perturbation `b`.
    pub objpert_b_std: f64,
    /// Lower bound imposed on the ridge penalty by objective perturbation.
    pub lambda_floor: f64,
}

impl NoiseScales {
    /// `max(lambda, lambda_floor)`.
    pub fn effective_lambda(&self, lambda: f64) -> f64 {
        lambda.max(self.lambda_floor)
    }
}

/// Which feature map an objective-perturbation fit uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    Rp,
    Rff,
}

fn check_count(what: &str, v: usize) -> Result<()> {
    if v == 0 {
        Err(Error::config(format!("{what} must be at least 1")))
    } else {
        Ok(())
    }
}

fn check_positive(what: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::config(format!("{what} must be positive and finite, got {v}")))
    }
}

/// `1 + sqrt(2 log(a / delta))`.
fn gaussian_factor(a: f64, delta: f64) -> Dd {
    let l = (Dd::from(a) / Dd::from(delta)).ln();
    Dd::ONE + (Dd::from(2.0) * l).sqrt()
}

/// `2 * sensitivity * factor / (n eps)`, or 0 under the sentinel.
fn ridge_noise(sensitivity: Dd, factor: Dd, n: usize, budget: &PrivacyBudget) -> f64 {
    if !budget.is_private() {
        return 0.0;
    }
    (Dd::from(2.0) * sensitivity * factor / (Dd::from(n) * Dd::from(budget.epsilon))).to_f64()
}

/// Scales for ridge regression on the GP random projection.
///
/// With `g = log(8/delta)/M` and `s = 1 + 2 sqrt(g) + 2g`:
/// `Delta1 = 2 kappa^2 s`, `Delta2 = 2 kappa T sqrt(s)`, and each statistic
/// gets noise `2 Delta (1 + sqrt(2 log(4/delta))) / (n eps)`.
pub fn ridge_scales_rp(
    kappa_sq: f64,
    truncation: f64,
    m: usize,
    n: usize,
    budget: &PrivacyBudget,
) -> Result<NoiseScales> {
    check_positive("kappa^2", kappa_sq)?;
    check_positive("truncation level T", truncation)?;
    check_count("projection dimension M", m)?;
    check_count("sample size n", n)?;
    let s = concentration_factor(Dd::from(8.0) / Dd::from(budget.delta), m);
    let kappa_sq = Dd::from(kappa_sq);
    let delta1 = Dd::from(2.0) * kappa_sq * s;
    let delta2 = Dd::from(2.0) * kappa_sq.sqrt() * Dd::from(truncation) * s.sqrt();
    let factor = gaussian_factor(4.0, budget.delta);
    Ok(NoiseScales {
        delta1: delta1.to_f64(),
        delta2: delta2.to_f64(),
        delta3: 0.0,
        ridge_c_scale: ridge_noise(delta1, factor, n, budget),
        ridge_u_scale: ridge_noise(delta2, factor, n, budget),
        objpert_b_std: 0.0,
        lambda_floor: 0.0,
    })
}

/// Scales for ridge regression on random Fourier features.
///
/// `Delta1 = 2`, `Delta2 = sqrt(2)`; the matrix noise is
/// `2 Delta1 (1 + sqrt(2 log(2/delta))) / (n eps)` and the vector noise
/// carries the truncation level outside the sensitivity,
/// `2 Delta2 T (1 + sqrt(2 log(2/delta))) / (n eps)`.
///
/// `T = 0` is allowed here and zeroes the vector noise.
pub fn ridge_scales_rff(truncation: f64, n: usize, budget: &PrivacyBudget) -> Result<NoiseScales> {
    if !(truncation.is_finite() && truncation >= 0.0) {
        return Err(Error::config(format!(
            "truncation level T must be nonnegative, got {truncation}"
        )));
    }
    check_count("sample size n", n)?;
    let delta1 = Dd::from(2.0);
    let delta2 = Dd::from(2.0).sqrt();
    let factor = gaussian_factor(2.0, budget.delta);
    Ok(NoiseScales {
        delta1: delta1.to_f64(),
        delta2: delta2.to_f64(),
        delta3: 0.0,
        ridge_c_scale: ridge_noise(delta1, factor, n, budget),
        ridge_u_scale: ridge_noise(delta2 * Dd::from(truncation), factor, n, budget),
        objpert_b_std: 0.0,
        lambda_floor: 0.0,
    })
}

/// Scales for objective perturbation.
///
/// Random projection: `Delta3 = kappa sqrt(1 + 2 sqrt(log(4/delta)/M) + 2 log(4/delta)/M)`,
/// `b ~ N(0, 4 c1^2 Delta3^2 (2 log(4/delta) + eps) / eps^2 I)` and
/// `lambda_floor = c2 Delta3^2 / (n (e^{eps/4} - 1))`.
///
/// RFF: `Delta3 = sqrt(2)`, `b` as above with `log(2/delta)`, and the penalty
/// `max(lambda/2, c2/(n (e^{eps/4} - 1))) ||beta||^2`, which is
/// `(lambda0 / 2) ||beta||^2` with `lambda_floor = 2 c2 / (n (e^{eps/4} - 1))`.
///
/// `lambda` is accepted for interface symmetry; use
/// [`NoiseScales::effective_lambda`] to obtain `lambda0`.
#[allow(clippy::too_many_arguments)]
pub fn objpert_scales(
    kappa_sq: f64,
    m: usize,
    n: usize,
    c1: f64,
    c2: f64,
    lambda: f64,
    budget: &PrivacyBudget,
    variant: FeatureKind,
) -> Result<NoiseScales> {
    check_positive("Lipschitz constant c1", c1)?;
    check_positive("smoothness constant c2", c2)?;
    check_count("projection dimension M", m)?;
    check_count("sample size n", n)?;
    if !(lambda >= 0.0) {
        return Err(Error::config(format!("lambda must be nonnegative, got {lambda}")));
    }
    let (delta3_sq, log_term, floor_num) = match variant {
        FeatureKind::Rp => {
            check_positive("kappa^2", kappa_sq)?;
            let l4 = (Dd::from(4.0) / Dd::from(budget.delta)).ln();
            let s = concentration_factor(Dd::from(4.0) / Dd::from(budget.delta), m);
            let d3sq = Dd::from(kappa_sq) * s;
            (d3sq, l4, Dd::from(c2) * d3sq)
        }
        FeatureKind::Rff => {
            let l2 = (Dd::from(2.0) / Dd::from(budget.delta)).ln();
            (Dd::from(2.0), l2, Dd::from(2.0) * Dd::from(c2))
        }
    };
    let delta3 = delta3_sq.sqrt();
    let (b_std, floor) = if budget.is_private() {
        let eps = Dd::from(budget.epsilon);
        let c1 = Dd::from(c1);
        let var_num = Dd::from(4.0) * c1 * c1 * delta3_sq * (Dd::from(2.0) * log_term + eps);
        let b_std = var_num.sqrt() / eps;
        let expm1 = (eps / Dd::from(4.0)).exp_m1();
        let floor = floor_num / (Dd::from(n) * expm1);
        (b_std.to_f64(), floor.to_f64())
    } else {
        (0.0, 0.0)
    };
    Ok(NoiseScales {
        delta1: 0.0,
        delta2: 0.0,
        delta3: delta3.to_f64(),
        ridge_c_scale: 0.0,
        ridge_u_scale: 0.0,
        objpert_b_std: b_std,
        lambda_floor: floor,
    })
}

/// `Delta (1 + sqrt(2 log(1/delta))) / eps`; zero under the sentinel.
pub fn gaussian_multiplier(sensitivity: f64, budget: &PrivacyBudget) -> f64 {
    if !budget.is_private() || sensitivity == 0.0 {
        return 0.0;
    }
    (Dd::from(sensitivity) * gaussian_factor(1.0, budget.delta) / Dd::from(budget.epsilon)).to_f64()
}

/// Releases `value + gaussian_multiplier(sensitivity) * z`, `z ~ N(0, I)`.
pub fn gaussian_mechanism<R: Rng + ?Sized>(
    value: &[f64],
    sensitivity: f64,
    budget: &PrivacyBudget,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(sensitivity >= 0.0) || !sensitivity.is_finite() {
        return Err(Error::config(format!(
            "sensitivity must be nonnegative and finite, got {sensitivity}"
        )));
    }
    let scale = gaussian_multiplier(sensitivity, budget);
    if scale == 0.0 {
        return Ok(value.to_vec());
    }
    Ok(value.iter().map(|v| v + scale * rng::normal(rng)).collect())
}

/// Noise scale of functional perturbation:
/// `c1 kappa (1 + sqrt(2 log(1/delta))) / (n lambda eps)`.
pub fn functional_noise_scale(c1: f64, kappa_sq: f64, n: usize, lambda: f64, budget: &PrivacyBudget) -> Result<f64> {
    check_positive("Lipschitz constant c1", c1)?;
    check_positive("kappa^2", kappa_sq)?;
    check_positive("lambda", lambda)?;
    check_count("sample size n", n)?;
    if !budget.is_private() {
        return Ok(0.0);
    }
    let num = Dd::from(c1) * Dd::from(kappa_sq).sqrt() * gaussian_factor(1.0, budget.delta);
    Ok((num / (Dd::from(n) * Dd::from(lambda) * Dd::from(budget.epsilon))).to_f64())
}

/// Vector-noise scale of the l2-norm clipping variant:
/// `2 T (1 + sqrt(2 log(4/delta))) / (n eps)`.
pub fn l2clip_u_scale(truncation: f64, n: usize, budget: &PrivacyBudget) -> Result<f64> {
    check_positive("truncation level T", truncation)?;
    check_count("sample size n", n)?;
    Ok(ridge_noise(
        Dd::from(truncation),
        gaussian_factor(4.0, budget.delta),
        n,
        budget,
    ))
}

/// `min(max(y, -T), T)`.
pub fn truncate_response(y: f64, truncation: f64) -> f64 {
    y.max(-truncation).min(truncation)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn budget(eps: f64, delta: f64) -> PrivacyBudget {
        PrivacyBudget::new(eps, delta).unwrap()
    }

    // Reference values below were evaluated with mpmath at 50 digits.

    #[test]
    fn rp_ridge_worked_example() {
        let s = ridge_scales_rp(1.0, 1.0, 100, 1, &budget(1.0, 0.01)).unwrap();
        assert!((s.delta1 - 3.301_569_112_401_553_7).abs() < 1e-15);
    }

    #[test]
    fn rp_ridge_ratio_identity() {
        for (ksq, t, m, delta) in [(1.0, 3.0, 100, 0.01), (2.5, 0.4, 7, 1e-6), (0.3, 11.0, 900, 0.4)] {
            let s = ridge_scales_rp(ksq, t, m, 10, &budget(2.0, delta)).unwrap();
            let g = (8.0f64 / delta).ln() / m as f64;
            let ratio = t / (ksq.sqrt() * (1.0 + 2.0 * g.sqrt() + 2.0 * g).sqrt());
            assert!((s.delta2 / s.delta1 - ratio).abs() < 1e-14 * ratio);
        }
    }

    #[test]
    fn rff_ridge_worked_example() {
        let s = ridge_scales_rff(1.0, 1, &budget(1.0, 0.5)).unwrap();
        assert!((s.ridge_c_scale - 10.660_436_889_261_582).abs() < 1e-14);
        let doubled = ridge_scales_rff(1.0, 1, &budget(2.0, 0.5)).unwrap();
        assert_eq!(doubled.ridge_c_scale, s.ridge_c_scale / 2.0);
        assert_eq!(doubled.ridge_u_scale, s.ridge_u_scale / 2.0);
        let t0 = ridge_scales_rff(0.0, 1, &budget(1.0, 0.5)).unwrap();
        assert_eq!(t0.ridge_u_scale, 0.0);
        assert_eq!(t0.ridge_c_scale, s.ridge_c_scale);
    }

    #[test]
    fn objpert_worked_examples() {
        let s = objpert_scales(1.0, 100, 10, 1.0, 0.25, 0.0, &budget(1.0, 0.01), FeatureKind::Rp).unwrap();
        assert!((s.delta3 - 1.268_612_887_006_246_3).abs() < 1e-15);
        // c1 = 1, Delta3 = 1 (kappa^2 chosen so that Delta3^2 = 1), eps = 1, delta = 0.01.
        let ksq = 1.0 / concentration_factor(Dd::from(400.0), 100).to_f64();
        let s = objpert_scales(ksq, 100, 10, 1.0, 0.25, 0.0, &budget(1.0, 0.01), FeatureKind::Rp).unwrap();
        assert!((s.objpert_b_std - 7.206_366_378_200_865).abs() < 1e-12);
    }

    #[test]
    fn sentinel_disables_noise() {
        let inf = PrivacyBudget::non_private(0.01).unwrap();
        let s = ridge_scales_rp(1.0, 2.0, 50, 10, &inf).unwrap();
        assert_eq!((s.ridge_c_scale, s.ridge_u_scale), (0.0, 0.0));
        let s = ridge_scales_rff(2.0, 10, &inf).unwrap();
        assert_eq!((s.ridge_c_scale, s.ridge_u_scale), (0.0, 0.0));
        for kind in [FeatureKind::Rp, FeatureKind::Rff] {
            let s = objpert_scales(1.0, 50, 10, 1.0, 0.25, 0.1, &inf, kind).unwrap();
            assert_eq!((s.objpert_b_std, s.lambda_floor), (0.0, 0.0));
            assert_eq!(s.effective_lambda(0.1), 0.1);
        }
        assert_eq!(gaussian_multiplier(3.0, &inf), 0.0);
        assert_eq!(functional_noise_scale(1.0, 1.0, 10, 0.1, &inf).unwrap(), 0.0);
    }

    #[test]
    fn objpert_rejects_bad_constants() {
        let b = budget(1.0, 0.01);
        assert!(objpert_scales(1.0, 10, 10, 0.0, 0.25, 0.1, &b, FeatureKind::Rp).is_err());
        assert!(objpert_scales(1.0, 10, 10, 1.0, -1.0, 0.1, &b, FeatureKind::Rff).is_err());
    }

    #[test]
    fn rff_objpert_floor_is_twice_the_literal_half_penalty() {
        let b = budget(0.7, 1e-4);
        let s = objpert_scales(1.0, 10, 123, 1.0, 0.5, 0.0, &b, FeatureKind::Rff).unwrap();
        let literal = 0.5 / 123.0 / ((0.7f64 / 4.0).exp_m1());
        assert!((s.lambda_floor / 2.0 - literal).abs() < 1e-15 * literal);
        assert_eq!(s.delta3, std::f64::consts::SQRT_2);
    }

    #[test]
    fn gaussian_mechanism_multiplier() {
        let m = gaussian_multiplier(1.0, &budget(1.0, 1e-5));
        assert!((m - 5.798_525_912_188_081).abs() < 1e-14);
        let v = [1.0, -2.0, 3.5];
        let mut s = rng::stream(1);
        assert_eq!(gaussian_mechanism(&v, 0.0, &budget(1.0, 1e-5), &mut s).unwrap(), v);
        assert!(gaussian_mechanism(&v, -1.0, &budget(1.0, 1e-5), &mut s).is_err());
    }

    #[test]
    fn gaussian_mechanism_empirical_std() {
        let b = budget(1.0, 1e-5);
        let mult = gaussian_multiplier(1.0, &b);
        let mut s = rng::stream(2024);
        let out = gaussian_mechanism(&vec![0.0; 2000], 1.0, &b, &mut s).unwrap();
        let mean = out.iter().sum::<f64>() / 2000.0;
        let sd = (out.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 1999.0).sqrt();
        assert!((sd / mult - 1.0).abs() < 0.05, "{sd} vs {mult}");
    }

    #[test]
    fn composition() {
        let c = budget(1.0, 1e-5).compose(budget(1.0, 1e-5)).unwrap();
        assert_eq!(c, budget(2.0, 2e-5));
        let inf = budget(1.0, 1e-5)
            .compose(PrivacyBudget::non_private(1e-5).unwrap())
            .unwrap();
        assert!(!inf.is_private());
        let (a, b, d) = (budget(0.3, 1e-3), budget(1.7, 2e-3), budget(0.25, 5e-4));
        let l = a.compose(b).unwrap().compose(d).unwrap();
        let r = a.compose(b.compose(d).unwrap()).unwrap();
        assert!((l.epsilon() - r.epsilon()).abs() < 1e-15);
        assert!((l.delta() - r.delta()).abs() < 1e-18);
    }

    #[test]
    fn budget_validation() {
        assert!(PrivacyBudget::new(0.0, 0.1).is_err());
        assert!(PrivacyBudget::new(1.0, 0.0).is_err());
        assert!(PrivacyBudget::new(1.0, 1.0).is_err());
        assert!(PrivacyBudget::new(f64::NAN, 0.1).is_err());
    }

    #[test]
    fn truncation() {
        assert_eq!(truncate_response(5.0, 3.0), 3.0);
        assert_eq!(truncate_response(-5.0, 3.0), -3.0);
        assert_eq!(truncate_response(2.0, 3.0), 2.0);
    }

    #[test]
    fn scales_are_monotone() {
        let base = |eps: f64, n: usize, delta: f64| {
            let b = budget(eps, delta);
            (
                ridge_scales_rp(1.0, 2.0, 50, n, &b).unwrap(),
                ridge_scales_rff(2.0, n, &b).unwrap(),
                objpert_scales(1.0, 50, n, 1.0, 0.25, 0.0, &b, FeatureKind::Rp).unwrap(),
                objpert_scales(1.0, 50, n, 1.0, 0.25, 0.0, &b, FeatureKind::Rff).unwrap(),
            )
        };
        let flat = |t: (NoiseScales, NoiseScales, NoiseScales, NoiseScales)| {
            vec![
                t.0.ridge_c_scale,
                t.0.ridge_u_scale,
                t.1.ridge_c_scale,
                t.1.ridge_u_scale,
                t.2.objpert_b_std,
                t.2.lambda_floor,
                t.3.objpert_b_std,
                t.3.lambda_floor,
            ]
        };
        let reference = flat(base(1.0, 100, 1e-3));
        let more_eps = flat(base(2.0, 100, 1e-3));
        let more_n = flat(base(1.0, 200, 1e-3));
        let less_delta = flat(base(1.0, 100, 1e-4));
        for i in 0..reference.len() {
            assert!(more_eps[i] < reference[i], "eps {i}");
            // The perturbation b does not shrink with n.
            if i != 4 && i != 6 {
                assert!(more_n[i] < reference[i], "n {i}");
            }
            // The objective-perturbation floor does not involve delta for RFF.
            if i != 7 {
                assert!(less_delta[i] > reference[i], "delta {i}");
            }
        }
    }
}
