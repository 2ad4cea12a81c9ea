//! Kernel functions, Gram matrices and the effective-dimension diagnostic.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Kernel family with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelFamily {
    /// `exp(-||x - y||_2^2 / (2 sigma^2))`.
    Gaussian { bandwidth: f64 },
    /// `exp(-||x - y||_1 / scale)`.
    Laplace { scale: f64 },
    /// `<x, y>` on the ball `||x||^2 <= kappa_sq`.
    Linear,
}

/// A kernel together with its uniform bound `kappa_sq >= k(x, x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    family: KernelFamily,
    kappa_sq: f64,
}

impl KernelSpec {
    pub fn gaussian(bandwidth: f64) -> Result<Self> {
        check_positive("gaussian bandwidth", bandwidth)?;
        Ok(Self {
            family: KernelFamily::Gaussian { bandwidth },
            kappa_sq: 1.0,
        })
    }

    pub fn laplace(scale: f64) -> Result<Self> {
        check_positive("laplace scale", scale)?;
        Ok(Self {
            family: KernelFamily::Laplace { scale },
            kappa_sq: 1.0,
        })
    }

    /// Linear kernel on inputs with `||x||^2 <= radius_sq`.
    pub fn linear(radius_sq: f64) -> Result<Self> {
        check_positive("linear-kernel squared radius", radius_sq)?;
        Ok(Self {
            family: KernelFamily::Linear,
            kappa_sq: radius_sq,
        })
    }

    /// Builds `gaussian`, `laplace` or `linear` from its [`parameter`](Self::parameter).
    pub fn from_name(name: &str, parameter: f64) -> Result<Self> {
        match name {
            "gaussian" => Self::gaussian(parameter),
            "laplace" => Self::laplace(parameter),
            "linear" => Self::linear(parameter),
            other => Err(Error::config(format!("unknown kernel '{other}'"))),
        }
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn kappa_sq(&self) -> f64 {
        self.kappa_sq
    }

    pub fn kappa(&self) -> f64 {
        self.kappa_sq.sqrt()
    }

    pub fn is_shift_invariant(&self) -> bool {
        !matches!(self.family, KernelFamily::Linear)
    }

    pub fn name(&self) -> &'static str {
        match self.family {
            KernelFamily::Gaussian { .. } => "gaussian",
            KernelFamily::Laplace { .. } => "laplace",
            KernelFamily::Linear => "linear",
        }
    }

    /// Bandwidth, scale or squared radius depending on the family.
    pub fn parameter(&self) -> f64 {
        match self.family {
            KernelFamily::Gaussian { bandwidth } => bandwidth,
            KernelFamily::Laplace { scale } => scale,
            KernelFamily::Linear => self.kappa_sq,
        }
    }

    /// Checks that `x` is finite and, for the linear family, inside the domain.
    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("point {x:?}")));
        }
        if let KernelFamily::Linear = self.family {
            let norm_sq: f64 = x.iter().map(|v| v * v).sum();
            if norm_sq > self.kappa_sq {
                return Err(Error::OutsideDomain {
                    norm_sq,
                    kappa_sq: self.kappa_sq,
                });
            }
        }
        Ok(())
    }

    /// `k(x, y)` with full input validation.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: y.len(),
            });
        }
        self.check_point(x)?;
        self.check_point(y)?;
        Ok(self.eval_unchecked(x, y))
    }

    /// `k(x, y)` for inputs already validated by the caller.
    ///
    /// Differences are formed coordinate by coordinate, never through
    /// `||x||^2 + ||y||^2 - 2<x, y>`, and summed in index order so that the
    /// result is exactly symmetric in its arguments.
    #[inline]
    pub fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match self.family {
            KernelFamily::Gaussian { bandwidth } => {
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-d2 / (2.0 * bandwidth * bandwidth)).exp()
            }
            KernelFamily::Laplace { scale } => {
                let d1: f64 = x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum();
                (-d1 / scale).exp()
            }
            KernelFamily::Linear => x.iter().zip(y).map(|(a, b)| a * b).sum(),
        }
    }

    /// Gram matrix over `points`, stored without jitter.
    pub fn gram(&self, points: &[Vec<f64>]) -> Result<GramMatrix> {
        let first = points
            .first()
            .ok_or_else(|| Error::data("gram matrix requires at least one point"))?;
        let d = first.len();
        for p in points {
            if p.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: p.len(),
                });
            }
            self.check_point(p)?;
        }
        Ok(GramMatrix {
            entries: self.gram_unchecked(points),
            jitter_applied: 0.0,
        })
    }

    pub(crate) fn gram_unchecked(&self, points: &[Vec<f64>]) -> DMatrix<f64> {
        let n = points.len();
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = self.eval_unchecked(&points[i], &points[j]);
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        k
    }

    /// Cross-kernel vector `[k(a_i, x)]_i`.
    pub(crate) fn cross(&self, anchors: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        anchors.iter().map(|a| self.eval_unchecked(a, x)).collect()
    }
}

fn check_positive(what: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::config(format!("{what} must be positive and finite, got {v}")))
    }
}

/// Materialized Gram matrix `[k(x_i, x_j)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub entries: DMatrix<f64>,
    pub jitter_applied: f64,
}

impl GramMatrix {
    pub fn len(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.nrows() == 0
    }

    /// Eigenvalues sorted in descending order, negative roundoff clamped to 0.
    pub fn eigenvalues_desc(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self
            .entries
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .map(|&v| v.max(0.0))
            .collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }
}

/// Effective dimension `sum_i mu_i / (mu_i + lambda)` with `mu_i = ev_i / n`.
///
/// Negative eigenvalues (floating-point noise) are clamped to zero.
pub fn effective_dimension(gram_eigenvalues: &[f64], n: usize, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::config(format!("lambda must be positive, got {lambda}")));
    }
    if n == 0 {
        return Err(Error::config("sample count must be positive"));
    }
    let n = n as f64;
    Ok(gram_eigenvalues
        .iter()
        .map(|&ev| {
            let mu = ev.max(0.0) / n;
            mu / (mu + lambda)
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    fn random_points(seed: u64, n: usize, d: usize) -> Vec<Vec<f64>> {
        let mut s = rng::stream(seed);
        (0..n)
            .map(|_| (0..d).map(|_| rng::uniform(&mut s) * 2.0 - 1.0).collect())
            .collect()
    }

    #[test]
    fn gaussian_diagonal_is_one() {
        let k = KernelSpec::gaussian(1.0).unwrap();
        assert_eq!(k.eval(&[0.3, -0.7], &[0.3, -0.7]).unwrap(), 1.0);
    }

    #[test]
    fn gaussian_unit_offset() {
        let k = KernelSpec::gaussian(1.0).unwrap();
        let v = k.eval(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        // e^{-1} = 0.36787944117144233...
        assert!((v - 0.367_879_441_171_442_33).abs() < 1e-15);
    }

    #[test]
    fn linear_is_dot_product() {
        let k = KernelSpec::linear(100.0).unwrap();
        assert_eq!(k.eval(&[1.0, 2.0], &[3.0, -1.0]).unwrap(), 1.0);
    }

    #[test]
    fn laplace_uses_l1_distance() {
        let k = KernelSpec::laplace(2.0).unwrap();
        let v = k.eval(&[0.0, 0.0], &[1.0, -1.0]).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn eval_errors() {
        let k = KernelSpec::gaussian(1.0).unwrap();
        assert!(matches!(
            k.eval(&[0.0], &[0.0, 1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(k.eval(&[f64::NAN], &[0.0]), Err(Error::NonFinite(_))));
        let lin = KernelSpec::linear(1.0).unwrap();
        assert!(matches!(
            lin.eval(&[1.0, 1.0], &[0.0, 0.0]),
            Err(Error::OutsideDomain { .. })
        ));
        assert!(KernelSpec::gaussian(0.0).is_err());
        assert!(KernelSpec::laplace(-1.0).is_err());
    }

    #[test]
    fn gram_small_cases() {
        let k = KernelSpec::gaussian(1.0).unwrap();
        let g = k.gram(&[vec![0.5, 0.5]]).unwrap();
        assert_eq!(g.entries, DMatrix::from_element(1, 1, 1.0));
        let g = k.gram(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert_eq!(g.entries, DMatrix::from_element(2, 2, 1.0));
        assert_eq!(g.jitter_applied, 0.0);
        assert!(k.gram(&[]).is_err());
    }

    #[test]
    fn gram_is_psd_up_to_roundoff() {
        for (kernel, seed) in [
            (KernelSpec::gaussian(1.0).unwrap(), 1),
            (KernelSpec::gaussian(0.3).unwrap(), 2),
            (KernelSpec::laplace(1.0).unwrap(), 3),
            (KernelSpec::linear(3.0).unwrap(), 4),
        ] {
            for n in [3, 50, 200] {
                let pts = random_points(seed * 1000 + n as u64, n, 3);
                let g = kernel.gram(&pts).unwrap();
                assert_eq!(g.entries, g.entries.transpose());
                let min = g
                    .entries
                    .clone()
                    .symmetric_eigenvalues()
                    .iter()
                    .cloned()
                    .fold(f64::INFINITY, f64::min);
                assert!(min >= -1e-8 * kernel.kappa_sq() * n as f64, "{min}");
            }
        }
    }

    #[test]
    fn effective_dimension_examples() {
        assert!(effective_dimension(&[1.0], 1, 1e12).unwrap() < 1e-11);
        assert_eq!(effective_dimension(&[2.0, 2.0], 2, 1.0).unwrap(), 1.0);
        assert!(effective_dimension(&[1.0], 1, 0.0).is_err());
        // Tiny negative eigenvalues count as zero.
        assert_eq!(effective_dimension(&[-1e-14], 1, 1.0).unwrap(), 0.0);
    }

    proptest! {
        #[test]
        fn kernels_are_symmetric_and_bounded(
            x in proptest::collection::vec(-1.0f64..1.0, 3),
            y in proptest::collection::vec(-1.0f64..1.0, 3),
            bw in 0.05f64..10.0,
        ) {
            for k in [
                KernelSpec::gaussian(bw).unwrap(),
                KernelSpec::laplace(bw).unwrap(),
                KernelSpec::linear(3.0).unwrap(),
            ] {
                prop_assert_eq!(k.eval(&x, &y).unwrap(), k.eval(&y, &x).unwrap());
                prop_assert!(k.eval(&x, &x).unwrap() <= k.kappa_sq());
            }
        }

        #[test]
        fn effective_dimension_bounds_and_monotonicity(
            ev in proptest::collection::vec(0.0f64..10.0, 1..20),
            n in 1usize..50,
            l1 in 1e-6f64..10.0,
            ratio in 1.0f64..100.0,
        ) {
            let d1 = effective_dimension(&ev, n, l1).unwrap();
            let d2 = effective_dimension(&ev, n, l1 * ratio).unwrap();
            prop_assert!(d2 <= d1 + 1e-12);
            let total: f64 = ev.iter().map(|v| v / n as f64).sum();
            prop_assert!(d1 <= (ev.len() as f64).min(total / l1) + 1e-12);
        }
    }
}
