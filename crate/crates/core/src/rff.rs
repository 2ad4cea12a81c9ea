//! Random Fourier features for shift-invariant kernels.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::kernel::{KernelFamily, KernelSpec};
use crate::rng;

/// `phi_M(x)_j = sqrt(2/M) cos(w_j . x + b_j)`, with `w_j` drawn from the
/// kernel's spectral measure and `b_j ~ U[0, 2 pi)`.
///
/// Every coordinate of `phi(x, w) = sqrt(2) cos(...)` is bounded by
/// `sqrt(2)`, hence `||phi_M(x)||^2 <= 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct RffMap {
    kernel: KernelSpec,
    d: usize,
    m: usize,
    seed: u64,
    /// `M x d`, row `j` is `w_j`.
    frequencies: DMatrix<f64>,
    phases: Vec<f64>,
}

/// Draws an RFF map from the stream keyed by `seed`.
///
/// Gaussian(sigma): `w ~ N(0, sigma^-2 I)`. Laplace(s): i.i.d. Cauchy
/// coordinates with scale `1/s`, via `tan(pi (u - 1/2))`.
pub fn sample_rff(kernel: KernelSpec, d: usize, m: usize, seed: u64) -> Result<RffMap> {
    if m == 0 {
        return Err(Error::config("feature dimension M must be at least 1"));
    }
    if d == 0 {
        return Err(Error::config("input dimension must be at least 1"));
    }
    let mut s = rng::stream(seed);
    let mut freq = Vec::with_capacity(m * d);
    match kernel.family() {
        KernelFamily::Gaussian { bandwidth } => {
            for _ in 0..m * d {
                freq.push(rng::normal(&mut s) / bandwidth);
            }
        }
        KernelFamily::Laplace { scale } => {
            for _ in 0..m * d {
                freq.push((PI * (rng::uniform(&mut s) - 0.5)).tan() / scale);
            }
        }
        KernelFamily::Linear => {
            return Err(Error::UnsupportedKernel(
                "random Fourier features are defined only for shift-invariant kernels".into(),
            ))
        }
    }
    let phases = (0..m).map(|_| 2.0 * PI * rng::uniform(&mut s)).collect();
    Ok(RffMap {
        kernel,
        d,
        m,
        seed,
        frequencies: DMatrix::from_row_slice(m, d, &freq),
        phases,
    })
}

impl RffMap {
    /// Builds a map from explicit frequencies and phases.
    pub fn from_raw(kernel: KernelSpec, frequencies: DMatrix<f64>, phases: Vec<f64>) -> Result<Self> {
        if frequencies.nrows() != phases.len() || phases.is_empty() || frequencies.ncols() == 0 {
            return Err(Error::config("frequency rows must match phases and be nonempty"));
        }
        Ok(Self {
            kernel,
            d: frequencies.ncols(),
            m: phases.len(),
            seed: 0,
            frequencies,
            phases,
        })
    }

    pub fn kernel(&self) -> KernelSpec {
        self.kernel
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn input_dim(&self) -> usize {
        self.d
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn frequencies(&self) -> &DMatrix<f64> {
        &self.frequencies
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    /// Fingerprint of `w_1` and `b_1`, stored with models to detect a change in
    /// the random-number pipeline when frequencies are regenerated from the seed.
    pub fn checksum(&self) -> u64 {
        let mut bits: Vec<u64> = self.frequencies.row(0).iter().map(|v| v.to_bits()).collect();
        bits.push(self.phases[0].to_bits());
        rng::seed_split(0, &bits)
    }

    pub fn feature(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("point {x:?}")));
        }
        Ok(self.feature_unchecked(x))
    }

    fn feature_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let scale = SQRT_2 / (self.m as f64).sqrt();
        (0..self.m).map(|j| scale * self.angle(j, x).cos()).collect()
    }

    /// Unscaled values `phi(x, w_j) = sqrt(2) cos(w_j . x + b_j)`.
    pub fn base_values(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.feature(x)?;
        Ok((0..self.m).map(|j| SQRT_2 * self.angle(j, x).cos()).collect())
    }

    fn angle(&self, j: usize, x: &[f64]) -> f64 {
        self.frequencies.row(j).iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.phases[j]
    }

    /// Feature matrix, one row per point.
    pub fn features(&self, points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        let mut z = DMatrix::zeros(points.len(), self.m);
        for (i, p) in points.iter().enumerate() {
            let f = self.feature(p)?;
            z.row_mut(i).copy_from_slice(&f);
        }
        Ok(z)
    }
}
