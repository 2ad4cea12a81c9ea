//! Random projection of the RKHS through Gaussian-process sample paths.
//!
//! `M` i.i.d. centered GP paths with covariance `k` are realized jointly at a
//! set of anchor points: with `K + jI = L L^T` (smallest working jitter `j`
//! from [`JITTER_LADDER`](crate::linalg::JITTER_LADDER)) and `G` an `N x M`
//! matrix of standard normals, the path values are `P = L G`. The feature of
//! anchor `i` is row `i` of `P` scaled by `1 / sqrt(M)`.
//!
//! Points that were not anchors get their path values from the Gaussian
//! conditional given the anchor values. Each such draw uses a stream keyed by
//! the point itself, and conditions on the sampled anchors only, so the value
//! at a point never depends on which other points were extended before it.
//! Two extended points are therefore conditionally independent given the
//! anchors. Passing every point of interest as an anchor up front (the
//! transductive mode used by the experiment runner) gives exact joint samples.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::linalg::Cholesky;
use crate::privacy::dd::{concentration_factor, Dd};
use crate::rng;

const EXTENSION_TAG: u64 = 0x6578_7465_6e64; // "extend"

/// Conditional variances this far below zero are treated as roundoff.
const VARIANCE_ROUNDOFF: f64 = 1e-10;

/// Factorized anchor Gram matrix, shared by every projection drawn on the same
/// anchors.
#[derive(Debug, Clone)]
pub struct GpSampler {
    kernel: KernelSpec,
    anchors: Arc<Vec<Vec<f64>>>,
    index: Arc<HashMap<Vec<u64>, usize>>,
    chol: Arc<Cholesky>,
    lower: Arc<DMatrix<f64>>,
}

impl GpSampler {
    pub fn new(kernel: KernelSpec, points: &[Vec<f64>]) -> Result<Self> {
        let gram = kernel.gram(points)?;
        let chol = Cholesky::with_jitter_ladder(&gram.entries, kernel.kappa_sq())?;
        if chol.jitter() > 0.0 {
            log::debug!(
                "gp anchors ({} points) factored with jitter {:e}",
                points.len(),
                chol.jitter()
            );
        }
        Ok(Self::from_factor(kernel, points.to_vec(), chol))
    }

    fn from_factor(kernel: KernelSpec, anchors: Vec<Vec<f64>>, chol: Cholesky) -> Self {
        let mut index = HashMap::with_capacity(anchors.len());
        for (i, a) in anchors.iter().enumerate() {
            index.entry(rng::point_key(a)).or_insert(i);
        }
        let lower = chol.to_dmatrix();
        Self {
            kernel,
            anchors: Arc::new(anchors),
            index: Arc::new(index),
            chol: Arc::new(chol),
            lower: Arc::new(lower),
        }
    }

    pub fn jitter(&self) -> f64 {
        self.chol.jitter()
    }

    pub fn anchors(&self) -> &[Vec<f64>] {
        &self.anchors
    }

    /// Draws `m` paths at the anchors from the stream keyed by `seed`.
    pub fn sample(&self, m: usize, seed: u64) -> Result<GpProjectionMap> {
        if m == 0 {
            return Err(Error::config("projection dimension M must be at least 1"));
        }
        let n = self.anchors.len();
        let mut s = rng::stream(seed);
        // Column-major: path j is drawn as one block of n normals.
        let white = DMatrix::from_vec(n, m, rng::normals(&mut s, n * m));
        let path_values = &*self.lower * white;
        Ok(GpProjectionMap {
            kernel: self.kernel,
            m,
            seed,
            anchors: Arc::clone(&self.anchors),
            index: Arc::clone(&self.index),
            chol: Arc::clone(&self.chol),
            path_values,
            whitened: OnceLock::new(),
            extensions: RwLock::new(HashMap::new()),
        })
    }
}

/// Samples a projection map with `m` paths realized at `points`.
///
/// Deterministic in `(kernel, points, m, seed)`.
pub fn sample_projection(kernel: KernelSpec, points: &[Vec<f64>], m: usize, seed: u64) -> Result<GpProjectionMap> {
    GpSampler::new(kernel, points)?.sample(m, seed)
}

/// A frozen GP random projection `x -> (h(x, w_1), ..., h(x, w_M)) / sqrt(M)`.
#[derive(Debug)]
pub struct GpProjectionMap {
    kernel: KernelSpec,
    m: usize,
    seed: u64,
    anchors: Arc<Vec<Vec<f64>>>,
    index: Arc<HashMap<Vec<u64>, usize>>,
    chol: Arc<Cholesky>,
    /// `h(x_i, w_j)`, unscaled.
    path_values: DMatrix<f64>,
    /// `L^{-1} P`, computed on first extension.
    whitened: OnceLock<DMatrix<f64>>,
    extensions: RwLock<HashMap<Vec<u64>, Arc<[f64]>>>,
}

impl Clone for GpProjectionMap {
    fn clone(&self) -> Self {
        let whitened = OnceLock::new();
        if let Some(w) = self.whitened.get() {
            let _ = whitened.set(w.clone());
        }
        Self {
            kernel: self.kernel,
            m: self.m,
            seed: self.seed,
            anchors: Arc::clone(&self.anchors),
            index: Arc::clone(&self.index),
            chol: Arc::clone(&self.chol),
            path_values: self.path_values.clone(),
            whitened,
            extensions: RwLock::new(self.extensions.read().unwrap().clone()),
        }
    }
}

impl GpProjectionMap {
    /// Rebuilds a map from persisted parts. The anchor Gram is refactored at
    /// the recorded jitter, which reproduces the original factor exactly.
    pub fn from_parts(
        kernel: KernelSpec,
        m: usize,
        seed: u64,
        anchors: Vec<Vec<f64>>,
        path_values: DMatrix<f64>,
        jitter: f64,
    ) -> Result<Self> {
        if path_values.nrows() != anchors.len() || path_values.ncols() != m {
            return Err(Error::data(format!(
                "path matrix is {}x{}, expected {}x{}",
                path_values.nrows(),
                path_values.ncols(),
                anchors.len(),
                m
            )));
        }
        let gram = kernel.gram(&anchors)?;
        let chol = Cholesky::factor(&gram.entries, jitter).map_err(|row| {
            Error::data(format!(
                "stored jitter {jitter:e} does not factor the anchor Gram (row {row})"
            ))
        })?;
        let sampler = GpSampler::from_factor(kernel, anchors, chol);
        Ok(Self {
            kernel,
            m,
            seed,
            anchors: sampler.anchors,
            index: sampler.index,
            chol: sampler.chol,
            path_values,
            whitened: OnceLock::new(),
            extensions: RwLock::new(HashMap::new()),
        })
    }

    pub fn kernel(&self) -> KernelSpec {
        self.kernel
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn jitter(&self) -> f64 {
        self.chol.jitter()
    }

    pub fn anchors(&self) -> &[Vec<f64>] {
        &self.anchors
    }

    pub fn path_values(&self) -> &DMatrix<f64> {
        &self.path_values
    }

    /// Index of `x` among the anchors, by exact coordinate match.
    pub fn anchor_index(&self, x: &[f64]) -> Option<usize> {
        self.index.get(&rng::point_key(x)).copied()
    }

    /// Projected feature of anchor `i`.
    pub fn anchor_feature(&self, i: usize) -> Vec<f64> {
        let scale = 1.0 / (self.m as f64).sqrt();
        self.path_values.row(i).iter().map(|v| v * scale).collect()
    }

    /// Features of all anchors as an `N x M` matrix.
    pub fn anchor_features(&self) -> DMatrix<f64> {
        &self.path_values * (1.0 / (self.m as f64).sqrt())
    }

    /// `h_M(x)`. Anchors are looked up; other points are extended and cached.
    pub fn feature(&self, x: &[f64]) -> Result<Vec<f64>> {
        let scale = 1.0 / (self.m as f64).sqrt();
        Ok(self.path_row(x)?.iter().map(|v| v * scale).collect())
    }

    /// Unscaled path values `(h(x, w_1), ..., h(x, w_M))`.
    pub fn path_row(&self, x: &[f64]) -> Result<Arc<[f64]>> {
        self.check_dim(x)?;
        self.kernel.check_point(x)?;
        if let Some(i) = self.anchor_index(x) {
            return Ok(self.path_values.row(i).iter().copied().collect());
        }
        let key = rng::point_key(x);
        if let Some(row) = self.extensions.read().unwrap().get(&key) {
            return Ok(Arc::clone(row));
        }
        let row = self.extend(x)?;
        let mut cache = self.extensions.write().unwrap();
        Ok(Arc::clone(cache.entry(key).or_insert(row)))
    }

    /// Number of points extended so far.
    pub fn extension_count(&self) -> usize {
        self.extensions.read().unwrap().len()
    }

    /// Conditional mean (per path) and variance of `h(x, .)` given the anchor
    /// values, under the jittered anchor covariance.
    pub fn conditional(&self, x: &[f64]) -> Result<(Vec<f64>, f64)> {
        self.check_dim(x)?;
        self.kernel.check_point(x)?;
        let cross = self.kernel.cross(&self.anchors, x);
        let l = self.chol.forward_solve(&cross);
        let w = self
            .whitened
            .get_or_init(|| self.chol.forward_solve_matrix(&self.path_values));
        let mean: Vec<f64> = w
            .column_iter()
            .map(|col| col.iter().zip(&l).map(|(a, b)| a * b).sum())
            .collect();
        let quad: f64 = l.iter().map(|v| v * v).sum();
        let mut var = self.kernel.eval_unchecked(x, x) + self.chol.jitter() - quad;
        if var < 0.0 {
            if var < -VARIANCE_ROUNDOFF * self.kernel.kappa_sq() {
                return Err(Error::NegativeVariance(var));
            }
            var = 0.0;
        }
        Ok((mean, var))
    }

    fn extend(&self, x: &[f64]) -> Result<Arc<[f64]>> {
        let (mean, var) = self.conditional(x)?;
        let sd = var.sqrt();
        let mut s = rng::stream(rng::point_seed(self.seed, EXTENSION_TAG, x));
        Ok(mean.iter().map(|mu| mu + sd * rng::normal(&mut s)).collect())
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        let d = self.anchors[0].len();
        if x.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: x.len(),
            });
        }
        Ok(())
    }
}

/// High-probability bound on `||h_M(x)||_2^2`:
/// `kappa_sq (1 + 2 sqrt(log(1/t)/M) + 2 log(1/t)/M)`, holding with
/// probability at least `1 - t` over the paths.
pub fn norm_bound(kappa_sq: f64, m: usize, t: f64) -> Result<f64> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::config(format!("t must lie in (0, 1], got {t}")));
    }
    if m == 0 {
        return Err(Error::config("projection dimension M must be at least 1"));
    }
    let factor = concentration_factor(Dd::ONE / Dd::from(t), m);
    Ok((factor * Dd::from(kappa_sq)).to_f64())
}
