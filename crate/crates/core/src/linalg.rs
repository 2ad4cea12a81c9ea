//! Dense factorizations used by the projection and the solvers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Jitter ladder, relative to `kappa_sq`: 0, then 1e-10 up to 1e-4 in x10 steps.
pub const JITTER_LADDER: [f64; 8] = [0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4];

/// Systems whose condition estimate exceeds this are reported as singular.
pub const MAX_CONDITION: f64 = 1e14;

/// Lower Cholesky factor of `A + jitter * I`, stored row-major.
///
/// Computed row by row (Cholesky-Banachiewicz), so the factor of a leading
/// block never depends on later rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky {
    n: usize,
    rows: Vec<f64>,
    jitter: f64,
}

impl Cholesky {
    /// Factors `a + jitter * I`. On failure returns the index of the first
    /// row whose pivot is not positive.
    pub fn factor(a: &DMatrix<f64>, jitter: f64) -> std::result::Result<Self, usize> {
        let n = a.nrows();
        let mut rows = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let (head, tail) = rows.split_at_mut(i * n);
                let li = &tail[..j];
                let lj = if i == j { li } else { &head[j * n..j * n + j] };
                let dot: f64 = li.iter().zip(lj).map(|(p, q)| p * q).sum();
                if i == j {
                    let s = a[(i, i)] + jitter - dot;
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(i);
                    }
                    tail[i] = s.sqrt();
                } else {
                    tail[j] = (a[(i, j)] - dot) / head[j * n + j];
                }
            }
        }
        Ok(Self { n, rows, jitter })
    }

    /// Smallest rung of [`JITTER_LADDER`] (times `kappa_sq`) for which the
    /// factorization succeeds.
    pub fn with_jitter_ladder(a: &DMatrix<f64>, kappa_sq: f64) -> Result<Self> {
        let mut failed_row = 0;
        for rel in JITTER_LADDER {
            match Self::factor(a, rel * kappa_sq) {
                Ok(c) => return Ok(c),
                Err(row) => failed_row = row,
            }
        }
        Err(Error::DegenerateKernel {
            point: failed_row,
            partner: most_correlated(a, failed_row),
            max_jitter: JITTER_LADDER[JITTER_LADDER.len() - 1] * kappa_sq,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Row `i` of the factor, entries `0..=i`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.n..i * self.n + i + 1]
    }

    /// Solves `L x = b`.
    pub fn forward_solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut x = vec![0.0; self.n];
        for i in 0..self.n {
            let row = self.row(i);
            let dot: f64 = row[..i].iter().zip(&x[..i]).map(|(p, q)| p * q).sum();
            x[i] = (b[i] - dot) / row[i];
        }
        x
    }

    /// Solves `L^T x = b`.
    pub fn backward_solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut x = b.to_vec();
        for i in (0..self.n).rev() {
            x[i] /= self.row(i)[i];
            let xi = x[i];
            for (k, l) in self.row(i)[..i].iter().enumerate() {
                x[k] -= l * xi;
            }
        }
        x
    }

    /// Solves `(A + jitter I) x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.backward_solve(&self.forward_solve(b))
    }

    /// Solves `L X = B` column by column.
    pub fn forward_solve_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(b.nrows(), b.ncols());
        for (j, col) in b.column_iter().enumerate() {
            let x = self.forward_solve(col.as_slice());
            out.column_mut(j).copy_from_slice(&x);
        }
        out
    }

    /// Dense lower-triangular copy.
    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.rows)
    }
}

fn most_correlated(a: &DMatrix<f64>, row: usize) -> usize {
    let mut best = (row, f64::NEG_INFINITY);
    for j in 0..a.nrows() {
        if j == row {
            continue;
        }
        let denom = (a[(row, row)] * a[(j, j)]).sqrt();
        let corr = if denom > 0.0 { a[(row, j)] / denom } else { 1.0 };
        if corr > best.1 {
            best = (j, corr);
        }
    }
    best.0
}

/// Eigendecomposition of a symmetric (possibly indefinite) matrix, reused to
/// solve `(A + lambda I) x = b` for several `lambda`.
#[derive(Debug, Clone)]
pub struct SymmetricSolver {
    eigenvectors: DMatrix<f64>,
    eigenvalues: DVector<f64>,
}

impl SymmetricSolver {
    pub fn new(a: DMatrix<f64>) -> Self {
        let eig = SymmetricEigen::new(a);
        Self {
            eigenvectors: eig.eigenvectors,
            eigenvalues: eig.eigenvalues,
        }
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// `max |mu_i + lambda| / min |mu_i + lambda|`.
    pub fn condition(&self, lambda: f64) -> f64 {
        let (lo, hi) = self
            .eigenvalues
            .iter()
            .map(|&mu| (mu + lambda).abs())
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
        if lo == 0.0 {
            f64::INFINITY
        } else {
            hi / lo
        }
    }

    /// Solves `(A + lambda I) x = b`, refusing systems whose condition
    /// estimate exceeds [`MAX_CONDITION`].
    pub fn solve_shifted(&self, lambda: f64, b: &DVector<f64>) -> Result<DVector<f64>> {
        let condition = self.condition(lambda);
        if !(condition <= MAX_CONDITION) {
            return Err(Error::Singular { condition });
        }
        let mut coeffs = self.eigenvectors.tr_mul(b);
        for (c, &mu) in coeffs.iter_mut().zip(self.eigenvalues.iter()) {
            *c /= mu + lambda;
        }
        Ok(&self.eigenvectors * coeffs)
    }
}
