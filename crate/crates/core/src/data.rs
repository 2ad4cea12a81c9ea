//! Synthetic data, CSV ingestion, standardization and error metrics.
//!
//! Standardization statistics are computed from the training rows and applied
//! unchanged to test rows. This is not itself differentially private: the
//! feature means and standard deviations of the training set leak
//! information about it, exactly as in the experiments this harness
//! reproduces. Private preprocessing is out of scope.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::rng;

const TARGET_TAG: u64 = 0x7461_7267; // "targ"
const TRAIN_TAG: u64 = 0x0074_726e; // "trn"
const TEST_TAG: u64 = 0x0074_7374; // "tst"
const SHUFFLE_TAG: u64 = 0x7368_7566; // "shuf"

/// A design matrix (one `Vec` per row) and responses.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    /// Noiseless regression function at each row, when known.
    pub signal: Option<Vec<f64>>,
    /// Feature transform already applied to `x`.
    pub standardizer: Option<Standardizer>,
    /// Constant subtracted from the responses.
    pub response_shift: Option<f64>,
}

impl Dataset {
    pub fn new(x: Vec<Vec<f64>>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::data(format!("{} rows but {} responses", x.len(), y.len())));
        }
        if x.is_empty() {
            return Err(Error::data("dataset has no rows"));
        }
        let d = x[0].len();
        if d == 0 {
            return Err(Error::data("dataset has no feature columns"));
        }
        for (i, row) in x.iter().enumerate() {
            if row.len() != d {
                return Err(Error::data(format!("row {i} has {} features, expected {d}", row.len())));
            }
            if row.iter().any(|v| !v.is_finite()) || !y[i].is_finite() {
                return Err(Error::NonFinite(format!("row {i}")));
            }
        }
        Ok(Self {
            x,
            y,
            signal: None,
            standardizer: None,
            response_shift: None,
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x[0].len()
    }

    fn select(&self, rows: &[usize]) -> Dataset {
        Dataset {
            x: rows.iter().map(|&i| self.x[i].clone()).collect(),
            y: rows.iter().map(|&i| self.y[i]).collect(),
            signal: self.signal.as_ref().map(|s| rows.iter().map(|&i| s[i]).collect()),
            standardizer: self.standardizer.clone(),
            response_shift: self.response_shift,
        }
    }

    fn permutation(&self, seed: u64) -> Vec<usize> {
        let mut s = rng::stream(rng::seed_split(seed, &[SHUFFLE_TAG]));
        let mut idx: Vec<usize> = (0..self.len()).collect();
        // Fisher-Yates with uniform draws from the keyed stream.
        for i in (1..idx.len()).rev() {
            let j = ((rng::uniform(&mut s) * (i + 1) as f64) as usize).min(i);
            idx.swap(i, j);
        }
        idx
    }

    /// A uniformly random subset of `k` rows, in random order.
    pub fn subsample(&self, k: usize, seed: u64) -> Result<Dataset> {
        if k == 0 || k > self.len() {
            return Err(Error::config(format!("cannot subsample {k} rows from {}", self.len())));
        }
        let idx = self.permutation(seed);
        Ok(self.select(&idx[..k]))
    }

    /// Random split into `n_train` training rows and the rest.
    pub fn split(&self, n_train: usize, seed: u64) -> Result<(Dataset, Dataset)> {
        if n_train == 0 || n_train >= self.len() {
            return Err(Error::config(format!(
                "training size {n_train} must lie in [1, {})",
                self.len()
            )));
        }
        let idx = self.permutation(seed);
        Ok((self.select(&idx[..n_train]), self.select(&idx[n_train..])))
    }

    /// Applies a fitted standardizer to the features.
    pub fn standardized(&self, st: &Standardizer) -> Result<Dataset> {
        if self.standardizer.is_some() {
            return Err(Error::config("dataset is already standardized"));
        }
        Ok(Dataset {
            x: self.x.iter().map(|r| st.apply(r)).collect::<Result<_>>()?,
            y: self.y.clone(),
            signal: self.signal.clone(),
            standardizer: Some(st.clone()),
            response_shift: self.response_shift,
        })
    }

    /// Subtracts `center` from every response (and from the signal).
    pub fn centered(&self, center: f64) -> Dataset {
        let mut out = self.clone();
        out.y.iter_mut().for_each(|v| *v -= center);
        if let Some(s) = out.signal.as_mut() {
            s.iter_mut().for_each(|v| *v -= center);
        }
        out.response_shift = Some(self.response_shift.unwrap_or(0.0) + center);
        out
    }

    /// Binary labels `+1` if `y > threshold`, else `-1`.
    pub fn to_labels(&self, threshold: f64) -> Dataset {
        let mut out = self.clone();
        out.y = self.y.iter().map(|&v| if v > threshold { 1.0 } else { -1.0 }).collect();
        out.signal = None;
        out
    }

    /// Writes `y,x1,...,xd` with a header row. Values use the shortest
    /// representation that parses back to the same `f64`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        let header: Vec<String> = std::iter::once("y".to_string())
            .chain((1..=self.dim()).map(|j| format!("x{j}")))
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for (row, y) in self.x.iter().zip(&self.y) {
            let mut line = y.to_string();
            for v in row {
                line.push(',');
                line.push_str(&v.to_string());
            }
            writeln!(w, "{line}")?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Per-column centering and scaling fitted on training rows. Constant
/// columns are dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    input_dim: usize,
    kept: Vec<usize>,
    means: Vec<f64>,
    sds: Vec<f64>,
}

impl Standardizer {
    /// Column means and sample standard deviations (divisor `n - 1`).
    pub fn fit(x: &[Vec<f64>]) -> Result<Self> {
        if x.len() < 2 {
            return Err(Error::data("standardization needs at least two rows"));
        }
        let d = x[0].len();
        let n = x.len() as f64;
        let mut kept = Vec::new();
        let mut means = Vec::new();
        let mut sds = Vec::new();
        for j in 0..d {
            let mean = x.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = x.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let sd = var.sqrt();
            if sd > 0.0 && sd.is_finite() {
                kept.push(j);
                means.push(mean);
                sds.push(sd);
            } else {
                log::warn!("column {j} is constant on the training rows and is dropped");
            }
        }
        if kept.is_empty() {
            return Err(Error::data("every feature column is constant"));
        }
        Ok(Self {
            input_dim: d,
            kept,
            means,
            sds,
        })
    }

    pub fn from_parts(input_dim: usize, kept: Vec<usize>, means: Vec<f64>, sds: Vec<f64>) -> Result<Self> {
        if kept.len() != means.len() || kept.len() != sds.len() || kept.is_empty() {
            return Err(Error::data("standardizer parts have inconsistent lengths"));
        }
        if kept.iter().any(|&j| j >= input_dim) || kept.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::data("standardizer column indices are invalid"));
        }
        if sds.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::data("standardizer scales must be positive"));
        }
        Ok(Self {
            input_dim,
            kept,
            means,
            sds,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.kept.len()
    }

    pub fn kept(&self) -> &[usize] {
        &self.kept
    }

    /// Columns removed because they were constant.
    pub fn dropped(&self) -> Vec<usize> {
        (0..self.input_dim).filter(|j| !self.kept.contains(j)).collect()
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn sds(&self) -> &[f64] {
        &self.sds
    }

    pub fn apply(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: row.len(),
            });
        }
        Ok(self
            .kept
            .iter()
            .zip(self.means.iter().zip(&self.sds))
            .map(|(&j, (m, s))| (row[j] - m) / s)
            .collect())
    }

    /// Original values of the kept columns.
    pub fn invert(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.kept.len() {
            return Err(Error::DimensionMismatch {
                expected: self.kept.len(),
                got: z.len(),
            });
        }
        Ok(z.iter()
            .zip(self.means.iter().zip(&self.sds))
            .map(|(v, (m, s))| v * s + m)
            .collect())
    }
}

/// Parameters of the synthetic regression model
/// `y = sum_j c_j k(x, z_j) + noise`, with `k` the Gaussian kernel of
/// bandwidth 1, `c_j ~ U[0, 1]`, `z_j, x ~ U[0, 1]^d` and normal noise
/// truncated to `[-noise_trunc, noise_trunc]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub d: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub n_centers: usize,
    pub noise_sd: f64,
    pub noise_trunc: f64,
    pub seed: u64,
    /// When set, the centers and coefficients come from this seed instead of
    /// `seed`, so that repetitions share one regression function.
    pub target_seed: Option<u64>,
}

impl SyntheticSpec {
    /// 10 centers, noise sd 0.1 truncated at 0.1.
    pub fn new(d: usize, n_train: usize, n_test: usize, seed: u64) -> Self {
        Self {
            d,
            n_train,
            n_test,
            n_centers: 10,
            noise_sd: 0.1,
            noise_trunc: 0.1,
            seed,
            target_seed: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.d == 0 || self.n_train == 0 || self.n_test == 0 || self.n_centers == 0 {
            return Err(Error::config("synthetic dimensions and counts must be positive"));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::config("noise sd must be nonnegative"));
        }
        if !(self.noise_trunc >= 0.0) {
            return Err(Error::config("noise truncation must be nonnegative"));
        }
        Ok(())
    }
}

/// The regression function `f(x) = sum_j c_j k(x, z_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTarget {
    pub coefficients: Vec<f64>,
    pub centers: Vec<Vec<f64>>,
}

impl SyntheticTarget {
    pub fn draw(d: usize, n_centers: usize, seed: u64) -> Self {
        let mut s = rng::stream(seed);
        let coefficients = (0..n_centers).map(|_| rng::uniform(&mut s)).collect();
        let centers = (0..n_centers)
            .map(|_| (0..d).map(|_| rng::uniform(&mut s)).collect())
            .collect();
        Self { coefficients, centers }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let k = KernelSpec::gaussian(1.0).expect("unit bandwidth");
        self.coefficients
            .iter()
            .zip(&self.centers)
            .map(|(c, z)| c * k.eval_unchecked(x, z))
            .sum()
    }
}

/// Normal noise with standard deviation `sd`, redrawn until it falls in
/// `[-trunc, trunc]`. A zero `sd` or `trunc` gives exactly zero.
pub fn truncated_normal<R: rand::Rng + ?Sized>(rng: &mut R, sd: f64, trunc: f64) -> f64 {
    if sd == 0.0 || trunc == 0.0 {
        return 0.0;
    }
    loop {
        let e = sd * rng::normal(rng);
        if e.abs() <= trunc {
            return e;
        }
    }
}

fn draw_rows(spec: &SyntheticSpec, target: &SyntheticTarget, n: usize, seed: u64) -> Dataset {
    let mut s = rng::stream(seed);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut signal = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..spec.d).map(|_| rng::uniform(&mut s)).collect();
        let f = target.eval(&row);
        y.push(f + truncated_normal(&mut s, spec.noise_sd, spec.noise_trunc));
        signal.push(f);
        x.push(row);
    }
    Dataset {
        x,
        y,
        signal: Some(signal),
        standardizer: None,
        response_shift: None,
    }
}

/// Training and test sets drawn from one synthetic regression function.
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<(Dataset, Dataset)> {
    spec.validate()?;
    let target_seed = spec
        .target_seed
        .unwrap_or_else(|| rng::seed_split(spec.seed, &[TARGET_TAG]));
    let target = SyntheticTarget::draw(spec.d, spec.n_centers, target_seed);
    let train = draw_rows(spec, &target, spec.n_train, rng::seed_split(spec.seed, &[TRAIN_TAG]));
    let test = draw_rows(spec, &target, spec.n_test, rng::seed_split(spec.seed, &[TEST_TAG]));
    Ok((train, test))
}

/// How to read a CSV data file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsvOptions {
    /// Zero-based index of the response column.
    pub response_col: usize,
    /// Subtracted from every response when given.
    pub response_center: Option<f64>,
    /// `None` detects a header: the first row is a header if any of its
    /// fields is not a number.
    pub header: Option<bool>,
}

fn parse_field(field: &str, row: usize, column: usize) -> Result<f64> {
    let t = field.trim();
    if t.is_empty() {
        return Err(Error::Parse {
            row,
            column,
            message: "empty cell".into(),
        });
    }
    let v: f64 = t.parse().map_err(|_| Error::Parse {
        row,
        column,
        message: format!("'{t}' is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            row,
            column,
            message: format!("'{t}' is not finite"),
        });
    }
    Ok(v)
}

/// Reads a comma-separated numeric file. Rows and columns in error messages
/// are 1-based as in a text editor.
pub fn load_csv(path: &Path, opts: &CsvOptions) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::data(format!("cannot read {}: {e}", path.display())))?;
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut width = None;
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 1;
        if i == 0 {
            let is_header = match opts.header {
                Some(h) => h,
                None => record.iter().any(|f| f.trim().parse::<f64>().is_err()),
            };
            if is_header {
                width = Some(record.len());
                continue;
            }
        }
        let w = *width.get_or_insert(record.len());
        if record.len() != w {
            return Err(Error::Parse {
                row,
                column: record.len().min(w) + 1,
                message: format!("expected {w} fields, found {}", record.len()),
            });
        }
        if opts.response_col >= w {
            return Err(Error::config(format!(
                "response column {} is out of range for {w} columns",
                opts.response_col
            )));
        }
        let mut features = Vec::with_capacity(w - 1);
        for (j, field) in record.iter().enumerate() {
            let v = parse_field(field, row, j + 1)?;
            if j == opts.response_col {
                y.push(v);
            } else {
                features.push(v);
            }
        }
        x.push(features);
    }
    let ds = Dataset::new(x, y).map_err(|e| match e {
        Error::Data(m) => Error::data(format!("{}: {m}", path.display())),
        other => other,
    })?;
    Ok(match opts.response_center {
        Some(c) => ds.centered(c),
        None => ds,
    })
}

/// Mean squared difference.
pub fn mse(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: targets.len(),
            got: predictions.len(),
        });
    }
    if targets.is_empty() {
        return Err(Error::data("cannot compute the error of an empty set"));
    }
    let sum: f64 = predictions.iter().zip(targets).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(sum / targets.len() as f64)
}

/// Median of a nonempty slice (mean of the two middle values for even length).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
