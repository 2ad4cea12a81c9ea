//! Hyperparameter sweeps over `(method, epsilon, M, lambda)` with
//! repetitions, and their CSV records.
//!
//! Every random draw is keyed: repetition `r` draws its data from
//! `seed_split(base, [DATA, r])` and the fit of a grid cell from
//! `seed_split(base, [FIT, r, method code, epsilon bits, M])`. Records
//! therefore do not depend on the number of workers or on which cells
//! fail. All penalties of a cell share one draw of the privacy noise, since
//! the noise scales of the ridge methods do not involve `lambda`.
//!
//! Selecting `lambda` by test error is treated as free of privacy cost;
//! selecting `M` is not, and the sweep does not account for it. The
//! `.meta.txt` file written next to the results says so.

pub mod config;
pub mod summary;

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

pub use config::{DataSource, DeltaRule, LambdaRule, Settings, SweepConfig};
pub use summary::{summarize, write_summary, GroupBy, SummaryRow};

use crate::data::{self, gen_synthetic, load_csv, Dataset, Standardizer, SyntheticSpec};
use crate::erm::ridge::ridge_noise;
use crate::erm::{
    fit_functional_pert, minimize_perturbed, privatize, sufficient_stats, FunctionalConfig, Method, RidgeSolver, Seeds,
};
use crate::error::{Error, ErrorCategory, Result};
use crate::gp::GpSampler;
use crate::privacy::{self, FeatureKind, PrivacyBudget};
use crate::rff::sample_rff;
use crate::rng;

const DATA_TAG: u64 = 0x6461_7461; // "data"
const TARGET_TAG: u64 = 0x7461_7267; // "targ"
const FIT_TAG: u64 = 0x0066_6974; // "fit"
const SPLIT_TAG: u64 = 0x0073_706c; // "spl"

pub const RESULT_COLUMNS: [&str; 10] = [
    "method",
    "epsilon",
    "delta",
    "M",
    "lambda",
    "rep",
    "seed",
    "test_mse",
    "fit_wall_time",
    "status",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Ok,
    Singular,
    OptimizerFailure,
}

impl Status {
    pub fn name(&self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::Singular => "singular",
            Status::OptimizerFailure => "optimizer_failure",
        }
    }

    /// The status recorded for a failed fit, or `None` when the error should
    /// abort the sweep.
    fn of_error(e: &Error) -> Option<Status> {
        match e {
            Error::OptimizerFailure { .. } => Some(Status::OptimizerFailure),
            Error::NonFinite(_) => Some(Status::Singular),
            e if e.category() == ErrorCategory::Numerical => Some(Status::Singular),
            _ => None,
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Status {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ok" => Ok(Status::Ok),
            "singular" => Ok(Status::Singular),
            "optimizer_failure" => Ok(Status::OptimizerFailure),
            other => Err(Error::data(format!("unknown status '{other}'"))),
        }
    }
}

/// One fitted grid cell and penalty in one repetition.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub method: Method,
    pub epsilon: f64,
    pub delta: f64,
    /// Projection dimension; 0 for `functional_pert`.
    pub m: usize,
    pub lambda: f64,
    pub rep: usize,
    /// Base seed of the fit (see [`Seeds::from_base`]).
    pub seed: u64,
    /// `None` unless `status` is ok.
    pub test_mse: Option<f64>,
    /// Seconds spent on the cell's shared work plus this penalty's solve;
    /// only recorded when timing is enabled.
    pub fit_wall_time: Option<f64>,
    pub status: Status,
}

/// Seed of the fit for one cell of one repetition.
pub fn cell_seed(base: u64, rep: usize, method: Method, epsilon: f64, m: usize) -> u64 {
    rng::seed_split(
        base,
        &[FIT_TAG, rep as u64, method.code() as u64, epsilon.to_bits(), m as u64],
    )
}

/// Seed of the data of one repetition.
pub fn data_seed(base: u64, rep: usize) -> u64 {
    rng::seed_split(base, &[DATA_TAG, rep as u64])
}

/// Loads CSV sources once; synthetic data is generated per repetition.
enum Loaded {
    Synthetic,
    Pool(Dataset),
    Fixed(Dataset, Dataset),
}

fn load(cfg: &SweepConfig) -> Result<Loaded> {
    match &cfg.data {
        DataSource::Synthetic { .. } => Ok(Loaded::Synthetic),
        DataSource::Csv {
            path,
            test_path: None,
            options,
            ..
        } => Ok(Loaded::Pool(load_csv(path, options)?)),
        DataSource::Csv {
            path,
            test_path: Some(test),
            options,
            ..
        } => Ok(Loaded::Fixed(load_csv(path, options)?, load_csv(test, options)?)),
    }
}

/// Training and test sets of repetition `rep`.
///
/// Synthetic data is redrawn for every repetition (including the
/// regression function unless `fixed-target` is set). A single CSV file is
/// subsampled and split afresh each time; separate train and test files are
/// reused as they are. Standardization, when enabled, uses training
/// statistics only.
pub fn rep_data(cfg: &SweepConfig, rep: usize) -> Result<(Dataset, Dataset)> {
    rep_data_from(cfg, &load(cfg)?, rep)
}

fn rep_data_from(cfg: &SweepConfig, loaded: &Loaded, rep: usize) -> Result<(Dataset, Dataset)> {
    let seed = data_seed(cfg.base_seed, rep);
    let (train, test) = match (&cfg.data, loaded) {
        (
            DataSource::Synthetic {
                d,
                n_train,
                n_test,
                n_centers,
                noise_sd,
                noise_trunc,
                fixed_target,
            },
            _,
        ) => {
            let spec = SyntheticSpec {
                d: *d,
                n_train: *n_train,
                n_test: *n_test,
                n_centers: *n_centers,
                noise_sd: *noise_sd,
                noise_trunc: *noise_trunc,
                seed,
                target_seed: fixed_target.then(|| rng::seed_split(cfg.base_seed, &[TARGET_TAG])),
            };
            gen_synthetic(&spec)?
        }
        (DataSource::Csv { subsample, n_train, .. }, Loaded::Pool(all)) => {
            let pool = match subsample {
                Some(k) => all.subsample(*k, seed)?,
                None => all.clone(),
            };
            let k = n_train.unwrap_or(pool.len() / 2);
            pool.split(k, rng::seed_split(seed, &[SPLIT_TAG]))?
        }
        (_, Loaded::Fixed(train, test)) => (train.clone(), test.clone()),
        _ => unreachable!("loaded data matches the source"),
    };
    if cfg.standardize {
        let st = Standardizer::fit(&train.x)?;
        Ok((train.standardized(&st)?, test.standardized(&st)?))
    } else {
        Ok((train, test))
    }
}

struct Rep<'a> {
    cfg: &'a SweepConfig,
    rep: usize,
    train: Dataset,
    test: Dataset,
    /// `+1 / -1` labels for margin losses, thresholded at the training median.
    labels: Option<(Vec<f64>, Vec<f64>)>,
    /// Factor of the kernel on train and test points, or the status of every
    /// GP-projection cell when it failed. `None` when no method needs it.
    sampler: Option<std::result::Result<GpSampler, Status>>,
    lambdas: Vec<f64>,
    delta: f64,
}

impl Rep<'_> {
    fn uses_labels(&self, method: Method) -> bool {
        method.is_objpert() || (method == Method::FunctionalPert && self.cfg.loss.is_margin())
    }

    fn targets(&self, method: Method) -> (&[f64], &[f64]) {
        match (&self.labels, self.uses_labels(method)) {
            (Some((tr, te)), true) => (tr, te),
            _ => (&self.train.y, &self.test.y),
        }
    }

    /// Train and test feature matrices.
    fn features(&self, method: Method, m: usize, seeds: Seeds) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        match method {
            Method::RpRidge | Method::RpObjpert => {
                let Some(Ok(sampler)) = &self.sampler else {
                    unreachable!("projection cells only run with a factored kernel")
                };
                let map = sampler.sample(m, seeds.map)?;
                let all = map.anchor_features();
                let n = self.train.len();
                let test_rows: Vec<usize> = self
                    .test
                    .x
                    .iter()
                    .map(|p| map.anchor_index(p).expect("test points are anchors"))
                    .collect();
                Ok((all.rows(0, n).into_owned(), all.select_rows(test_rows.iter())))
            }
            _ => {
                let map = sample_rff(self.cfg.kernel, self.train.dim(), m, seeds.map)?;
                Ok((map.features(&self.train.x)?, map.features(&self.test.x)?))
            }
        }
    }

    /// `(lambda, test error, seconds)` per penalty. An error returned from
    /// here (rather than per penalty) applies to every penalty of the cell.
    fn run_cell(
        &self,
        method: Method,
        budget: PrivacyBudget,
        m: usize,
        seeds: Seeds,
    ) -> Result<Vec<(f64, Result<f64>, f64)>> {
        let cfg = self.cfg;
        let (y_train, y_test) = self.targets(method);
        let n = self.train.len();
        let start = Instant::now();
        let mut out = Vec::with_capacity(self.lambdas.len());
        match method {
            Method::RpRidge | Method::RffRidge => {
                let (z, z_test) = self.features(method, m, seeds)?;
                let stats = sufficient_stats(&z, y_train, cfg.truncation, cfg.u_clip)?;
                let (c, u) = ridge_noise(method, cfg.kernel, m, n, cfg.truncation, &budget, cfg.u_clip)?;
                let solver = RidgeSolver::new(&privatize(&stats, c, u, seeds.noise));
                let shared = start.elapsed().as_secs_f64();
                for &lambda in &self.lambdas {
                    let t = Instant::now();
                    let err = solver.solve(lambda).and_then(|beta| {
                        let pred = &z_test * DVector::from_vec(beta);
                        data::mse(pred.as_slice(), y_test)
                    });
                    out.push((lambda, err, shared + t.elapsed().as_secs_f64()));
                }
            }
            Method::RpObjpert | Method::RffObjpert => {
                let kind = if method == Method::RpObjpert {
                    FeatureKind::Rp
                } else {
                    FeatureKind::Rff
                };
                let (c1, c2) = (cfg.loss.c1().unwrap_or(1.0), cfg.loss.c2().unwrap_or(1.0));
                let (z, z_test) = self.features(method, m, seeds)?;
                let normals = rng::normals(&mut rng::stream(seeds.noise), m);
                let shared = start.elapsed().as_secs_f64();
                for &lambda in &self.lambdas {
                    let t = Instant::now();
                    let err = privacy::objpert_scales(cfg.kernel.kappa_sq(), m, n, c1, c2, lambda, &budget, kind)
                        .and_then(|s| {
                            let b: Vec<f64> = normals.iter().map(|v| v * s.objpert_b_std).collect();
                            minimize_perturbed(&z, y_train, cfg.loss, s.effective_lambda(lambda), &b)
                        })
                        .and_then(|beta| {
                            let pred = &z_test * DVector::from_vec(beta);
                            data::mse(pred.as_slice(), y_test)
                        });
                    out.push((lambda, err, shared + t.elapsed().as_secs_f64()));
                }
            }
            Method::FunctionalPert => {
                for &lambda in &self.lambdas {
                    let t = Instant::now();
                    let fcfg = FunctionalConfig {
                        lambda,
                        loss: cfg.loss,
                        truncation: Some(cfg.truncation),
                        budget,
                    };
                    let err = fit_functional_pert(&self.train.x, y_train, cfg.kernel, &fcfg, seeds, &self.test.x)
                        .and_then(|model| model.predict_many(&self.test.x))
                        .and_then(|pred| data::mse(&pred, y_test));
                    out.push((lambda, err, t.elapsed().as_secs_f64()));
                }
            }
        }
        Ok(out)
    }

    fn records(&self, method: Method, epsilon: f64, m: usize) -> Result<Vec<ResultRecord>> {
        let seed = cell_seed(self.cfg.base_seed, self.rep, method, epsilon, m);
        let budget = PrivacyBudget::new(epsilon, self.delta)?;
        let cell = match (&self.sampler, method) {
            (Some(Err(status)), Method::RpRidge | Method::RpObjpert) => Err(*status),
            _ => match self.run_cell(method, budget, m, Seeds::from_base(seed)) {
                Ok(o) => Ok(o),
                Err(e) => Err(Status::of_error(&e).ok_or(e)?),
            },
        };
        let outcomes = match cell {
            Ok(o) => o,
            Err(status) => {
                log::debug!("{method} eps={epsilon} M={m} rep={}: {status}", self.rep);
                return Ok(self
                    .lambdas
                    .iter()
                    .map(|&lambda| self.record(method, epsilon, m, lambda, seed, None, None, status))
                    .collect());
            }
        };
        outcomes
            .into_iter()
            .map(|(lambda, err, secs)| {
                let (test_mse, status) = match err {
                    Ok(v) => (Some(v), Status::Ok),
                    Err(e) => (None, Status::of_error(&e).ok_or(e)?),
                };
                let time = self.cfg.timing.then_some(secs);
                Ok(self.record(method, epsilon, m, lambda, seed, test_mse, time, status))
            })
            .collect()
    }

    #[allow(clippy::too_many_arguments)]
    fn record(
        &self,
        method: Method,
        epsilon: f64,
        m: usize,
        lambda: f64,
        seed: u64,
        test_mse: Option<f64>,
        fit_wall_time: Option<f64>,
        status: Status,
    ) -> ResultRecord {
        ResultRecord {
            method,
            epsilon,
            delta: self.delta,
            m,
            lambda,
            rep: self.rep,
            seed,
            test_mse,
            fit_wall_time,
            status,
        }
    }
}

/// Runs every cell of the sweep and returns the records ordered by
/// method, epsilon, repetition, `M` and `lambda` (grid order).
///
/// Numerical failures become records with a non-ok status; only invalid
/// configurations and unreadable data are errors.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<ResultRecord>> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::config(format!("cannot start {} workers: {e}", cfg.jobs)))?;
    let loaded = load(cfg)?;
    let needs_gp = cfg
        .methods
        .iter()
        .any(|m| matches!(m, Method::RpRidge | Method::RpObjpert));

    let mut cells: Vec<(usize, usize, Method, f64, usize)> = Vec::new();
    for (mi, &method) in cfg.methods.iter().enumerate() {
        for (ei, &eps) in cfg.epsilons.iter().enumerate() {
            if method == Method::FunctionalPert {
                cells.push((mi, ei, method, eps, 0));
            } else {
                cells.extend(cfg.m_grid.iter().map(|&m| (mi, ei, method, eps, m)));
            }
        }
    }

    let mut keyed: Vec<((usize, usize, usize), Vec<ResultRecord>)> = Vec::new();
    for rep in 0..cfg.reps {
        let (train, test) = rep_data_from(cfg, &loaded, rep)?;
        let labels = cfg.loss.is_margin().then(|| {
            let threshold = data::median(&train.y);
            (train.to_labels(threshold).y, test.to_labels(threshold).y)
        });
        let sampler = if needs_gp {
            let anchors = crate::erm::ridge::merge_anchors(&train.x, &test.x);
            match GpSampler::new(cfg.kernel, &anchors) {
                Ok(s) => Some(Ok(s)),
                Err(e) => {
                    let status = Status::of_error(&e).ok_or(e)?;
                    log::warn!("rep {rep}: kernel factorization failed");
                    Some(Err(status))
                }
            }
        } else {
            None
        };
        let n = train.len();
        let ctx = Rep {
            cfg,
            rep,
            lambdas: cfg.lambda.resolve(n),
            delta: cfg.delta.resolve(n),
            train,
            test,
            labels,
            sampler,
        };
        let results: Vec<Result<Vec<ResultRecord>>> = pool.install(|| {
            cells
                .par_iter()
                .map(|&(_, _, method, eps, m)| ctx.records(method, eps, m))
                .collect()
        });
        for (&(mi, ei, ..), r) in cells.iter().zip(results) {
            keyed.push(((mi, ei, rep), r?));
        }
        log::debug!("rep {rep} done");
    }
    // Stable: cells of one key keep their M and lambda order.
    keyed.sort_by_key(|(k, _)| *k);
    Ok(keyed.into_iter().flat_map(|(_, r)| r).collect())
}

pub(crate) fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes records as CSV with the [`RESULT_COLUMNS`] header.
pub fn write_results(path: &Path, records: &[ResultRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", RESULT_COLUMNS.join(","))?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            r.method,
            fmt_real(r.epsilon),
            fmt_real(r.delta),
            r.m,
            fmt_real(r.lambda),
            r.rep,
            r.seed,
            r.test_mse.map(fmt_real).unwrap_or_default(),
            r.fit_wall_time.map(fmt_real).unwrap_or_default(),
            r.status
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a file written by [`write_results`].
pub fn read_results(path: &Path) -> Result<Vec<ResultRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::data(format!("cannot read {}: {e}", path.display())))?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != RESULT_COLUMNS {
        return Err(Error::data(format!(
            "{}: expected columns {}",
            path.display(),
            RESULT_COLUMNS.join(",")
        )));
    }
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        let field = |j: usize| rec.get(j).unwrap_or("");
        let bad = |j: usize, what: &str| Error::Parse {
            row,
            column: j + 1,
            message: format!("'{}' is not {what}", field(j)),
        };
        let real = |j: usize| field(j).parse::<f64>().map_err(|_| bad(j, "a number"));
        let opt_real = |j: usize| match field(j) {
            "" => Ok(None),
            _ => real(j).map(Some),
        };
        let int = |j: usize| field(j).parse::<u64>().map_err(|_| bad(j, "an integer"));
        out.push(ResultRecord {
            method: field(0).parse().map_err(|_| bad(0, "a method"))?,
            epsilon: real(1)?,
            delta: real(2)?,
            m: int(3)? as usize,
            lambda: real(4)?,
            rep: int(5)? as usize,
            seed: int(6)?,
            test_mse: opt_real(7)?,
            fit_wall_time: opt_real(8)?,
            status: field(9).parse().map_err(|_| bad(9, "a status"))?,
        });
    }
    Ok(out)
}

/// Path of the metadata file that accompanies a results file.
pub fn meta_path(results: &Path) -> PathBuf {
    let mut s = results.as_os_str().to_owned();
    s.push(".meta.txt");
    PathBuf::from(s)
}

/// Writes the resolved configuration and the tuning caveat.
pub fn write_meta(results: &Path, cfg: &SweepConfig) -> Result<()> {
    let mut w = BufWriter::new(File::create(meta_path(results))?);
    writeln!(
        w,
        "# Resolved sweep configuration; this file can be passed back as --config."
    )?;
    writeln!(
        w,
        "# Tuning note: picking lambda by test error is treated as privacy-free. Picking M is"
    )?;
    writeln!(
        w,
        "# not, and the reported best-over-(M, lambda) errors do not pay for that selection."
    )?;
    writeln!(w, "# Columns: {}", RESULT_COLUMNS.join(","))?;
    write!(w, "{}", cfg.describe())?;
    w.flush()?;
    Ok(())
}
