//! Sweep configuration: a flat `key = value` file whose keys are the CLI
//! flag names without the leading dashes.
//!
//! ```text
//! # Synthetic run, d = 10
//! method   = rp_ridge, rff_ridge
//! epsilon  = 10^-1, 10^-0.5, 1, 10^0.5, 10
//! delta    = n^-1.1          # or a number
//! M        = log:10:1000:13  # or a list such as 25, 50, 100
//! lambda   = n^-0.1i:10      # n^(-0.1 i) for i = 0..=10, or a list
//! reps     = 100
//! seed     = 20240601
//! data     = synthetic       # or a CSV path
//! d        = 10
//! n-train  = 1000
//! n-test   = 1000
//! ```
//!
//! | key | default | meaning |
//! |-----|---------|---------|
//! | `method` | `rp_ridge, rff_ridge` | methods to run |
//! | `epsilon` | `10^-1, 10^-0.5, 1, 10^0.5, 10` | privacy levels; `inf` disables noise |
//! | `delta` | `n^-1.1` | `n^-p` of the training size, or a fixed value |
//! | `M` | `log:10:1000:13` | projection dimensions |
//! | `lambda` | `n^-0.1i:10` | penalties |
//! | `reps` | `100` | repetitions |
//! | `seed` | required | base seed of every random draw |
//! | `jobs` | `1` | worker threads |
//! | `kernel`, `bandwidth` | `gaussian`, `1` | kernel; for `linear` the parameter bounds `‖x‖²` |
//! | `T` | `n-centers + noise-trunc` for synthetic data, required otherwise | response truncation |
//! | `loss`, `huber-h` | `squared`, `0.5` | loss of the objective-perturbation and functional methods |
//! | `u-clip` | `elementwise` | `elementwise` or `l2norm` (rp_ridge only) |
//! | `data` | `synthetic` | `synthetic` or a CSV path |
//! | `d`, `n-train`, `n-test`, `n-centers`, `noise-sd`, `noise-trunc` | `10, 1000, 1000, 10, 0.1, 0.1` | synthetic model |
//! | `fixed-target` | `false` | share one regression function across repetitions |
//! | `test-data` | none | separate CSV test file; otherwise each repetition splits `data` |
//! | `subsample` | all rows | rows drawn from `data` per repetition before splitting |
//! | `response-col`, `response-center`, `header` | `0`, none, auto | CSV layout |
//! | `standardize` | `false` | standardize features with training statistics |
//! | `timing` | `false` | fill the `fit_wall_time` column |
//!
//! Keys may be written with `_` instead of `-`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::data::CsvOptions;
use crate::erm::{Method, UClip};
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::loss::LossSpec;

const KEYS: &[&str] = &[
    "method",
    "epsilon",
    "delta",
    "M",
    "lambda",
    "reps",
    "seed",
    "jobs",
    "kernel",
    "bandwidth",
    "T",
    "loss",
    "huber-h",
    "u-clip",
    "data",
    "test-data",
    "subsample",
    "d",
    "n-train",
    "n-test",
    "n-centers",
    "noise-sd",
    "noise-trunc",
    "fixed-target",
    "response-col",
    "response-center",
    "header",
    "standardize",
    "timing",
];

/// Raw key-value settings, before validation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

fn normalize_key(key: &str) -> Result<String> {
    let k = key.trim().replace('_', "-");
    // `m` and `t` are accepted for the single-letter keys.
    let k = match k.as_str() {
        "m" => "M".to_string(),
        "t" => "T".to_string(),
        _ => k,
    };
    if KEYS.contains(&k.as_str()) {
        Ok(k)
    } else {
        Err(Error::config(format!("unknown configuration key '{}'", key.trim())))
    }
}

impl Settings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut s = Self::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::config(format!("config line {}: expected 'key = value'", i + 1)));
            };
            let key = normalize_key(k)?;
            if s.values.contains_key(&key) {
                return Err(Error::config(format!("config line {}: '{key}' set twice", i + 1)));
            }
            s.values.insert(key, v.trim().to_string());
        }
        Ok(s)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Sets or overrides a key.
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        let key = normalize_key(key)?;
        self.values.insert(key, value.into());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn parsed<T>(&self, key: &str, parse: impl Fn(&str) -> Result<T>) -> Result<Option<T>> {
        self.get(key)
            .map(|v| parse(v).map_err(|e| Error::config(format!("{key}: {e}"))))
            .transpose()
    }
}

/// A real number: a decimal literal, `inf`, or `10^x`.
pub fn parse_real(s: &str) -> Result<f64> {
    let t = s.trim();
    let v = if let Some(exp) = t.strip_prefix("10^") {
        exp.trim()
            .parse::<f64>()
            .map(|e| 10f64.powf(e))
            .map_err(|_| Error::config(format!("bad exponent in '{t}'")))?
    } else {
        t.parse::<f64>()
            .map_err(|_| Error::config(format!("'{t}' is not a number")))?
    };
    if v.is_nan() {
        return Err(Error::config(format!("'{t}' is not a number")));
    }
    Ok(v)
}

fn parse_count(s: &str) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| Error::config(format!("'{}' is not a nonnegative integer", s.trim())))
}

fn parse_seed(s: &str) -> Result<u64> {
    let t = s.trim();
    let parsed = match t.strip_prefix("0x") {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => t.parse(),
    };
    parsed.map_err(|_| Error::config(format!("'{t}' is not a 64-bit seed")))
}

pub fn parse_bool(s: &str) -> Result<bool> {
    match s.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(Error::config(format!("'{other}' is not a boolean"))),
    }
}

fn parse_list<T>(s: &str, item: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    let v: Vec<T> = s
        .split(',')
        .filter(|p| !p.trim().is_empty())
        .map(item)
        .collect::<Result<_>>()?;
    if v.is_empty() {
        return Err(Error::config("empty list"));
    }
    Ok(v)
}

/// `log:lo:hi:k` gives `k` log-spaced integers from `lo` to `hi`, rounded and
/// deduplicated.
fn parse_m_grid(s: &str) -> Result<Vec<usize>> {
    let t = s.trim();
    if let Some(rest) = t.strip_prefix("log:") {
        let parts: Vec<&str> = rest.split(':').collect();
        let [lo, hi, k] = parts.as_slice() else {
            return Err(Error::config("expected log:lo:hi:count"));
        };
        let (lo, hi, k) = (parse_count(lo)?, parse_count(hi)?, parse_count(k)?);
        if lo == 0 || hi < lo || k == 0 {
            return Err(Error::config("log grid needs 1 <= lo <= hi and count >= 1"));
        }
        return Ok(log_grid(lo, hi, k));
    }
    let v = parse_list(t, parse_count)?;
    if v.contains(&0) {
        return Err(Error::config("M must be at least 1"));
    }
    Ok(v)
}

pub fn log_grid(lo: usize, hi: usize, k: usize) -> Vec<usize> {
    if k == 1 {
        return vec![lo];
    }
    let (a, b) = ((lo as f64).log10(), (hi as f64).log10());
    let mut out: Vec<usize> = (0..k)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (k - 1) as f64).round() as usize)
        .collect();
    out.dedup();
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaRule {
    /// `n^(-p)` for training size `n`.
    PowerOfN(f64),
    Fixed(f64),
}

impl DeltaRule {
    pub fn resolve(&self, n: usize) -> f64 {
        match *self {
            DeltaRule::PowerOfN(p) => (n as f64).powf(-p),
            DeltaRule::Fixed(d) => d,
        }
    }

    fn parse(s: &str) -> Result<Self> {
        let t = s.trim();
        match t.strip_prefix("n^-") {
            Some(p) => Ok(DeltaRule::PowerOfN(parse_real(p)?)),
            None => {
                let d = parse_real(t)?;
                if !(d > 0.0 && d < 1.0) {
                    return Err(Error::config(format!("delta must lie in (0, 1), got {d}")));
                }
                Ok(DeltaRule::Fixed(d))
            }
        }
    }

    fn describe(&self) -> String {
        match self {
            DeltaRule::PowerOfN(p) => format!("n^-{p}"),
            DeltaRule::Fixed(d) => d.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LambdaRule {
    /// `n^(-step * i)` for `i = 0..=last`.
    PowersOfN {
        step: f64,
        last: usize,
    },
    Fixed(Vec<f64>),
}

impl LambdaRule {
    pub fn resolve(&self, n: usize) -> Vec<f64> {
        match self {
            LambdaRule::PowersOfN { step, last } => (0..=*last).map(|i| (n as f64).powf(-step * i as f64)).collect(),
            LambdaRule::Fixed(v) => v.clone(),
        }
    }

    fn parse(s: &str) -> Result<Self> {
        let t = s.trim();
        if let Some(rest) = t.strip_prefix("n^-") {
            let (step, last) = rest
                .split_once("i:")
                .ok_or_else(|| Error::config("expected n^-<step>i:<last>"))?;
            return Ok(LambdaRule::PowersOfN {
                step: parse_real(step)?,
                last: parse_count(last)?,
            });
        }
        let v = parse_list(t, parse_real)?;
        if v.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(Error::config("lambda values must be positive"));
        }
        Ok(LambdaRule::Fixed(v))
    }

    fn describe(&self) -> String {
        match self {
            LambdaRule::PowersOfN { step, last } => format!("n^-{step}i:{last}"),
            LambdaRule::Fixed(v) => join(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synthetic {
        d: usize,
        n_train: usize,
        n_test: usize,
        n_centers: usize,
        noise_sd: f64,
        noise_trunc: f64,
        fixed_target: bool,
    },
    Csv {
        path: PathBuf,
        test_path: Option<PathBuf>,
        options: CsvOptions,
        subsample: Option<usize>,
        /// Training rows per repetition when `test_path` is absent; `None`
        /// uses half of the (subsampled) rows.
        n_train: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub methods: Vec<Method>,
    pub epsilons: Vec<f64>,
    pub delta: DeltaRule,
    pub m_grid: Vec<usize>,
    pub lambda: LambdaRule,
    pub reps: usize,
    pub base_seed: u64,
    pub jobs: usize,
    pub data: DataSource,
    pub standardize: bool,
    pub kernel: KernelSpec,
    pub truncation: f64,
    pub loss: LossSpec,
    pub u_clip: UClip,
    pub timing: bool,
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(", ")
}

impl SweepConfig {
    /// The default grids on synthetic data.
    pub fn synthetic(d: usize, n_train: usize, n_test: usize, base_seed: u64) -> Self {
        let mut s = Settings::new();
        s.values.insert("seed".into(), base_seed.to_string());
        s.values.insert("d".into(), d.to_string());
        s.values.insert("n-train".into(), n_train.to_string());
        s.values.insert("n-test".into(), n_test.to_string());
        Self::from_settings(&s).expect("default synthetic configuration is valid")
    }

    pub fn from_settings(s: &Settings) -> Result<Self> {
        let methods = s
            .parsed("method", |v| parse_list(v, |m| m.trim().parse::<Method>()))?
            .unwrap_or_else(|| vec![Method::RpRidge, Method::RffRidge]);
        let epsilons = s
            .parsed("epsilon", |v| parse_list(v, parse_real))?
            .unwrap_or_else(|| [-1.0, -0.5, 0.0, 0.5, 1.0].map(|e| 10f64.powf(e)).to_vec());
        if epsilons.iter().any(|e| *e <= 0.0) {
            return Err(Error::config("epsilon values must be positive"));
        }
        let delta = s.parsed("delta", DeltaRule::parse)?.unwrap_or(DeltaRule::PowerOfN(1.1));
        let m_grid = s.parsed("M", parse_m_grid)?.unwrap_or_else(|| log_grid(10, 1000, 13));
        let lambda = s
            .parsed("lambda", LambdaRule::parse)?
            .unwrap_or(LambdaRule::PowersOfN { step: 0.1, last: 10 });
        let reps = s.parsed("reps", parse_count)?.unwrap_or(100);
        if reps == 0 {
            return Err(Error::config("reps must be at least 1"));
        }
        let base_seed = s
            .parsed("seed", parse_seed)?
            .ok_or_else(|| Error::config("a seed is required"))?;
        let jobs = s.parsed("jobs", parse_count)?.unwrap_or(1).max(1);

        let kernel_name = s.get("kernel").unwrap_or("gaussian").trim().to_string();
        let bandwidth = s.parsed("bandwidth", parse_real)?.unwrap_or(1.0);
        let kernel = KernelSpec::from_name(&kernel_name, bandwidth)?;

        let huber_h = s.parsed("huber-h", parse_real)?.unwrap_or(0.5);
        let loss = match s.get("loss").map(str::trim) {
            None | Some("squared") => LossSpec::squared(),
            Some(name) => LossSpec::from_name(name, huber_h)?,
        };
        let u_clip = s.parsed("u-clip", |v| v.trim().parse::<UClip>())?.unwrap_or_default();
        let standardize = s.parsed("standardize", parse_bool)?.unwrap_or(false);
        let timing = s.parsed("timing", parse_bool)?.unwrap_or(false);

        let data_key = s.get("data").unwrap_or("synthetic").trim();
        let data = if data_key == "synthetic" {
            DataSource::Synthetic {
                d: s.parsed("d", parse_count)?.unwrap_or(10),
                n_train: s.parsed("n-train", parse_count)?.unwrap_or(1000),
                n_test: s.parsed("n-test", parse_count)?.unwrap_or(1000),
                n_centers: s.parsed("n-centers", parse_count)?.unwrap_or(10),
                noise_sd: s.parsed("noise-sd", parse_real)?.unwrap_or(0.1),
                noise_trunc: s.parsed("noise-trunc", parse_real)?.unwrap_or(0.1),
                fixed_target: s.parsed("fixed-target", parse_bool)?.unwrap_or(false),
            }
        } else {
            DataSource::Csv {
                path: PathBuf::from(data_key),
                test_path: s.get("test-data").map(|p| PathBuf::from(p.trim())),
                options: CsvOptions {
                    response_col: s.parsed("response-col", parse_count)?.unwrap_or(0),
                    response_center: s.parsed("response-center", parse_real)?,
                    header: s.parsed("header", parse_bool)?,
                },
                subsample: s.parsed("subsample", parse_count)?,
                n_train: s.parsed("n-train", parse_count)?,
            }
        };
        let truncation = match (s.parsed("T", parse_real)?, &data) {
            (Some(t), _) => t,
            (
                None,
                DataSource::Synthetic {
                    n_centers, noise_trunc, ..
                },
            ) => *n_centers as f64 + noise_trunc,
            (None, DataSource::Csv { .. }) => {
                return Err(Error::config("T is required for CSV data"));
            }
        };

        let cfg = Self {
            methods,
            epsilons,
            delta,
            m_grid,
            lambda,
            reps,
            base_seed,
            jobs,
            data,
            standardize,
            kernel,
            truncation,
            loss,
            u_clip,
            timing,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() || self.epsilons.is_empty() || self.m_grid.is_empty() {
            return Err(Error::config("method, epsilon and M grids must be nonempty"));
        }
        if let LambdaRule::Fixed(v) = &self.lambda {
            if v.is_empty() {
                return Err(Error::config("lambda grid must be nonempty"));
            }
        }
        if self.reps == 0 {
            return Err(Error::config("reps must be at least 1"));
        }
        if !(self.truncation > 0.0 && self.truncation.is_finite()) {
            return Err(Error::config("T must be positive"));
        }
        if self.methods.iter().any(Method::is_objpert) && !self.loss.is_margin() {
            return Err(Error::config(
                "objective perturbation methods need loss = logistic or huber",
            ));
        }
        if self.u_clip == UClip::L2Norm && self.methods.contains(&Method::RffRidge) {
            return Err(Error::config("u-clip = l2norm is only defined for rp_ridge"));
        }
        Ok(())
    }

    /// The resolved configuration in the settings format; parsing it back
    /// gives an equal configuration.
    pub fn describe(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("method", join(&self.methods));
        kv("epsilon", join(&self.epsilons));
        kv("delta", self.delta.describe());
        kv("M", join(&self.m_grid));
        kv("lambda", self.lambda.describe());
        kv("reps", self.reps.to_string());
        kv("seed", self.base_seed.to_string());
        kv("jobs", self.jobs.to_string());
        kv("kernel", self.kernel.name().to_string());
        kv("bandwidth", self.kernel.parameter().to_string());
        kv("T", self.truncation.to_string());
        kv("loss", self.loss.name().to_string());
        if let crate::loss::LossFamily::Huber { h } = self.loss.family() {
            kv("huber-h", h.to_string());
        }
        kv("u-clip", self.u_clip.name().to_string());
        kv("standardize", self.standardize.to_string());
        kv("timing", self.timing.to_string());
        match &self.data {
            DataSource::Synthetic {
                d,
                n_train,
                n_test,
                n_centers,
                noise_sd,
                noise_trunc,
                fixed_target,
            } => {
                kv("data", "synthetic".into());
                kv("d", d.to_string());
                kv("n-train", n_train.to_string());
                kv("n-test", n_test.to_string());
                kv("n-centers", n_centers.to_string());
                kv("noise-sd", noise_sd.to_string());
                kv("noise-trunc", noise_trunc.to_string());
                kv("fixed-target", fixed_target.to_string());
            }
            DataSource::Csv {
                path,
                test_path,
                options,
                subsample,
                n_train,
            } => {
                kv("data", path.display().to_string());
                if let Some(p) = test_path {
                    kv("test-data", p.display().to_string());
                }
                if let Some(k) = subsample {
                    kv("subsample", k.to_string());
                }
                if let Some(k) = n_train {
                    kv("n-train", k.to_string());
                }
                kv("response-col", options.response_col.to_string());
                if let Some(c) = options.response_center {
                    kv("response-center", c.to_string());
                }
                if let Some(h) = options.header {
                    kv("header", h.to_string());
                }
            }
        }
        out
    }
}
