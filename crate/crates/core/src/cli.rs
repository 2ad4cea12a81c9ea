//! The `dpkernel` command line.
//!
//! ```text
//! dpkernel gen-data  --d 10 --n-train 1000 --n-test 1000 --seed 7 --out data/
//! dpkernel fit       --data data/train.csv --method rp_ridge --epsilon inf --M 200 \
//!                    --lambda 0.01 --T 11 --seed 7 --model rp.model
//! dpkernel eval      --model rp.model --data data/test.csv
//! dpkernel predict   --model rp.model --data data/test.csv --out pred.csv
//! dpkernel sweep     --config configs/synthetic_d10.cfg --jobs 4 --out results.csv
//! dpkernel summarize --data results.csv --out summary.csv
//! ```
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
//! Data files put the response in column `--response-col` (default 0) and
//! the features in the remaining columns; `predict` expects the same layout
//! and ignores the response.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::data::{self, gen_synthetic, load_csv, CsvOptions, Dataset, Standardizer, SyntheticSpec};
use crate::erm::{
    fit_functional_pert, fit_objpert, fit_rff_ridge, fit_rp_ridge, load_model, save_model, FittedModel,
    FunctionalConfig, Method, ObjpertConfig, RidgeConfig, Seeds, UClip,
};
use crate::error::{Error, ErrorCategory, Result};
use crate::experiment::config::{parse_real, Settings};
use crate::experiment::{self, GroupBy, SweepConfig};
use crate::kernel::KernelSpec;
use crate::loss::LossSpec;
use crate::privacy::{FeatureKind, PrivacyBudget};

#[derive(Debug, Parser)]
#[command(name = "dpkernel", version, about = "Differentially private kernel learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[allow(clippy::large_enum_variant)]
#[derive(Debug, Subcommand)]
enum Command {
    /// Write synthetic train.csv and test.csv.
    GenData(GenDataArgs),
    /// Fit a private model and write it to --model.
    Fit(FitArgs),
    /// Write predictions for the rows of --data.
    Predict(PredictArgs),
    /// Print the test MSE of a model on --data.
    Eval(EvalArgs),
    /// Run a hyperparameter sweep and write one record per fit.
    Sweep(SweepArgs),
    /// Aggregate sweep records.
    Summarize(SummarizeArgs),
}

#[derive(Debug, Args)]
struct GenDataArgs {
    #[arg(long, default_value_t = 10)]
    d: usize,
    #[arg(long, default_value_t = 1000)]
    n_train: usize,
    #[arg(long, default_value_t = 1000)]
    n_test: usize,
    #[arg(long)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CsvArgs {
    /// Zero-based response column.
    #[arg(long, default_value_t = 0)]
    response_col: usize,
    /// Force (true) or forbid (false) a header row; detected by default.
    #[arg(long)]
    header: Option<bool>,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    method: Method,
    #[arg(long, default_value = "gaussian")]
    kernel: String,
    /// Kernel bandwidth (for `linear`, the bound on the squared input norm).
    #[arg(long, default_value_t = 1.0)]
    bandwidth: f64,
    /// Privacy level; `inf` disables the noise.
    #[arg(long, value_parser = parse_real_arg)]
    epsilon: f64,
    /// Defaults to n^-1.1.
    #[arg(long, value_parser = parse_real_arg)]
    delta: Option<f64>,
    #[arg(long = "M")]
    m: Option<usize>,
    #[arg(long, value_parser = parse_real_arg)]
    lambda: f64,
    /// Response truncation level.
    #[arg(long = "T", value_parser = parse_real_arg)]
    t: Option<f64>,
    /// Defaults to `squared`, or `logistic` for objective perturbation.
    #[arg(long)]
    loss: Option<String>,
    #[arg(long, default_value_t = 0.5)]
    huber_h: f64,
    #[arg(long, default_value = "elementwise")]
    u_clip: UClip,
    #[arg(long)]
    seed: u64,
    /// Output model file.
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    csv: CsvArgs,
    /// Subtracted from every response before fitting.
    #[arg(long, value_parser = parse_real_arg)]
    response_center: Option<f64>,
    /// Standardize features with the statistics of --data.
    #[arg(long)]
    standardize: bool,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Defaults to standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    csv: CsvArgs,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    csv: CsvArgs,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Settings file; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Results CSV; the resolved configuration goes to <out>.meta.txt.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    jobs: Option<String>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    bandwidth: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    delta: Option<String>,
    #[arg(long = "M")]
    m: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long = "T")]
    t: Option<String>,
    #[arg(long)]
    loss: Option<String>,
    #[arg(long)]
    huber_h: Option<String>,
    #[arg(long)]
    u_clip: Option<String>,
    #[arg(long)]
    reps: Option<String>,
    /// `synthetic` or a CSV path.
    #[arg(long)]
    data: Option<String>,
    #[arg(long)]
    d: Option<String>,
    #[arg(long)]
    n_train: Option<String>,
    #[arg(long)]
    n_test: Option<String>,
    #[arg(long)]
    response_col: Option<String>,
    #[arg(long)]
    response_center: Option<String>,
    #[arg(long)]
    header: Option<String>,
    #[arg(long)]
    standardize: bool,
    /// Record wall-clock times (makes the output run-dependent).
    #[arg(long)]
    timing: bool,
}

#[derive(Debug, Args)]
struct SummarizeArgs {
    /// Results CSV written by `sweep`.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// `best`, or a comma-separated subset of method,epsilon,delta,M,lambda,rep.
    #[arg(long, default_value = "best")]
    group_by: GroupBy,
}

fn parse_real_arg(s: &str) -> std::result::Result<f64, String> {
    parse_real(s).map_err(|e| e.to_string())
}

fn csv_options(a: &CsvArgs, center: Option<f64>) -> CsvOptions {
    CsvOptions {
        response_col: a.response_col,
        response_center: center,
        header: a.header,
    }
}

fn gen_data(a: &GenDataArgs) -> Result<()> {
    let spec = SyntheticSpec::new(a.d, a.n_train, a.n_test, a.seed);
    log::info!(
        "gen-data: d={} n_train={} n_test={} n_centers={} noise_sd={} noise_trunc={} seed={}",
        spec.d,
        spec.n_train,
        spec.n_test,
        spec.n_centers,
        spec.noise_sd,
        spec.noise_trunc,
        spec.seed
    );
    let (train, test) = gen_synthetic(&spec)?;
    std::fs::create_dir_all(&a.out)?;
    train.write_csv(&a.out.join("train.csv"))?;
    test.write_csv(&a.out.join("test.csv"))?;
    Ok(())
}

fn fit(a: &FitArgs) -> Result<FittedModel> {
    let kernel = KernelSpec::from_name(&a.kernel, a.bandwidth)?;
    let loss = match a.loss.as_deref() {
        Some(name) => LossSpec::from_name(name, a.huber_h)?,
        None if a.method.is_objpert() => LossSpec::logistic(),
        None => LossSpec::squared(),
    };
    let mut ds: Dataset = load_csv(&a.data, &csv_options(&a.csv, a.response_center))?;
    if a.standardize {
        let st = Standardizer::fit(&ds.x)?;
        ds = ds.standardized(&st)?;
    }
    let n = ds.len();
    let delta = a.delta.unwrap_or_else(|| (n as f64).powf(-1.1));
    let budget = PrivacyBudget::new(a.epsilon, delta)?;
    let seeds = Seeds::from_base(a.seed);
    let need_m = || a.m.ok_or_else(|| Error::config(format!("{} needs --M", a.method)));
    let need_t = || a.t.ok_or_else(|| Error::config(format!("{} needs --T", a.method)));
    log::info!(
        "fit: method={} kernel={}({}) epsilon={} delta={} M={} lambda={} T={} loss={} u_clip={} \
         seed={} map_seed={} noise_seed={} n={} d={} standardize={} response_center={:?}",
        a.method,
        kernel.name(),
        kernel.parameter(),
        a.epsilon,
        delta,
        a.m.map_or("-".into(), |m| m.to_string()),
        a.lambda,
        a.t.map_or("-".into(), |t| t.to_string()),
        loss,
        a.u_clip.name(),
        a.seed,
        seeds.map,
        seeds.noise,
        n,
        ds.dim(),
        a.standardize,
        a.response_center
    );
    if a.method.is_ridge() && loss != LossSpec::squared() {
        return Err(Error::config(format!("{} uses the squared loss", a.method)));
    }
    let mut model = match a.method {
        Method::RpRidge | Method::RffRidge => {
            let cfg = RidgeConfig {
                m: need_m()?,
                lambda: a.lambda,
                truncation: need_t()?,
                budget,
                u_clip: a.u_clip,
            };
            if a.method == Method::RpRidge {
                fit_rp_ridge(&ds.x, &ds.y, kernel, &cfg, seeds, &[])?
            } else {
                fit_rff_ridge(&ds.x, &ds.y, kernel, &cfg, seeds)?
            }
        }
        Method::RpObjpert | Method::RffObjpert => {
            let cfg = ObjpertConfig {
                m: need_m()?,
                lambda: a.lambda,
                loss,
                budget,
            };
            let kind = if a.method == Method::RpObjpert {
                FeatureKind::Rp
            } else {
                FeatureKind::Rff
            };
            fit_objpert(&ds.x, &ds.y, kind, kernel, &cfg, seeds, &[])?
        }
        Method::FunctionalPert => {
            let cfg = FunctionalConfig {
                lambda: a.lambda,
                loss,
                truncation: if loss.is_margin() { None } else { Some(need_t()?) },
                budget,
            };
            fit_functional_pert(&ds.x, &ds.y, kernel, &cfg, seeds, &[])?
        }
    };
    model.standardizer = ds.standardizer.clone();
    model.response_shift = ds.response_shift;
    if model.lambda_effective != model.lambda {
        log::info!("penalty raised to the privacy floor {}", model.lambda_effective);
    }
    save_model(&model, &a.model)?;
    log::info!("wrote {}", a.model.display());
    Ok(model)
}

fn predictions(model_path: &Path, data_path: &Path, csv: &CsvArgs) -> Result<(Vec<f64>, Dataset)> {
    let model = load_model(model_path)?;
    let ds = load_csv(data_path, &csv_options(csv, None))?;
    log::info!(
        "model {}: method={} kernel={}({}) epsilon={} delta={} lambda={} map_seed={} noise_seed={}",
        model_path.display(),
        model.method,
        model.kernel.name(),
        model.kernel.parameter(),
        model.budget.epsilon(),
        model.budget.delta(),
        model.lambda,
        model.seeds.map,
        model.seeds.noise
    );
    let pred =
        ds.x.iter()
            .map(|x| model.predict_response(x))
            .collect::<Result<Vec<f64>>>()?;
    Ok((pred, ds))
}

fn predict(a: &PredictArgs) -> Result<()> {
    let (pred, _) = predictions(&a.model, &a.data, &a.csv)?;
    let sink: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout().lock()),
    };
    let mut w = BufWriter::new(sink);
    writeln!(w, "prediction")?;
    for p in pred {
        writeln!(w, "{p:.16e}")?;
    }
    w.flush()?;
    Ok(())
}

fn eval(a: &EvalArgs) -> Result<f64> {
    let (pred, ds) = predictions(&a.model, &a.data, &a.csv)?;
    let v = data::mse(&pred, &ds.y)?;
    println!("{v:.16e}");
    Ok(v)
}

fn sweep_settings(a: &SweepArgs) -> Result<Settings> {
    let mut s = match &a.config {
        Some(p) => Settings::from_file(p)?,
        None => Settings::new(),
    };
    let flags: [(&str, &Option<String>); 20] = [
        ("seed", &a.seed),
        ("jobs", &a.jobs),
        ("method", &a.method),
        ("kernel", &a.kernel),
        ("bandwidth", &a.bandwidth),
        ("epsilon", &a.epsilon),
        ("delta", &a.delta),
        ("M", &a.m),
        ("lambda", &a.lambda),
        ("T", &a.t),
        ("loss", &a.loss),
        ("huber-h", &a.huber_h),
        ("u-clip", &a.u_clip),
        ("reps", &a.reps),
        ("data", &a.data),
        ("d", &a.d),
        ("n-train", &a.n_train),
        ("n-test", &a.n_test),
        ("response-col", &a.response_col),
        ("response-center", &a.response_center),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            s.set(k, v.clone())?;
        }
    }
    if let Some(h) = &a.header {
        s.set("header", h.clone())?;
    }
    if a.standardize {
        s.set("standardize", "true")?;
    }
    if a.timing {
        s.set("timing", "true")?;
    }
    Ok(s)
}

fn sweep(a: &SweepArgs) -> Result<()> {
    let cfg = SweepConfig::from_settings(&sweep_settings(a)?)?;
    for line in cfg.describe().lines() {
        log::info!("sweep: {line}");
    }
    let records = experiment::run_sweep(&cfg)?;
    experiment::write_results(&a.out, &records)?;
    experiment::write_meta(&a.out, &cfg)?;
    let failed = records.iter().filter(|r| r.test_mse.is_none()).count();
    log::info!(
        "wrote {} records ({failed} failed) to {}",
        records.len(),
        a.out.display()
    );
    Ok(())
}

fn summarize(a: &SummarizeArgs) -> Result<()> {
    log::info!("summarize: data={} group_by={:?}", a.data.display(), a.group_by);
    let records = experiment::read_results(&a.data)?;
    let rows = experiment::summarize(&records, &a.group_by)?;
    experiment::write_summary(&a.out, &a.group_by, &rows)?;
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::GenData(a) => gen_data(a),
        Command::Fit(a) => fit(a).map(|_| ()),
        Command::Predict(a) => predict(a),
        Command::Eval(a) => eval(a).map(|_| ()),
        Command::Sweep(a) => sweep(a),
        Command::Summarize(a) => summarize(a),
    }
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Parses `args` (including the program name), runs the command and
/// returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            match e.category() {
                ErrorCategory::Usage => EXIT_USAGE,
                ErrorCategory::Data => EXIT_DATA,
                ErrorCategory::Numerical => EXIT_NUMERICAL,
            }
        }
    }
}
