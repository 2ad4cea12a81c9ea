//! A small grid sweep over (method, epsilon, M, lambda) with a best-case summary.
//!
//! Pass a config file path to override the built-in settings.

use dpkernel::experiment::{self, GroupBy, Settings, SweepConfig};

const SETTINGS: &str = "
method = rp_ridge, rff_ridge
epsilon = 10^-0.5, 1, 10^0.5, 10
M = 25, 50, 100
lambda = n^-0.2i:5
reps = 5
seed = 20240611
d = 10
n-train = 300
n-test = 300
";

fn main() -> dpkernel::Result<()> {
    let settings = match std::env::args().nth(1) {
        Some(path) => Settings::from_file(path.as_ref())?,
        None => Settings::parse(SETTINGS)?,
    };
    let cfg = SweepConfig::from_settings(&settings)?;
    let records = experiment::run_sweep(&cfg)?;
    println!("{} records", records.len());
    for row in experiment::summarize(&records, &GroupBy::Best)? {
        println!(
            "{:<10} eps {:<24} mean {:.4} sd {:.4} ({} reps)",
            row.key[0], row.key[1], row.mean, row.sd, row.count
        );
    }
    Ok(())
}
