//! CSV in, standardized private fit, predictions out.

use dpkernel::data::{gen_synthetic, load_csv, mse, CsvOptions, Standardizer, SyntheticSpec};
use dpkernel::erm::{fit_rp_ridge, RidgeConfig, Seeds, UClip};
use dpkernel::kernel::KernelSpec;
use dpkernel::privacy::PrivacyBudget;

fn main() -> dpkernel::Result<()> {
    let dir = std::env::temp_dir().join("dpkernel_csv_pipeline");
    std::fs::create_dir_all(&dir)?;
    let (train, test) = gen_synthetic(&SyntheticSpec::new(6, 500, 200, 4))?;
    train.write_csv(&dir.join("train.csv"))?;
    test.write_csv(&dir.join("test.csv"))?;

    let opts = CsvOptions::default();
    let train = load_csv(&dir.join("train.csv"), &opts)?;
    let test = load_csv(&dir.join("test.csv"), &opts)?;
    let st = Standardizer::fit(&train.x)?;
    let (train, test) = (train.standardized(&st)?, test.standardized(&st)?);

    let cfg = RidgeConfig {
        m: 50,
        lambda: 1e-1,
        truncation: 10.1,
        budget: PrivacyBudget::new(10.0, 1e-3)?,
        u_clip: UClip::Elementwise,
    };
    let kernel = KernelSpec::gaussian(3.0)?;
    let model = fit_rp_ridge(&train.x, &train.y, kernel, &cfg, Seeds::from_base(9), &test.x)?;
    let pred = model.predict_many(&test.x)?;
    println!("{} kept columns, test mse {:.4}", st.output_dim(), mse(&pred, &test.y)?);

    let out = dir.join("predictions.csv");
    let mut text = String::from("prediction\n");
    for p in pred {
        text += &format!("{p:.16e}\n");
    }
    std::fs::write(&out, text)?;
    println!("wrote {}", out.display());
    Ok(())
}
