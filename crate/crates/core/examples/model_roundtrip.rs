//! Saving a fitted model and loading it back.

use dpkernel::data::{gen_synthetic, SyntheticSpec};
use dpkernel::erm::{fit_rff_ridge, load_model, save_model, RidgeConfig, Seeds, UClip};
use dpkernel::kernel::KernelSpec;
use dpkernel::privacy::PrivacyBudget;

fn main() -> dpkernel::Result<()> {
    let (train, test) = gen_synthetic(&SyntheticSpec::new(4, 300, 5, 17))?;
    let cfg = RidgeConfig {
        m: 64,
        lambda: 1e-2,
        truncation: 10.1,
        budget: PrivacyBudget::new(2.0, 1e-3)?,
        u_clip: UClip::Elementwise,
    };
    let model = fit_rff_ridge(
        &train.x,
        &train.y,
        KernelSpec::gaussian(1.0)?,
        &cfg,
        Seeds::from_base(3),
    )?;

    let path = std::env::temp_dir().join("dpkernel_roundtrip.model");
    save_model(&model, &path)?;
    let back = load_model(&path)?;
    println!(
        "{} bytes written to {}",
        std::fs::metadata(&path)?.len(),
        path.display()
    );
    for x in &test.x {
        let (a, b) = (model.predict(x)?, back.predict(x)?);
        println!("{a:+.12} {b:+.12} identical: {}", a.to_bits() == b.to_bits());
    }

    // A flipped byte is caught by the checksum.
    let mut bytes = std::fs::read(&path)?;
    let mid = bytes.len() / 2;
    bytes[mid] ^= 1;
    std::fs::write(&path, bytes)?;
    println!("corrupted file: {}", load_model(&path).unwrap_err());
    std::fs::remove_file(&path)?;
    Ok(())
}
