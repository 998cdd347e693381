//! Train the motion VAE on a synthetic walk with the desk schedule and
//! report the reconstruction error before and after.
//!
//! cargo run --release --example train_vae -- [out_dir]

use std::time::Instant;

use kinaug::motion::{build_frames, gen_synthetic_motion, MotionKind, Skeleton};
use kinaug::vae::{reconstruction_mse, train, write_history, TrainConfig, VaeConfig, VaeModel};

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let out = std::env::args().nth(1).unwrap_or_else(|| "target/train_vae".into());
    std::fs::create_dir_all(&out)?;

    let skel = Skeleton::smpl_default();
    let walk = gen_synthetic_motion(MotionKind::Walk, 10.0, 7, &skel)?;
    let dataset = vec![build_frames(&skel, &walk)?];

    let mut model = VaeModel::new(VaeConfig::default())?;
    println!("parameters: {}", model.param_count());
    let cfg = TrainConfig::desk();

    let start = Instant::now();
    let mut probe = model.clone();
    probe.normalizer = kinaug::vae::Normalizer::fit(dataset.iter().flatten());
    let before = reconstruction_mse(&probe, &dataset)?;
    let history = train(&mut model, &dataset, &cfg)?;
    let after = reconstruction_mse(&model, &dataset)?;
    println!(
        "reconstruction mse {before:.4} -> {after:.4} ({:.1}%) in {:.1?}",
        100.0 * after / before,
        start.elapsed()
    );

    model.save(format!("{out}/walk.vae.json"))?;
    write_history(format!("{out}/history.csv"), &history)?;
    Ok(())
}
