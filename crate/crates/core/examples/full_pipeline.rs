//! The whole command-line pipeline in one process: synthetic data, VAE
//! training, augmentation with physical optimization, IMU synthesis and
//! evaluation.
//!
//! cargo run --release --example full_pipeline -- [work_dir]

fn kinaug(args: &[&str]) -> anyhow::Result<()> {
    let mut argv = vec!["kinaug"];
    argv.extend_from_slice(args);
    match kinaug::cli::run(argv) {
        0 => Ok(()),
        code => anyhow::bail!("{} exited with {code}", args[0]),
    }
}

fn main() -> anyhow::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "target/pipeline".into());
    std::fs::create_dir_all(&dir)?;
    std::env::set_current_dir(&dir)?;
    std::fs::write(
        "pipeline.json",
        r#"{
  "seed": 11,
  "vae": {"hidden": 64},
  "train": {"stages": [2, 4, 4], "warmup_epochs": 2, "batch_size": 64},
  "samples": 4,
  "output_dir": "augmented"
}
"#,
    )?;

    kinaug(&["gen-synthetic", "--kind", "walk", "--seconds", "4", "--seed", "7", "-o", "walk.motion.json"])?;
    kinaug(&["train-vae", "--config", "pipeline.json", "--input", "walk.motion.json", "-o", "walk.vae.json"])?;
    kinaug(&["augment", "--config", "pipeline.json", "--model", "walk.vae.json", "--input", "walk.motion.json", "--physopt", "--jobs", "2"])?;
    kinaug(&["synth-imu", "--config", "pipeline.json", "--input", "augmented/sample_000.motion.json", "-o", "sample_000.imu.json"])?;
    kinaug(&["eval", "--config", "pipeline.json", "--gt", "walk.motion.json", "--aug", "augmented", "-o", "report.json", "--csv", "report.csv"])?;

    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string("report.json")?)?;
    println!(
        "e_pos {} cm, d_pos {} cm, jitter {} (gt {})",
        report["fidelity"]["e_pos"], report["fidelity"]["d_pos"], report["jitter_mean"], report["jitter_gt"]
    );
    println!("outputs in {dir}");
    Ok(())
}
