//! Train a small VAE on a walk, then generate variants guided by it and
//! report how far they stray from the ground truth.
//!
//! cargo run --release --example augment_motion

use kinaug::metrics::fidelity;
use kinaug::motion::{build_frames, frames_to_poses, gen_synthetic_motion, MotionKind, Skeleton};
use kinaug::vae::{augment_sequence, train, AugmentConfig, TrainConfig, VaeConfig, VaeModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> anyhow::Result<()> {
    let skel = Skeleton::smpl_default();
    let walk = gen_synthetic_motion(MotionKind::Walk, 5.0, 7, &skel)?;
    let frames = build_frames(&skel, &walk)?;

    let mut model = VaeModel::new(VaeConfig {
        hidden: 64,
        ..VaeConfig::default()
    })?;
    let cfg = TrainConfig {
        stages: [3, 6, 6],
        ..TrainConfig::desk()
    };
    let history = train(&mut model, &[frames.clone()], &cfg)?;
    println!("trained {} epochs, final reconstruction {:.4}", history.len(), history.last().unwrap().loss_reconst);

    for (label, aug) in [
        ("default", AugmentConfig::default()),
        ("best of 8", AugmentConfig { best_of: 8, ..AugmentConfig::default() }),
        ("mean latent", AugmentConfig { noise_scale: 0.0, ..AugmentConfig::default() }),
    ] {
        let samples = (0..4)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(i);
                let gen = augment_sequence(&model, &frames, &aug, &mut rng)?;
                Ok(frames_to_poses(&gen, &walk)?)
            })
            .collect::<anyhow::Result<Vec<_>>>()?;
        let f = fidelity(&skel, &walk, &samples)?;
        println!(
            "{label:<12} e_pos {:.2} cm, e_rot {:.2} deg, d_pos {:.2} cm, d_rot {:.2} deg",
            f.e_pos,
            f.e_rot,
            f.d_pos.unwrap_or(0.0),
            f.d_rot.unwrap_or(0.0)
        );
    }
    Ok(())
}
