//! Generate every synthetic motion kind and save them as motion files.
//!
//! cargo run --example synthetic_motion -- [out_dir]

use kinaug::metrics::jitter;
use kinaug::motion::{gen_synthetic_motion, save_motion, sequence_positions, MotionKind, Skeleton};

fn main() -> anyhow::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "target/synthetic".into());
    std::fs::create_dir_all(&out)?;
    let skel = Skeleton::smpl_default();
    let kinds = [
        MotionKind::Walk,
        MotionKind::Wave,
        MotionKind::Squat,
        MotionKind::Mixed,
        MotionKind::Stand,
        MotionKind::Climb,
    ];
    for kind in kinds {
        let seq = gen_synthetic_motion(kind, 4.0, 7, &skel)?;
        let pos = sequence_positions(&skel, &seq);
        let travel = (pos.last().unwrap()[0] - pos[0][0]).norm();
        let path = format!("{out}/{}.motion.json", kind.as_str());
        save_motion(&seq, &path)?;
        println!(
            "{:<6} {} frames, root travel {:.2} m, jitter {:.3} -> {path}",
            kind.as_str(),
            seq.len(),
            travel,
            jitter(&skel, &seq)?
        );
    }
    Ok(())
}
