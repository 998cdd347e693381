//! Fidelity, diversity and jitter of a few perturbed copies of a motion.
//!
//! cargo run --example evaluate_metrics

use kinaug::metrics::evaluate;
use kinaug::motion::{gen_synthetic_motion, perturb_motion, MotionKind, Skeleton};

fn main() -> anyhow::Result<()> {
    let skel = Skeleton::smpl_default();
    let gt = gen_synthetic_motion(MotionKind::Mixed, 4.0, 7, &skel)?;
    for sigma in [0.0005, 0.002, 0.01] {
        let samples: Vec<_> = (0..4).map(|i| perturb_motion(&skel, &gt, sigma, i)).collect();
        let r = evaluate(&skel, &gt, &samples)?;
        let f = &r.fidelity;
        println!(
            "noise {sigma:.4} m: e_pos {:.3} cm, e_rot {:.3} deg, e_sip {:.3} deg, d_pos {:.3} cm, d_rot {:.3} deg, jitter {:.2} (gt {:.2})",
            f.e_pos,
            f.e_rot,
            f.e_sip,
            f.d_pos.unwrap(),
            f.d_rot.unwrap(),
            r.jitter_mean,
            r.jitter_gt
        );
    }
    Ok(())
}
