//! Track a reference motion with the per-frame QP and export the estimated
//! reaction forces and joint torques.
//!
//! cargo run --release --example physical_optimization -- [walk|squat|climb|...] [out_dir]

use kinaug::dynamics::RigidBodyModel;
use kinaug::metrics::jitter;
use kinaug::motion::{gen_synthetic_motion, save_motion, MotionKind, Skeleton};
use kinaug::physopt::{optimize_sequence, PdGains, PhysParams};

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let kind: MotionKind = std::env::args().nth(1).unwrap_or_else(|| "walk".into()).parse()?;
    let out = std::env::args().nth(2).unwrap_or_else(|| "target/physopt".into());
    std::fs::create_dir_all(&out)?;

    let skel = Skeleton::smpl_default();
    let reference = gen_synthetic_motion(kind, 3.0, 7, &skel)?;
    let model = RigidBodyModel::from_skeleton(&skel)?;
    let params = PhysParams::default();
    let start = std::time::Instant::now();
    let (motion, trace) = optimize_sequence(&model, &reference, &params, &PdGains::default())?;
    let s = trace.summary();
    println!(
        "{} frames in {:.1?}: {} optimal, {} fallback",
        s.frames,
        start.elapsed(),
        s.optimal,
        s.fallback
    );
    println!(
        "worst EOM residual {:.1e}, |pdot.lambda| {:.3} (bound {}), friction excess {:.1e}",
        s.eom_residual, s.support_power, params.delta, s.friction_excess
    );
    println!("jitter: reference {:.3}, optimized {:.3}", jitter(&skel, &reference)?, jitter(&skel, &motion)?);

    let weight = model.total_mass() * kinaug::dynamics::GRAVITY;
    let mid = trace.frames.len() / 2;
    println!("frame {mid}: vertical reaction {:.1} N (body weight {weight:.1} N)", trace.frames[mid].total_force(trace.up_axis));
    for (j, name) in [(10, "left foot"), (11, "right foot"), (7, "left ankle"), (8, "right ankle")] {
        let f = trace.force(mid, j).unwrap();
        println!("  {name:<11} {:>7.1} {:>7.1} {:>7.1}", f[0], f[1], f[2]);
    }

    save_motion(&motion, format!("{out}/{}.motion.json", kind.as_str()))?;
    trace.write_forces_csv(format!("{out}/{}.forces.csv", kind.as_str()))?;
    trace.write_torques_csv(format!("{out}/{}.torques.csv", kind.as_str()))?;
    Ok(())
}
