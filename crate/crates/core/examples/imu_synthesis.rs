//! Synthesize virtual IMU readings from a synthetic walk.
//!
//! cargo run --example imu_synthesis -- [out.imu.json]

use kinaug::imusynth::{synthesize, ImuConfig, ImuSequence};
use kinaug::motion::{gen_synthetic_motion, MotionKind, Skeleton};

fn main() -> anyhow::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "target/walk.imu.json".into());
    let skel = Skeleton::smpl_default();
    let walk = gen_synthetic_motion(MotionKind::Walk, 3.0, 7, &skel)?;

    for with_gravity in [false, true] {
        let imu = synthesize(&skel, &walk, &ImuConfig { with_gravity, ..ImuConfig::default() })?;
        println!("with gravity: {with_gravity}");
        for (i, site) in imu.sites.iter().enumerate() {
            let n = imu.frames.len() as f64;
            let mean = imu.frames.iter().map(|f| f.acc[i]).sum::<nalgebra::Vector3<f64>>() / n;
            let peak = imu.frames.iter().map(|f| f.acc[i].norm()).fold(0.0, f64::max);
            println!("  {site:<15} mean acc [{:>6.2} {:>6.2} {:>6.2}]  peak |acc| {peak:.2} m/s^2", mean.x, mean.y, mean.z);
        }
        if !with_gravity {
            imu.save(&out)?;
        }
    }
    let back = ImuSequence::load(&out)?;
    println!("saved {} frames at {} fps to {out}", back.frames.len(), back.fps);
    Ok(())
}
