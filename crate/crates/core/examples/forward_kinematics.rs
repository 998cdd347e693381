//! Pose the built-in SMPL skeleton and print global joint positions.
//!
//! cargo run --example forward_kinematics -- [skeleton.json]

use kinaug::motion::{forward_kinematics, load_skeleton, Pose, Skeleton};
use kinaug::rotmath::Rot3;
use nalgebra::Vector3;

fn main() -> anyhow::Result<()> {
    let skel = match std::env::args().nth(1) {
        Some(p) => load_skeleton(p)?,
        None => Skeleton::smpl_default(),
    };
    println!("{}: {} joints, {:.1} kg", skel.name, skel.len(), skel.total_mass());

    let mut pose = Pose::rest(Vector3::new(0.0, 0.95, 0.0));
    *pose.local_mut(1) = Rot3::rot_x(-0.6); // left hip forward
    *pose.local_mut(4) = Rot3::rot_x(0.9); // left knee bent
    *pose.local_mut(17) = Rot3::rot_z(1.2); // right shoulder raised

    let g = forward_kinematics(&skel, &pose);
    for (j, p) in g.positions.iter().enumerate() {
        println!("{:>2} {:<15} {:>7.3} {:>7.3} {:>7.3}", j, skel.joints[j].name, p.x, p.y, p.z);
    }
    Ok(())
}
