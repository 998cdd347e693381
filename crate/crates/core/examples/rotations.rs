//! Convert one rotation between matrix, 6D and Euler forms and show what
//! happens at the singular Euler chart.
//!
//! cargo run --example rotations

use kinaug::rotmath::{euler_to_rot, geodesic_deg, rot_to_euler, rot_to_sixd, sixd_to_rot, Euler3, Rot3, SixD};
use nalgebra::Vector3;

fn main() -> anyhow::Result<()> {
    let r = Rot3::from_axis_angle(&Vector3::new(1.0, 2.0, -0.5), 0.8);
    let six = rot_to_sixd(&r);
    println!("6D: {:?}", six.0);

    let back = sixd_to_rot(&six)?;
    println!("6D round trip error: {:.2e} deg", geodesic_deg(&r, &back));

    // a network output is rarely orthonormal; projection fixes that
    let mut noisy = six.0;
    noisy[0] += 0.05;
    noisy[4] -= 0.03;
    let fixed = sixd_to_rot(&SixD(noisy))?;
    println!(
        "projected noisy 6D: orthonormality error {:.2e}, {:.3} deg from the original",
        fixed.orthonormality_error(),
        geodesic_deg(&r, &fixed)
    );

    let e = rot_to_euler(&r);
    println!("Euler XYZ: {:?} (gimbal lock: {})", e.angles.0, e.gimbal_lock);
    println!("Euler round trip error: {:.2e} deg", geodesic_deg(&r, &euler_to_rot(&e.angles)));

    let locked = euler_to_rot(&Euler3([0.3, std::f64::consts::FRAC_PI_2, 0.4]));
    let d = rot_to_euler(&locked);
    println!(
        "at b = pi/2: {:?}, gimbal lock {}, still the same rotation: {:.2e} deg",
        d.angles.0,
        d.gimbal_lock,
        geodesic_deg(&locked, &euler_to_rot(&d.angles))
    );
    Ok(())
}
