//! Mass matrix, bias forces and inverse dynamics of the articulated body,
//! plus a short free fall to watch energy conservation.
//!
//! cargo run --release --example rigid_body_dynamics

use kinaug::dynamics::{DynState, RigidBodyModel};
use kinaug::motion::{Pose, Skeleton};
use nalgebra::{DVector, Vector3};

fn main() -> anyhow::Result<()> {
    let skel = Skeleton::smpl_default();
    let model = RigidBodyModel::from_skeleton(&skel)?;
    println!("{} dofs, total mass {:.1} kg", model.ndof(), model.total_mass());

    let (q, _) = model.pose_to_q(&Pose::rest(Vector3::new(0.0, 1.0, 0.0)))?;
    let qd = DVector::from_fn(model.ndof(), |i, _| 0.1 * ((i as f64) * 0.7).sin());
    let m = model.mass_matrix(&q)?;
    let h = model.nonlinear_effects(&q, &qd)?;
    let eig = m.clone().symmetric_eigen().eigenvalues;
    println!("mass matrix eigenvalues in [{:.2e}, {:.2e}]", eig.min(), eig.max());
    println!("bias force on the root (vertical): {:.1} N", h[1]);

    let qdd = DVector::from_fn(model.ndof(), |i, _| ((i as f64) * 1.3).cos());
    let id = model.inverse_dynamics(&q, &qd, &qdd)?;
    println!("|ID - (M qdd + h)| = {:.2e}", (id - (&m * &qdd + &h)).amax());

    let jac = model.joint_jacobians(&q)?;
    println!("joint Jacobian {}x{}", jac.nrows(), jac.ncols());

    // unforced motion: qdd = -M^-1 h
    let mut s = DynState { q, qd };
    let dt = 1.0 / 600.0;
    let e0 = model.energy(&s.q, &s.qd)?;
    for _ in 0..300 {
        let m = model.mass_matrix(&s.q)?;
        let h = model.nonlinear_effects(&s.q, &s.qd)?;
        let qdd = m.cholesky().expect("positive definite").solve(&(-h));
        s.qd += qdd * dt;
        s.q += &s.qd * dt;
        model.wrap_angles(&mut s.q);
    }
    let e1 = model.energy(&s.q, &s.qd)?;
    println!("free fall 0.5 s: energy {e0:.2} J -> {e1:.2} J ({:.3}%)", 100.0 * (e1 - e0) / e0.abs());
    Ok(())
}
