use super::*;
use crate::motion::Pose;
use crate::rotmath::{euler_to_rot, geodesic_deg, Euler3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn smpl() -> RigidBodyModel {
    RigidBodyModel::from_skeleton(&Skeleton::smpl_default()).unwrap()
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, s: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-s..s))
}

fn random_q(rng: &mut ChaCha8Rng) -> DVector<f64> {
    let mut q = random_vec(rng, NDOF, 1.0);
    q[1] += 1.0;
    q
}

fn pendulum(gravity: f64) -> RigidBodyModel {
    RigidBodyModel::new(
        vec![Body {
            name: "link".into(),
            parent: None,
            offset: Vector3::zeros(),
            kind: JointKind::Revolute(Vector3::z()),
            mass: 1.0,
            com: Vector3::new(1.0, 0.0, 0.0),
            inertia: Matrix3::zeros(),
        }],
        Vector3::new(0.0, -gravity, 0.0),
        Vector3::y(),
    )
    .unwrap()
}

#[test]
fn dimensions() {
    let m = smpl();
    assert_eq!(m.ndof(), 75);
    assert_eq!(NFORCE, 69);
    let q = DVector::zeros(75);
    assert_eq!(m.joint_jacobians(&q).unwrap().shape(), (69, 75));
    assert!(matches!(
        m.mass_matrix(&DVector::zeros(10)),
        Err(DynError::Dim { expected: 75, got: 10 })
    ));
}

#[test]
fn joint_order_validation() {
    let skel = Skeleton::smpl_default();
    let mut order: Vec<usize> = (0..24).collect();
    order.swap(1, 2);
    let m = RigidBodyModel::with_order(&skel, order.clone()).unwrap();
    assert_eq!(m.bodies[1].name, skel.joints[2].name);
    order.swap(1, 4);
    assert!(matches!(
        RigidBodyModel::with_order(&skel, order),
        Err(DynError::Order(_))
    ));
    let mut bad: Vec<usize> = (0..24).collect();
    bad.swap(0, 1);
    assert!(RigidBodyModel::with_order(&skel, bad).is_err());
    assert!(RigidBodyModel::with_order(&skel, vec![0; 24]).is_err());
}

#[test]
fn permuted_order_gives_same_physics() {
    let skel = Skeleton::smpl_default();
    let a = RigidBodyModel::from_skeleton(&skel).unwrap();
    let mut order: Vec<usize> = (0..24).collect();
    order.swap(1, 2);
    let b = RigidBodyModel::with_order(&skel, order).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let pose = crate::motion::random_pose(&mut rng, 0.6);
    let (qa, _) = a.pose_to_q(&pose).unwrap();
    let (qb, _) = b.pose_to_q(&pose).unwrap();
    let ea = a.energy(&qa, &DVector::zeros(75)).unwrap();
    let eb = b.energy(&qb, &DVector::zeros(75)).unwrap();
    assert!((ea - eb).abs() < 1e-10);
    let pa = a.joint_positions(&qa);
    let pb = b.joint_positions(&qb);
    assert!((pa[1] - pb[2]).norm() < 1e-12);
    assert!((a.state_to_pose(&qa).unwrap().r_joints[0].0 - b.state_to_pose(&qb).unwrap().r_joints[0].0).norm() < 1e-12);
}

#[test]
fn rest_pose_state() {
    let m = smpl();
    let p = Vector3::new(0.2, 0.9, -1.0);
    let (q, flags) = m.pose_to_q(&Pose::rest(p)).unwrap();
    assert!(flags.is_empty());
    assert_eq!(q.fixed_rows::<3>(0).into_owned(), p);
    assert!(q.rows(3, 72).iter().all(|v| *v == 0.0));
}

#[test]
fn pose_state_round_trip() {
    let m = smpl();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let mut pose = Pose::rest(Vector3::new(0.0, 1.0, 0.0));
        for j in 0..24 {
            *pose.local_mut(j) = euler_to_rot(&Euler3([
                rng.random_range(-3.0..3.0),
                rng.random_range(-1.4..1.4),
                rng.random_range(-3.0..3.0),
            ]));
        }
        pose.enforce_leaves();
        let (q, flags) = m.pose_to_q(&pose).unwrap();
        assert!(flags.is_empty());
        let back = m.state_to_pose(&q).unwrap();
        for j in 0..24 {
            assert!(geodesic_deg(back.local(j), pose.local(j)) < 1e-9);
        }
    }
}

#[test]
fn finite_difference_velocity() {
    let m = smpl();
    let a = Pose::rest(Vector3::zeros());
    let mut b = a.clone();
    *b.local_mut(5) = euler_to_rot(&Euler3([0.01, 0.0, 0.0]));
    let (s, _) = m.pose_to_state(&b, &a, 60.0).unwrap();
    let i = m.euler_range(5).start;
    assert!((s.qd[i] - 0.6).abs() < 1e-12);
    assert_eq!(s.qd.iter().filter(|v| v.abs() > 1e-12).count(), 1);
    // wrapping across +-pi
    let mut c = a.clone();
    *c.local_mut(5) = euler_to_rot(&Euler3([3.13, 0.0, 0.0]));
    let mut d = a.clone();
    *d.local_mut(5) = euler_to_rot(&Euler3([-3.13, 0.0, 0.0]));
    let (s, _) = m.pose_to_state(&d, &c, 60.0).unwrap();
    assert!((s.qd[i] - (2.0 * std::f64::consts::PI - 6.26) * 60.0).abs() < 1e-9);
}

#[test]
fn mass_matrix_structure() {
    let m = smpl();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        let q = random_q(&mut rng);
        let mm = m.mass_matrix(&q).unwrap();
        assert!((&mm - mm.transpose()).abs().max() < 1e-10);
        let tl = mm.fixed_view::<3, 3>(0, 0).into_owned();
        assert!((tl - Matrix3::identity() * m.total_mass()).abs().max() < 1e-10);
        let eig = mm.symmetric_eigenvalues();
        assert!(eig.min() > 0.0, "{}", eig.min());
    }
}

#[test]
fn mass_matrix_matches_kinetic_energy_oracle() {
    // 1/2 qd^T M qd = sum over bodies of 1/2 m |v_c|^2 + 1/2 w^T I w,
    // with body velocities from finite differences of the kinematics.
    let m = smpl();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let q = random_q(&mut rng);
    let qd = random_vec(&mut rng, 75, 1.0);
    let h = 1e-6;
    let ka = m.kinematics(&(&q + &qd * h));
    let kb = m.kinematics(&(&q - &qd * h));
    let k0 = m.kinematics(&q);
    let mut ke = 0.0;
    for (b, body) in m.bodies.iter().enumerate() {
        let ca = ka.positions[b] + ka.rotations[b] * body.com;
        let cb = kb.positions[b] + kb.rotations[b] * body.com;
        let vc = (ca - cb) / (2.0 * h);
        let rdot = (ka.rotations[b] - kb.rotations[b]) / (2.0 * h);
        let w = crate::rotmath::vee(&(rdot * k0.rotations[b].transpose()));
        let iw = k0.rotations[b] * body.inertia * k0.rotations[b].transpose();
        ke += 0.5 * body.mass * vc.norm_squared() + 0.5 * w.dot(&(iw * w));
    }
    let mm = m.mass_matrix(&q).unwrap();
    let want = 0.5 * qd.dot(&(&mm * &qd));
    assert!((ke - want).abs() < 1e-6 * want.max(1.0), "{ke} vs {want}");
}

#[test]
fn pendulum_closed_forms() {
    let p = pendulum(9.81);
    let q = DVector::zeros(1);
    assert!((p.mass_matrix(&q).unwrap()[(0, 0)] - 1.0).abs() < 1e-15);
    let h = p.nonlinear_effects(&q, &DVector::zeros(1)).unwrap();
    assert!((h[0] - 9.81).abs() < 1e-12);
    let id = p
        .inverse_dynamics(&q, &DVector::zeros(1), &DVector::from_element(1, 2.5))
        .unwrap();
    assert!((id[0] - (2.5 + 9.81)).abs() < 1e-12);
    // hanging straight down: no gravity torque
    let down = DVector::from_element(1, -std::f64::consts::FRAC_PI_2);
    assert!(p.nonlinear_effects(&down, &DVector::zeros(1)).unwrap()[0].abs() < 1e-12);
}

#[test]
fn zero_gravity_rest_has_no_bias() {
    let mut m = smpl();
    m.gravity = Vector3::zeros();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let h = m
        .nonlinear_effects(&random_q(&mut rng), &DVector::zeros(75))
        .unwrap();
    assert!(h.amax() < 1e-12);
}

#[test]
fn free_fall_accelerates_with_gravity() {
    let m = smpl();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let q = random_q(&mut rng);
    let mm = m.mass_matrix(&q).unwrap();
    let h = m.nonlinear_effects(&q, &DVector::zeros(75)).unwrap();
    // translational bias equals the total weight
    let ht = h.fixed_rows::<3>(0).into_owned();
    assert!((ht + m.gravity * m.total_mass()).norm() < 1e-9);
    let qdd = mm.cholesky().unwrap().solve(&(-h));
    assert!((qdd.fixed_rows::<3>(0).into_owned() - m.gravity).norm() < 1e-9);
    assert!(qdd.rows(3, 72).amax() < 1e-9);
}

#[test]
fn inverse_dynamics_identity() {
    let m = smpl();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..100 {
        let q = random_q(&mut rng);
        let qd = random_vec(&mut rng, 75, 2.0);
        let qdd = random_vec(&mut rng, 75, 5.0);
        let id = m.inverse_dynamics(&q, &qd, &qdd).unwrap();
        let h = m.nonlinear_effects(&q, &qd).unwrap();
        let want = m.mass_matrix(&q).unwrap() * &qdd + &h;
        assert!((id - want).amax() < 1e-8);
        let id0 = m.inverse_dynamics(&q, &qd, &DVector::zeros(75)).unwrap();
        assert_eq!(id0, h);
    }
}

#[test]
fn jacobian_structure_and_finite_differences() {
    let m = smpl();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let q = random_q(&mut rng);
        let jac = m.joint_jacobians(&q).unwrap();
        for b in 0..23 {
            let blk = jac.fixed_view::<3, 3>(3 * b, 0).into_owned();
            assert!((blk - Matrix3::identity()).abs().max() < 1e-15);
        }
        let d = random_vec(&mut rng, 75, 1.0);
        let h = 1e-6;
        let pa = m.joint_positions(&(&q + &d * h));
        let pb = m.joint_positions(&(&q - &d * h));
        let jd = &jac * &d;
        for b in 1..24 {
            let fd = (pa[b] - pb[b]) / (2.0 * h);
            let an = jd.fixed_rows::<3>(3 * (b - 1)).into_owned();
            assert!((fd - an).norm() <= 1e-5 * an.norm().max(1.0));
        }
    }
}

#[test]
fn jacobian_limb_independence() {
    let m = smpl();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let jac = m.joint_jacobians(&random_q(&mut rng)).unwrap();
    // left hand (22) does not depend on the right hip (2) or right knee (5)
    for body in [2usize, 5] {
        for c in m.euler_range(body) {
            assert!(jac.fixed_view::<3, 1>(3 * 21, c).norm() == 0.0);
        }
    }
}

#[test]
fn jdot_qdot_checks() {
    let m = smpl();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let q = random_q(&mut rng);
    assert!(m.jdot_qdot(&q, &DVector::zeros(75)).unwrap().amax() == 0.0);
    for _ in 0..20 {
        let q = random_q(&mut rng);
        let qd = random_vec(&mut rng, 75, 1.5);
        let h = 1e-6;
        let ja = m.joint_jacobians(&(&q + &qd * h)).unwrap();
        let jb = m.joint_jacobians(&(&q - &qd * h)).unwrap();
        let fd = (ja - jb) / (2.0 * h) * &qd;
        let an = m.jdot_qdot(&q, &qd).unwrap();
        assert!((&fd - &an).amax() <= 1e-5 * an.amax().max(1.0));
    }
}

#[test]
fn spinning_link_centripetal() {
    let link = |parent: Option<usize>, offset: Vector3<f64>| Body {
        name: "l".into(),
        parent,
        offset,
        kind: JointKind::Revolute(Vector3::z()),
        mass: 1.0,
        com: Vector3::zeros(),
        inertia: Matrix3::identity() * 0.01,
    };
    let m = RigidBodyModel::new(
        vec![link(None, Vector3::zeros()), link(Some(0), Vector3::new(1.5, 0.0, 0.0))],
        Vector3::zeros(),
        Vector3::y(),
    )
    .unwrap();
    let w = 2.0;
    let q = DVector::from_vec(vec![0.3, 0.0]);
    let qd = DVector::from_vec(vec![w, 0.0]);
    let acc = m.jdot_qdot(&q, &qd).unwrap();
    let p = m.joint_positions(&q)[1];
    let a = Vector3::new(acc[0], acc[1], acc[2]);
    assert!((a.norm() - w * w * 1.5).abs() < 1e-12);
    assert!((a.normalize() + p.normalize()).norm() < 1e-12);
}

#[test]
fn free_fall_energy_is_conserved() {
    let m = smpl();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut q = random_vec(&mut rng, 75, 0.4);
    q[1] = 1.0;
    let mut qd = random_vec(&mut rng, 75, 0.5);
    let e0 = m.energy(&q, &qd).unwrap();
    let dt = 1.0 / 600.0;
    for _ in 0..300 {
        let mm = m.mass_matrix(&q).unwrap();
        let h = m.nonlinear_effects(&q, &qd).unwrap();
        let qdd = mm.cholesky().unwrap().solve(&(-h));
        qd += qdd * dt;
        q += &qd * dt;
    }
    let e1 = m.energy(&q, &qd).unwrap();
    assert!(((e1 - e0) / e0).abs() < 0.01, "{e0} -> {e1}");
}
