use nalgebra::{DVector, Vector3};

use super::{DynError, JointKind, RigidBodyModel};
use crate::motion::{Pose, NUM_JOINTS};
use crate::rotmath::{euler_to_rot, rot_to_euler, wrap_angle, Euler3};

/// Generalized position and velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct DynState {
    pub q: DVector<f64>,
    pub qd: DVector<f64>,
}

/// Bodies whose Euler decomposition hit the singular chart.
pub type GimbalFlags = Vec<usize>;

impl RigidBodyModel {
    fn require_skeleton_model(&self) -> Result<(), DynError> {
        let ok = self.bodies.len() == NUM_JOINTS
            && matches!(self.bodies[0].kind, JointKind::Floating)
            && self.bodies[1..]
                .iter()
                .all(|b| matches!(b.kind, JointKind::Spherical));
        if ok {
            Ok(())
        } else {
            Err(DynError::Model("pose conversion needs the 24-joint floating-base model".into()))
        }
    }

    /// Generalized coordinates of a pose.
    pub fn pose_to_q(&self, pose: &Pose) -> Result<(DVector<f64>, GimbalFlags), DynError> {
        self.require_skeleton_model()?;
        let mut q = DVector::zeros(self.ndof());
        let mut flags = Vec::new();
        q.fixed_rows_mut::<3>(0).copy_from(&pose.p_root);
        for (k, &j) in self.order.iter().enumerate() {
            let s = if k == 0 { 3 } else { self.dof_start(k) };
            let d = rot_to_euler(pose.local(j));
            if d.gimbal_lock {
                flags.push(k);
            }
            q.fixed_rows_mut::<3>(s).copy_from(&d.angles.as_vector());
        }
        Ok((q, flags))
    }

    /// State at `pose_t` with velocities from the backward difference to
    /// `pose_prev` (angles differenced with wrapping).
    pub fn pose_to_state(
        &self,
        pose_t: &Pose,
        pose_prev: &Pose,
        fps: f64,
    ) -> Result<(DynState, GimbalFlags), DynError> {
        let (q, flags) = self.pose_to_q(pose_t)?;
        let (qp, _) = self.pose_to_q(pose_prev)?;
        let mut qd = DVector::zeros(q.len());
        for i in 0..q.len() {
            let d = q[i] - qp[i];
            qd[i] = if i < 3 { d } else { wrap_angle(d) } * fps;
        }
        Ok((DynState { q, qd }, flags))
    }

    /// Pose of a configuration; leaf joints are reset to identity.
    pub fn state_to_pose(&self, q: &DVector<f64>) -> Result<Pose, DynError> {
        self.require_skeleton_model()?;
        if q.len() != self.ndof() {
            return Err(DynError::Dim {
                expected: self.ndof(),
                got: q.len(),
            });
        }
        let mut pose = Pose::rest(Vector3::new(q[0], q[1], q[2]));
        for (k, &j) in self.order.iter().enumerate() {
            let s = if k == 0 { 3 } else { self.dof_start(k) };
            *pose.local_mut(j) = euler_to_rot(&Euler3([q[s], q[s + 1], q[s + 2]]));
        }
        pose.enforce_leaves();
        Ok(pose)
    }

    /// Euler block of body `k` in `q`.
    pub fn euler_range(&self, k: usize) -> std::ops::Range<usize> {
        let s = if k == 0 { 3 } else { self.dof_start(k) };
        s..s + 3
    }

    /// Wrap every angular coordinate into `(-pi, pi]`.
    pub fn wrap_angles(&self, q: &mut DVector<f64>) {
        for v in q.iter_mut().skip(3) {
            *v = wrap_angle(*v);
        }
    }
}
