//! Skeleton, pose sequences, the 240-dim motion frame and forward kinematics.

mod frame;
mod io;
mod skeleton;
mod synth;

pub use frame::{build_frames, frames_to_poses, MotionFrame, FRAME_DIM};
pub use io::{load_motion, load_skeleton, save_motion, save_skeleton};
pub use skeleton::{
    Joint, Skeleton, DEFAULT_SKELETON_NAME, FRAME_JOINTS, LEAF_JOINTS, NUM_JOINTS, SMPL_NAMES,
    SMPL_PARENTS,
};
pub use synth::{gen_synthetic_motion, perturb_motion, MotionKind};

use nalgebra::Vector3;
use thiserror::Error;

use crate::rotmath::{RotError, Rot3};

#[derive(Debug, Error)]
pub enum MotionError {
    #[error("invalid skeleton: {0}")]
    Invalid(String),
    #[error("invalid pose: {0}")]
    InvalidPose(String),
    #[error("sequence too short: need at least {need} frames, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("length mismatch: {0} frames vs {1} poses")]
    LengthMismatch(usize, usize),
    #[error("frame has {0} values, expected 240")]
    FrameDim(usize),
    #[error("{path}: {msg}")]
    Parse { path: String, msg: String },
    #[error("unknown motion kind '{0}' (expected walk, wave, squat, mixed, stand or climb)")]
    UnknownKind(String),
    #[error("rotation: {0}")]
    Rotation(#[from] RotError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// One skeleton pose: global root placement and local joint rotations.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    pub p_root: Vector3<f64>,
    pub r_root: Rot3,
    /// Local rotation of joints 1..24 in their parent frames; entry `j - 1`
    /// belongs to joint `j`.
    pub r_joints: [Rot3; NUM_JOINTS - 1],
}

impl Pose {
    pub fn rest(p_root: Vector3<f64>) -> Self {
        Pose {
            p_root,
            r_root: Rot3::identity(),
            r_joints: [Rot3::identity(); NUM_JOINTS - 1],
        }
    }

    /// Local rotation of joint `j` (the root's global rotation for `j == 0`).
    pub fn local(&self, j: usize) -> &Rot3 {
        if j == 0 {
            &self.r_root
        } else {
            &self.r_joints[j - 1]
        }
    }

    pub fn local_mut(&mut self, j: usize) -> &mut Rot3 {
        if j == 0 {
            &mut self.r_root
        } else {
            &mut self.r_joints[j - 1]
        }
    }

    pub fn enforce_leaves(&mut self) {
        for j in LEAF_JOINTS {
            self.r_joints[j - 1] = Rot3::identity();
        }
    }

    pub fn validate(&self, tol: f64) -> Result<(), MotionError> {
        if self.p_root.iter().any(|v| !v.is_finite()) {
            return Err(MotionError::InvalidPose("non-finite root position".into()));
        }
        for j in 0..NUM_JOINTS {
            if !self.local(j).is_valid(tol) {
                return Err(MotionError::InvalidPose(format!(
                    "rotation of joint {j} is not orthonormal"
                )));
            }
        }
        for j in LEAF_JOINTS {
            if (self.r_joints[j - 1].0 - Rot3::identity().0).abs().max() > tol {
                return Err(MotionError::InvalidPose(format!(
                    "leaf joint {j} must have identity rotation"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseSequence {
    pub fps: f64,
    pub skeleton: String,
    pub poses: Vec<Pose>,
}

impl PoseSequence {
    pub fn new(fps: f64, poses: Vec<Pose>) -> Self {
        PoseSequence {
            fps,
            skeleton: DEFAULT_SKELETON_NAME.to_string(),
            poses,
        }
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.fps
    }

    pub fn require_len(&self, need: usize) -> Result<(), MotionError> {
        if self.poses.len() < need {
            return Err(MotionError::TooShort {
                need,
                got: self.poses.len(),
            });
        }
        Ok(())
    }
}

/// Global joint placement produced by [`forward_kinematics`].
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalPose {
    pub positions: Vec<Vector3<f64>>,
    pub rotations: Vec<Rot3>,
}

pub fn forward_kinematics(skel: &Skeleton, pose: &Pose) -> GlobalPose {
    let n = skel.joints.len();
    let mut positions = Vec::with_capacity(n);
    let mut rotations: Vec<Rot3> = Vec::with_capacity(n);
    for (i, joint) in skel.joints.iter().enumerate() {
        match joint.parent {
            None => {
                positions.push(pose.p_root);
                rotations.push(pose.r_root);
            }
            Some(p) => {
                let rp = rotations[p];
                positions.push(positions[p] + rp.apply(&joint.offset));
                rotations.push(rp.mul(pose.local(i)));
            }
        }
    }
    GlobalPose {
        positions,
        rotations,
    }
}

/// Global joint positions for every frame.
pub fn sequence_positions(skel: &Skeleton, seq: &PoseSequence) -> Vec<Vec<Vector3<f64>>> {
    seq.poses
        .iter()
        .map(|p| forward_kinematics(skel, p).positions)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rotmath::euler_to_rot;
    use crate::rotmath::Euler3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    pub(crate) fn random_pose(rng: &mut ChaCha8Rng, scale: f64) -> Pose {
        let mut p = Pose::rest(Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(0.5..1.5),
            rng.random_range(-1.0..1.0),
        ));
        for j in 0..NUM_JOINTS {
            *p.local_mut(j) = euler_to_rot(&Euler3([
                rng.random_range(-scale..scale),
                rng.random_range(-scale..scale),
                rng.random_range(-scale..scale),
            ]));
        }
        p.enforce_leaves();
        p
    }

    #[test]
    fn fk_rest_pose_sums_offsets() {
        let skel = Skeleton::smpl_default();
        let root = Vector3::new(0.1, 0.9, -0.2);
        let g = forward_kinematics(&skel, &Pose::rest(root));
        for i in 0..NUM_JOINTS {
            let mut want = root;
            let mut j = i;
            while let Some(p) = skel.joints[j].parent {
                want += skel.joints[j].offset;
                j = p;
            }
            assert!((g.positions[i] - want).norm() < 1e-15);
        }
    }

    #[test]
    fn fk_root_yaw_rotates_rigidly() {
        let skel = Skeleton::smpl_default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pose = random_pose(&mut rng, 0.5);
        let base = forward_kinematics(&skel, &pose);
        let yaw = Rot3::from_axis_angle(&skel.up_axis, PI / 2.0);
        let mut turned = pose.clone();
        turned.r_root = yaw.mul(&pose.r_root);
        let g = forward_kinematics(&skel, &turned);
        for i in 0..NUM_JOINTS {
            let want = pose.p_root + yaw.apply(&(base.positions[i] - pose.p_root));
            assert!((g.positions[i] - want).norm() < 1e-12);
        }
    }

    #[test]
    fn fk_two_link_chain() {
        // Root -> joint 1 -> joint 4 of a modified skeleton with unit offsets.
        let mut skel = Skeleton::smpl_default();
        skel.joints[1].offset = Vector3::new(0.0, 0.0, 1.0);
        skel.joints[4].offset = Vector3::new(0.0, 0.0, 1.0);
        let mut pose = Pose::rest(Vector3::zeros());
        *pose.local_mut(1) = Rot3::rot_x(PI / 2.0);
        let g = forward_kinematics(&skel, &pose);
        // joint 1 at (0,0,1); its frame is rotated 90 deg about x, so the
        // next unit offset along z lands at (0,-1,1).
        assert!((g.positions[1] - Vector3::new(0.0, 0.0, 1.0)).norm() < 1e-15);
        assert!((g.positions[4] - Vector3::new(0.0, -1.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn fk_equivariant_under_global_rigid_transform() {
        let skel = Skeleton::smpl_default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let pose = random_pose(&mut rng, 1.0);
            let g0 = forward_kinematics(&skel, &pose);
            let r = euler_to_rot(&Euler3([
                rng.random_range(-PI..PI),
                rng.random_range(-1.0..1.0),
                rng.random_range(-PI..PI),
            ]));
            let t = Vector3::new(0.3, -0.2, 1.1);
            let mut moved = pose.clone();
            moved.p_root = r.apply(&pose.p_root) + t;
            moved.r_root = r.mul(&pose.r_root);
            let g1 = forward_kinematics(&skel, &moved);
            for i in 0..NUM_JOINTS {
                assert!((g1.positions[i] - (r.apply(&g0.positions[i]) + t)).norm() < 1e-12);
                assert!((g1.rotations[i].0 - r.mul(&g0.rotations[i]).0).abs().max() < 1e-12);
            }
        }
    }
}

#[cfg(test)]
pub(crate) use tests::random_pose;
