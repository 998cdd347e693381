use nalgebra::Vector3;

use super::{forward_kinematics, MotionError, Pose, PoseSequence, Skeleton, FRAME_JOINTS};
use crate::rotmath::{renormalize_sixd, rot_to_sixd, sixd_to_rot, Rot3, SixD};

/// Length of a motion frame: `3 + 3 + 6 + (3 + 3 + 6) * 19`.
pub const FRAME_DIM: usize = 240;

const BLOCK: usize = 12;

/// The 240-dim per-timestep vector consumed and produced by the VAE.
///
/// Layout: `p_root (3), v_root (3), rot_root (6D)` followed by, for each of
/// the 19 [`FRAME_JOINTS`] in order, `p (3), v (3), rot (6D)` expressed in
/// the root frame. Velocities are in m/s.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionFrame(Vec<f64>);

impl MotionFrame {
    pub fn zeros() -> Self {
        MotionFrame(vec![0.0; FRAME_DIM])
    }

    pub fn from_vec(v: Vec<f64>) -> Result<Self, MotionError> {
        if v.len() != FRAME_DIM {
            return Err(MotionError::FrameDim(v.len()));
        }
        Ok(MotionFrame(v))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Start offsets of the 20 position blocks (root first).
    pub fn position_offsets() -> impl Iterator<Item = usize> {
        std::iter::once(0).chain((0..FRAME_JOINTS.len()).map(|k| BLOCK + BLOCK * k))
    }

    pub fn velocity_offsets() -> impl Iterator<Item = usize> {
        Self::position_offsets().map(|o| o + 3)
    }

    pub fn rotation_offsets() -> impl Iterator<Item = usize> {
        Self::position_offsets().map(|o| o + 6)
    }

    pub fn vec3(&self, off: usize) -> Vector3<f64> {
        Vector3::new(self.0[off], self.0[off + 1], self.0[off + 2])
    }

    pub fn set_vec3(&mut self, off: usize, v: &Vector3<f64>) {
        self.0[off..off + 3].copy_from_slice(v.as_slice());
    }

    pub fn sixd(&self, off: usize) -> SixD {
        SixD::from_slice(&self.0[off..off + 6])
    }

    pub fn set_sixd(&mut self, off: usize, r: &SixD) {
        self.0[off..off + 6].copy_from_slice(&r.0);
    }

    /// Offset of the block of the `k`-th frame joint.
    pub fn joint_block(k: usize) -> usize {
        BLOCK + BLOCK * k
    }

    /// Renormalize every 6D block in place.
    pub fn renormalize_rotations(&mut self) -> Result<(), MotionError> {
        for off in Self::rotation_offsets() {
            let r = renormalize_sixd(&self.sixd(off))?;
            self.set_sixd(off, &r);
        }
        Ok(())
    }
}

/// Convert a pose sequence into motion frames.
pub fn build_frames(skel: &Skeleton, seq: &PoseSequence) -> Result<Vec<MotionFrame>, MotionError> {
    seq.require_len(2)?;
    let mut frames: Vec<MotionFrame> = seq
        .poses
        .iter()
        .map(|pose| {
            let g = forward_kinematics(skel, pose);
            let r_inv = pose.r_root.transpose();
            let mut f = MotionFrame::zeros();
            f.set_vec3(0, &pose.p_root);
            f.set_sixd(6, &rot_to_sixd(&pose.r_root));
            for (k, &j) in FRAME_JOINTS.iter().enumerate() {
                let off = MotionFrame::joint_block(k);
                f.set_vec3(off, &r_inv.apply(&(g.positions[j] - pose.p_root)));
                f.set_sixd(off + 6, &rot_to_sixd(&r_inv.mul(&g.rotations[j])));
            }
            f
        })
        .collect();
    for t in (1..frames.len()).rev() {
        for off in MotionFrame::position_offsets() {
            let v = (frames[t].vec3(off) - frames[t - 1].vec3(off)) * seq.fps;
            frames[t].set_vec3(off + 3, &v);
        }
    }
    for off in MotionFrame::velocity_offsets() {
        let v = frames[1].vec3(off);
        frames[0].set_vec3(off, &v);
    }
    Ok(frames)
}

/// Rebuild poses from (possibly augmented) frames. Root placement comes from
/// `reference`; joint rotations come from the frames' root-frame rotations,
/// converted to parent frames along the skeleton chain.
pub fn frames_to_poses(
    frames: &[MotionFrame],
    reference: &PoseSequence,
) -> Result<PoseSequence, MotionError> {
    if frames.len() != reference.len() {
        return Err(MotionError::LengthMismatch(frames.len(), reference.len()));
    }
    let parents = super::SMPL_PARENTS;
    let mut poses = Vec::with_capacity(frames.len());
    for (f, rp) in frames.iter().zip(&reference.poses) {
        // root-frame rotation of every joint; the root itself is identity
        let mut in_root = [Rot3::identity(); super::NUM_JOINTS];
        for (k, &j) in FRAME_JOINTS.iter().enumerate() {
            in_root[j] = sixd_to_rot(&f.sixd(MotionFrame::joint_block(k) + 6))?;
        }
        let mut pose = Pose::rest(rp.p_root);
        pose.r_root = rp.r_root;
        for &j in FRAME_JOINTS.iter() {
            let p = parents[j] as usize;
            pose.r_joints[j - 1] = in_root[p].transpose().mul(&in_root[j]);
        }
        pose.enforce_leaves();
        poses.push(pose);
    }
    Ok(PoseSequence {
        fps: reference.fps,
        skeleton: reference.skeleton.clone(),
        poses,
    })
}
