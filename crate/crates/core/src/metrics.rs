//! Fidelity, diversity and smoothness metrics on pose sequences.

use std::path::Path;

use nalgebra::{Matrix4, Rotation3, UnitQuaternion, Vector3, Vector4};
use serde::Serialize;
use thiserror::Error;

use crate::motion::{forward_kinematics, sequence_positions, MotionError, PoseSequence, Skeleton};
use crate::rotmath::{geodesic_deg, Rot3};

/// Upper legs and upper arms of the SMPL hierarchy.
pub const SIP_JOINTS: [usize; 4] = [1, 2, 16, 17];

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no augmented sequences given")]
    Empty,
    #[error("sequence {index} has {got} frames at {fps} fps, ground truth has {want} at {want_fps}")]
    Mismatch {
        index: usize,
        got: usize,
        fps: f64,
        want: usize,
        want_fps: f64,
    },
    #[error("invalid joint list: {0}")]
    Joints(String),
    #[error("motion: {0}")]
    Motion(#[from] MotionError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointStats {
    pub joint: usize,
    pub name: String,
    pub e_pos: f64,
    pub e_rot: f64,
    pub d_pos: Option<f64>,
    pub d_rot: Option<f64>,
}

/// Errors against ground truth and spread across samples. Positions in cm,
/// angles in degrees; the spread terms need at least two samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FidelityReport {
    pub samples: usize,
    pub frames: usize,
    pub e_pos: f64,
    pub e_rot: f64,
    pub e_sip: f64,
    pub d_pos: Option<f64>,
    pub d_rot: Option<f64>,
    pub joints: Vec<JointStats>,
}

/// Rotation closest in the chordal sense to a set of rotations: the
/// principal eigenvector of the summed quaternion outer products.
pub fn chordal_mean(rots: &[Rot3]) -> Rot3 {
    let mut m = Matrix4::<f64>::zeros();
    for r in rots {
        let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(r.0));
        let v: Vector4<f64> = q.into_inner().coords;
        m += v * v.transpose();
    }
    let eig = m.symmetric_eigen();
    let v = eig.eigenvectors.column(eig.eigenvalues.imax()).into_owned();
    let q = UnitQuaternion::from_quaternion(nalgebra::Quaternion::from(v));
    Rot3(*q.to_rotation_matrix().matrix())
}

pub fn fidelity(
    skel: &Skeleton,
    gt: &PoseSequence,
    augmented: &[PoseSequence],
) -> Result<FidelityReport, MetricsError> {
    fidelity_with(skel, gt, augmented, &SIP_JOINTS)
}

pub fn fidelity_with(
    skel: &Skeleton,
    gt: &PoseSequence,
    augmented: &[PoseSequence],
    sip: &[usize],
) -> Result<FidelityReport, MetricsError> {
    if augmented.is_empty() {
        return Err(MetricsError::Empty);
    }
    gt.require_len(1)?;
    let nj = skel.joints.len();
    if sip.is_empty() || sip.iter().any(|&j| j >= nj) {
        return Err(MetricsError::Joints(format!("{sip:?} for a {nj}-joint skeleton")));
    }
    for (index, s) in augmented.iter().enumerate() {
        if s.len() != gt.len() || s.fps != gt.fps {
            return Err(MetricsError::Mismatch {
                index,
                got: s.len(),
                fps: s.fps,
                want: gt.len(),
                want_fps: gt.fps,
            });
        }
    }
    let k = augmented.len();
    let t_len = gt.len();
    let gt_fk: Vec<_> = gt.poses.iter().map(|p| forward_kinematics(skel, p)).collect();
    let aug_fk: Vec<Vec<_>> = augmented
        .iter()
        .map(|s| s.poses.iter().map(|p| forward_kinematics(skel, p)).collect())
        .collect();

    let mut e_pos = vec![0.0; nj];
    let mut e_rot = vec![0.0; nj];
    let mut d_pos = vec![0.0; nj];
    let mut d_rot = vec![0.0; nj];
    for t in 0..t_len {
        for j in 0..nj {
            let g = &gt_fk[t];
            let mut mean = Vector3::zeros();
            let mut rots = Vec::with_capacity(k);
            for s in &aug_fk {
                let p = s[t].positions[j];
                e_pos[j] += (p - g.positions[j]).norm();
                e_rot[j] += geodesic_deg(&s[t].rotations[j], &g.rotations[j]);
                mean += p;
                rots.push(s[t].rotations[j]);
            }
            if k >= 2 {
                mean /= k as f64;
                let var = aug_fk.iter().map(|s| (s[t].positions[j] - mean).norm_squared()).sum::<f64>() / k as f64;
                d_pos[j] += var.sqrt();
                let center = chordal_mean(&rots);
                d_rot[j] += rots.iter().map(|r| geodesic_deg(r, &center)).sum::<f64>() / k as f64;
            }
        }
    }
    let per_sample = (t_len * k) as f64;
    let joints: Vec<JointStats> = (0..nj)
        .map(|j| JointStats {
            joint: j,
            name: skel.joints[j].name.clone(),
            e_pos: 100.0 * e_pos[j] / per_sample,
            e_rot: e_rot[j] / per_sample,
            d_pos: (k >= 2).then(|| 100.0 * d_pos[j] / t_len as f64),
            d_rot: (k >= 2).then(|| d_rot[j] / t_len as f64),
        })
        .collect();
    let mean_of = |f: &dyn Fn(&JointStats) -> f64, set: &[usize]| set.iter().map(|&j| f(&joints[j])).sum::<f64>() / set.len() as f64;
    let all: Vec<usize> = (0..nj).collect();
    Ok(FidelityReport {
        samples: k,
        frames: t_len,
        e_pos: mean_of(&|s| s.e_pos, &all),
        e_rot: mean_of(&|s| s.e_rot, &all),
        e_sip: mean_of(&|s| s.e_rot, sip),
        d_pos: (k >= 2).then(|| mean_of(&|s| s.d_pos.unwrap_or(0.0), &all)),
        d_rot: (k >= 2).then(|| mean_of(&|s| s.d_rot.unwrap_or(0.0), &all)),
        joints,
    })
}

/// Mean magnitude of the third derivative of global joint positions, in
/// units of 100 m/s^3.
pub fn jitter(skel: &Skeleton, seq: &PoseSequence) -> Result<f64, MetricsError> {
    seq.require_len(4)?;
    let pos = sequence_positions(skel, seq);
    let k = seq.fps.powi(3);
    let nj = skel.joints.len();
    let mut sum = 0.0;
    for t in 1..seq.len() - 2 {
        for j in 0..nj {
            let d = pos[t + 2][j] - pos[t + 1][j] * 3.0 + pos[t][j] * 3.0 - pos[t - 1][j];
            sum += d.norm() * k;
        }
    }
    Ok(sum / ((seq.len() - 3) * nj) as f64 / 100.0)
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub fps: f64,
    pub fidelity: FidelityReport,
    pub jitter_gt: f64,
    pub jitter_samples: Vec<f64>,
    pub jitter_mean: f64,
}

pub fn evaluate(skel: &Skeleton, gt: &PoseSequence, augmented: &[PoseSequence]) -> Result<EvalReport, MetricsError> {
    let fidelity = fidelity(skel, gt, augmented)?;
    let jitter_samples = augmented.iter().map(|s| jitter(skel, s)).collect::<Result<Vec<_>, _>>()?;
    Ok(EvalReport {
        fps: gt.fps,
        jitter_gt: jitter(skel, gt)?,
        jitter_mean: jitter_samples.iter().sum::<f64>() / jitter_samples.len() as f64,
        jitter_samples,
        fidelity,
    })
}

impl EvalReport {
    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<(), MetricsError> {
        let text = serde_json::to_string_pretty(self).expect("report serializes");
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    /// Per-joint table `joint,name,e_pos_cm,e_rot_deg,d_pos_cm,d_rot_deg`.
    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<(), MetricsError> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["joint", "name", "e_pos_cm", "e_rot_deg", "d_pos_cm", "d_rot_deg"])?;
        for j in &self.fidelity.joints {
            w.serialize((j.joint, &j.name, j.e_pos, j.e_rot, j.d_pos, j.d_rot))?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::{gen_synthetic_motion, MotionKind, Pose};
    use std::f64::consts::PI;

    fn skel() -> Skeleton {
        Skeleton::smpl_default()
    }

    fn walk(seed: u64) -> PoseSequence {
        gen_synthetic_motion(MotionKind::Walk, 0.5, seed, &skel()).unwrap()
    }

    #[test]
    fn identical_sequences_score_zero() {
        let s = skel();
        let gt = walk(1);
        let r = fidelity(&s, &gt, &[gt.clone()]).unwrap();
        assert_eq!((r.e_pos, r.e_rot, r.e_sip), (0.0, 0.0, 0.0));
        assert_eq!(r.d_pos, None);
        let other = walk(2);
        let r = fidelity(&s, &gt, &[other.clone(), other]).unwrap();
        assert!(r.e_pos > 0.0);
        assert!(r.d_pos.unwrap() < 1e-12 && r.d_rot.unwrap() < 1e-6);
    }

    #[test]
    fn three_centimetre_offset_arithmetic() {
        // rotating the left wrist moves only the hand leaf below it
        let s = skel();
        let (wrist, hand) = (20, 22);
        let len = s.joints[hand].offset.norm();
        let angle = 2.0 * (0.015 / len).asin();
        let gt = PoseSequence::new(60.0, vec![Pose::rest(Vector3::new(0.0, 0.9, 0.0)); 5]);
        let mut moved = gt.clone();
        let axis = s.joints[hand].offset.cross(&Vector3::z()).normalize();
        for p in &mut moved.poses {
            *p.local_mut(wrist) = Rot3::from_axis_angle(&axis, angle);
        }
        let r = fidelity(&s, &gt, &[moved, gt.clone()]).unwrap();
        for j in &r.joints {
            let (e, d) = if j.joint == hand { (1.5, 1.5) } else { (0.0, 0.0) };
            assert!((j.e_pos - e).abs() < 1e-9, "{} {}", j.joint, j.e_pos);
            assert!((j.d_pos.unwrap() - d).abs() < 1e-9);
        }
        assert!((r.e_pos - 1.5 / 24.0).abs() < 1e-9);
    }

    #[test]
    fn rotation_errors_are_global_geodesics() {
        let s = skel();
        let gt = PoseSequence::new(60.0, vec![Pose::rest(Vector3::zeros()); 3]);
        let mut turned = gt.clone();
        for p in &mut turned.poses {
            p.r_root = Rot3::rot_y(0.2);
        }
        let r = fidelity(&s, &gt, &[turned.clone()]).unwrap();
        // every joint inherits the root rotation
        for j in &r.joints {
            assert!((j.e_rot - 0.2f64.to_degrees()).abs() < 1e-9);
        }
        assert!((r.e_sip - 0.2f64.to_degrees()).abs() < 1e-9);
        // two samples at +-0.2 rad spread 0.2 rad around the identity
        let mut other = gt.clone();
        for p in &mut other.poses {
            p.r_root = Rot3::rot_y(-0.2);
        }
        let r = fidelity(&s, &gt, &[turned, other]).unwrap();
        assert!((r.d_rot.unwrap() - 0.2f64.to_degrees()).abs() < 1e-6);
    }

    #[test]
    fn chordal_mean_of_symmetric_pair() {
        let a = Rot3::rot_z(0.5);
        let b = Rot3::rot_z(-0.5);
        let m = chordal_mean(&[a, b]);
        assert!((m.0 - Rot3::identity().0).amax() < 1e-12);
        let c = Rot3::from_axis_angle(&Vector3::new(1.0, 2.0, 0.5), 1.1);
        assert!((chordal_mean(&[c, c, c]).0 - c.0).amax() < 1e-12);
    }

    #[test]
    fn metrics_ignore_sample_order() {
        let s = skel();
        let gt = walk(1);
        let samples = vec![walk(2), walk(3), walk(4)];
        let mut rev = samples.clone();
        rev.reverse();
        let a = fidelity(&s, &gt, &samples).unwrap();
        let b = fidelity(&s, &gt, &rev).unwrap();
        assert!((a.e_pos - b.e_pos).abs() < 1e-12);
        assert!((a.e_rot - b.e_rot).abs() < 1e-9);
        assert!((a.d_pos.unwrap() - b.d_pos.unwrap()).abs() < 1e-12);
        assert!((a.d_rot.unwrap() - b.d_rot.unwrap()).abs() < 1e-9);
    }

    #[test]
    fn positional_metrics_scale_linearly() {
        let s = skel();
        let s2 = s.scaled(2.0);
        let gt = walk(1);
        let samples = vec![walk(2), walk(5)];
        let scale = |seq: &PoseSequence| {
            let mut out = seq.clone();
            for p in &mut out.poses {
                p.p_root *= 2.0;
            }
            out
        };
        let a = fidelity(&s, &gt, &samples).unwrap();
        let b = fidelity(&s2, &scale(&gt), &samples.iter().map(scale).collect::<Vec<_>>()).unwrap();
        assert!((b.e_pos - 2.0 * a.e_pos).abs() < 1e-9);
        assert!((b.d_pos.unwrap() - 2.0 * a.d_pos.unwrap()).abs() < 1e-9);
        assert!((b.e_rot - a.e_rot).abs() < 1e-9);
    }

    #[test]
    fn fidelity_errors() {
        let s = skel();
        let gt = walk(1);
        assert!(matches!(fidelity(&s, &gt, &[]), Err(MetricsError::Empty)));
        let mut short = gt.clone();
        short.poses.pop();
        assert!(matches!(fidelity(&s, &gt, &[short]), Err(MetricsError::Mismatch { index: 0, .. })));
        assert!(matches!(fidelity_with(&s, &gt, &[gt.clone()], &[30]), Err(MetricsError::Joints(_))));
    }

    fn root_path(f: impl Fn(f64) -> Vector3<f64>, n: usize, fps: f64) -> PoseSequence {
        PoseSequence::new(fps, (0..n).map(|t| Pose::rest(f(t as f64 / fps))).collect())
    }

    #[test]
    fn polynomial_paths_have_no_jitter() {
        let s = skel();
        assert!(jitter(&s, &root_path(|_| Vector3::new(0.0, 1.0, 0.0), 10, 60.0)).unwrap() < 1e-9);
        assert!(jitter(&s, &root_path(|t| Vector3::new(t, 1.0, -2.0 * t), 10, 60.0)).unwrap() < 1e-9);
        assert!(jitter(&s, &root_path(|t| Vector3::new(t * t, 1.0, 0.5 * t * t), 10, 60.0)).unwrap() < 1e-7);
        assert!(matches!(
            jitter(&s, &root_path(|_| Vector3::zeros(), 3, 60.0)),
            Err(MetricsError::Motion(MotionError::TooShort { .. }))
        ));
    }

    #[test]
    fn sinusoid_matches_analytic_third_derivative() {
        let s = skel();
        let w = 2.0 * PI;
        // exactly one period plus the stencil margin
        let seq = root_path(|t| Vector3::new((w * t).sin(), 0.0, 0.0), 64, 60.0);
        let j = jitter(&s, &seq).unwrap();
        // mean of |w^3 cos| over a period, in 100 m/s^3
        let analytic = w.powi(3) * 2.0 / PI / 100.0;
        assert!((j / analytic - 1.0).abs() < 0.02, "{j} vs {analytic}");
    }

    #[test]
    fn report_files() {
        let s = skel();
        let gt = walk(1);
        let r = evaluate(&s, &gt, &[walk(2), walk(3)]).unwrap();
        assert_eq!(r.jitter_samples.len(), 2);
        let dir = tempfile::tempdir().unwrap();
        r.save_json(dir.path().join("r.json")).unwrap();
        r.save_csv(dir.path().join("r.csv")).unwrap();
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
        assert!(v["fidelity"]["e_pos"].as_f64().unwrap() > 0.0);
        let csv = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
        assert!(csv.starts_with("joint,name,e_pos_cm,e_rot_deg,d_pos_cm,d_rot_deg\n"));
        assert_eq!(csv.lines().count(), 25);
    }
}
