//! JSON skeleton and motion files.
//!
//! Skeleton:
//! `{"name": "...", "joints": [{"name", "parent", "offset": [3], "mass", "com": [3], "inertia": [6]}...], "up_axis": [3]}`
//! with `parent = -1` for the root and inertia ordered `[ixx, iyy, izz, ixy, ixz, iyz]`.
//! Euler angles used by the dynamics stage are intrinsic X-Y-Z.
//!
//! Motion:
//! `{"fps": 60, "skeleton": "<name>", "frames": [{"p_root": [3], "r_root": [6], "r_joints": [[6] x 23]}...]}`
//! with rotations in 6D (first two matrix columns).

use std::fs;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{Joint, MotionError, Pose, PoseSequence, Skeleton, DEFAULT_SKELETON_NAME, NUM_JOINTS};
use crate::rotmath::{rot_to_sixd, Rot3};

const ROT_TOL: f64 = 1e-9;

#[derive(Serialize, Deserialize)]
struct JointRecord {
    name: String,
    parent: i64,
    offset: [f64; 3],
    mass: f64,
    com: [f64; 3],
    inertia: [f64; 6],
}

#[derive(Serialize, Deserialize)]
struct SkeletonFile {
    #[serde(default = "default_name")]
    name: String,
    joints: Vec<JointRecord>,
    up_axis: [f64; 3],
}

fn default_name() -> String {
    DEFAULT_SKELETON_NAME.to_string()
}

#[derive(Serialize, Deserialize)]
struct FrameRecord {
    p_root: [f64; 3],
    r_root: [f64; 6],
    r_joints: Vec<[f64; 6]>,
}

#[derive(Serialize, Deserialize)]
struct MotionFile {
    fps: f64,
    skeleton: String,
    frames: Vec<FrameRecord>,
}

fn parse_err(path: &Path, msg: impl Into<String>) -> MotionError {
    MotionError::Parse {
        path: path.display().to_string(),
        msg: msg.into(),
    }
}

pub fn load_skeleton(path: impl AsRef<Path>) -> Result<Skeleton, MotionError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let file: SkeletonFile =
        serde_json::from_str(&text).map_err(|e| parse_err(path, e.to_string()))?;
    if file.joints.len() != NUM_JOINTS {
        return Err(parse_err(
            path,
            format!(
                "joint count: expected {NUM_JOINTS}, found {}",
                file.joints.len()
            ),
        ));
    }
    let mut joints = Vec::with_capacity(file.joints.len());
    for (i, j) in file.joints.into_iter().enumerate() {
        let parent = match j.parent {
            -1 => None,
            p if p >= 0 => Some(p as usize),
            p => return Err(parse_err(path, format!("joints[{i}].parent: invalid index {p}"))),
        };
        joints.push(Joint {
            name: j.name,
            parent,
            offset: Vector3::from(j.offset),
            mass: j.mass,
            com: Vector3::from(j.com),
            inertia: j.inertia,
        });
    }
    let skel = Skeleton {
        name: file.name,
        joints,
        up_axis: Vector3::from(file.up_axis),
    };
    skel.validate().map_err(|e| parse_err(path, e.to_string()))?;
    Ok(skel)
}

pub fn save_skeleton(skel: &Skeleton, path: impl AsRef<Path>) -> Result<(), MotionError> {
    let file = SkeletonFile {
        name: skel.name.clone(),
        joints: skel
            .joints
            .iter()
            .map(|j| JointRecord {
                name: j.name.clone(),
                parent: j.parent.map_or(-1, |p| p as i64),
                offset: j.offset.into(),
                mass: j.mass,
                com: j.com.into(),
                inertia: j.inertia,
            })
            .collect(),
        up_axis: skel.up_axis.into(),
    };
    write_json(path.as_ref(), &file)
}

/// Load a motion file recorded against `skel`.
pub fn load_motion(path: impl AsRef<Path>, skel: &Skeleton) -> Result<PoseSequence, MotionError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let file: MotionFile =
        serde_json::from_str(&text).map_err(|e| parse_err(path, e.to_string()))?;
    if file.skeleton != skel.name {
        return Err(parse_err(
            path,
            format!(
                "skeleton: file references unknown skeleton '{}' (loaded '{}')",
                file.skeleton, skel.name
            ),
        ));
    }
    if !(file.fps > 0.0 && file.fps.is_finite()) {
        return Err(parse_err(path, "fps: must be positive"));
    }
    let mut poses = Vec::with_capacity(file.frames.len());
    for (t, fr) in file.frames.iter().enumerate() {
        if fr.r_joints.len() != NUM_JOINTS - 1 {
            return Err(parse_err(
                path,
                format!(
                    "frames[{t}].r_joints: expected {} rotations, found {}",
                    NUM_JOINTS - 1,
                    fr.r_joints.len()
                ),
            ));
        }
        let mut pose = Pose::rest(Vector3::from(fr.p_root));
        pose.r_root = rot_from_file(&fr.r_root)
            .ok_or_else(|| parse_err(path, format!("frames[{t}].r_root: not a rotation")))?;
        for (k, r) in fr.r_joints.iter().enumerate() {
            pose.r_joints[k] = rot_from_file(r).ok_or_else(|| {
                parse_err(path, format!("frames[{t}].r_joints[{k}]: not a rotation"))
            })?;
        }
        pose.validate(ROT_TOL)
            .map_err(|e| parse_err(path, format!("frames[{t}]: {e}")))?;
        poses.push(pose);
    }
    Ok(PoseSequence {
        fps: file.fps,
        skeleton: file.skeleton,
        poses,
    })
}

pub fn save_motion(seq: &PoseSequence, path: impl AsRef<Path>) -> Result<(), MotionError> {
    let file = MotionFile {
        fps: seq.fps,
        skeleton: seq.skeleton.clone(),
        frames: seq
            .poses
            .iter()
            .map(|p| FrameRecord {
                p_root: p.p_root.into(),
                r_root: rot_to_sixd(&p.r_root).0,
                r_joints: p.r_joints.iter().map(|r| rot_to_sixd(r).0).collect(),
            })
            .collect(),
    };
    write_json(path.as_ref(), &file)
}

// Columns are taken verbatim so that save(load(x)) reproduces x exactly.
fn rot_from_file(s: &[f64; 6]) -> Option<Rot3> {
    let c1 = Vector3::new(s[0], s[1], s[2]);
    let c2 = Vector3::new(s[3], s[4], s[5]);
    let r = Rot3(Matrix3::from_columns(&[c1, c2, c1.cross(&c2)]));
    r.is_valid(ROT_TOL).then_some(r)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), MotionError> {
    let text = serde_json::to_string(value).map_err(|e| parse_err(path, e.to_string()))?;
    fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::random_pose;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn motion_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let skel = Skeleton::smpl_default();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let seq = PoseSequence::new(60.0, (0..7).map(|_| random_pose(&mut rng, 1.0)).collect());
        let a = dir.path().join("a.json");
        let b = dir.path().join("b.json");
        save_motion(&seq, &a).unwrap();
        let back = load_motion(&a, &skel).unwrap();
        assert_eq!(back.len(), seq.len());
        for (x, y) in back.poses.iter().zip(&seq.poses) {
            assert_eq!(x.p_root, y.p_root);
            for j in 0..NUM_JOINTS {
                assert_eq!(rot_to_sixd(x.local(j)), rot_to_sixd(y.local(j)));
            }
        }
        save_motion(&back, &b).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    }

    #[test]
    fn skeleton_round_trip_and_joint_count_error() {
        let dir = tempfile::tempdir().unwrap();
        let skel = Skeleton::smpl_default();
        let p = dir.path().join("s.json");
        save_skeleton(&skel, &p).unwrap();
        assert_eq!(load_skeleton(&p).unwrap(), skel);

        let mut short = skel.clone();
        short.joints.pop();
        save_skeleton(&short, &p).unwrap();
        let e = load_skeleton(&p).unwrap_err().to_string();
        assert!(e.contains("joint count"), "{e}");
    }

    #[test]
    fn unknown_skeleton_and_malformed_files() {
        let dir = tempfile::tempdir().unwrap();
        let skel = Skeleton::smpl_default();
        let mut seq = PoseSequence::new(60.0, vec![Pose::rest(Vector3::zeros()); 2]);
        seq.skeleton = "mystery".into();
        let p = dir.path().join("m.json");
        save_motion(&seq, &p).unwrap();
        let e = load_motion(&p, &skel).unwrap_err().to_string();
        assert!(e.contains("unknown skeleton"), "{e}");

        fs::write(&p, "{\"fps\": 60, \"skeleton\": \"smpl24\", \"frames\": [").unwrap();
        let e = load_motion(&p, &skel).unwrap_err().to_string();
        assert!(e.contains("line"), "{e}");

        fs::write(
            &p,
            r#"{"fps":60,"skeleton":"smpl24","frames":[{"p_root":[0,0,0],"r_root":[2,0,0,0,1,0],"r_joints":[]}]}"#,
        )
        .unwrap();
        let e = load_motion(&p, &skel).unwrap_err().to_string();
        assert!(e.contains("frames[0].r_joints"), "{e}");
    }
}
