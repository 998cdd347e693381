//! Virtual IMU signals (global acceleration and orientation) at six body
//! sites, obtained by differentiating forward-kinematics trajectories.

use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::GRAVITY;
use crate::motion::{forward_kinematics, MotionError, PoseSequence, Skeleton};
use crate::rotmath::{rot_to_sixd, sixd_to_rot, Rot3, SixD};

pub const NUM_SITES: usize = 6;

#[derive(Debug, Error)]
pub enum ImuError {
    #[error("invalid site configuration: {0}")]
    Config(String),
    #[error("motion: {0}")]
    Motion(#[from] MotionError),
    #[error("{path}: {msg}")]
    Parse { path: String, msg: String },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImuConfig {
    /// Joint indices: pelvis, head, left wrist, right wrist, left knee, right knee.
    pub sites: [usize; NUM_SITES],
    /// Add `+g * up` so the output reads like an accelerometer at rest.
    pub with_gravity: bool,
}

impl Default for ImuConfig {
    fn default() -> Self {
        ImuConfig {
            sites: [0, 15, 20, 21, 4, 5],
            with_gravity: false,
        }
    }
}

impl ImuConfig {
    pub fn validate(&self, skel: &Skeleton) -> Result<(), ImuError> {
        for (i, &s) in self.sites.iter().enumerate() {
            if s >= skel.joints.len() {
                return Err(ImuError::Config(format!("site {i} uses joint {s}, skeleton has {}", skel.joints.len())));
            }
            if self.sites[..i].contains(&s) {
                return Err(ImuError::Config(format!("joint {s} is used by two sites")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImuFrame {
    pub acc: [Vector3<f64>; NUM_SITES],
    pub ori: [Rot3; NUM_SITES],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImuSequence {
    pub fps: f64,
    pub sites: Vec<String>,
    pub frames: Vec<ImuFrame>,
}

/// Second derivative of a uniformly sampled signal at every sample.
///
/// Interior samples use the central difference; the ends use the
/// one-sided four-point stencil (three points when only three exist).
pub fn second_difference(p: &[Vector3<f64>], fps: f64) -> Vec<Vector3<f64>> {
    let n = p.len();
    let k = fps * fps;
    let mut out = vec![Vector3::zeros(); n];
    if n < 3 {
        return out;
    }
    for t in 1..n - 1 {
        out[t] = (p[t + 1] - p[t] * 2.0 + p[t - 1]) * k;
    }
    if n == 3 {
        out[0] = out[1];
        out[2] = out[1];
    } else {
        out[0] = (p[0] * 2.0 - p[1] * 5.0 + p[2] * 4.0 - p[3]) * k;
        out[n - 1] = (p[n - 1] * 2.0 - p[n - 2] * 5.0 + p[n - 3] * 4.0 - p[n - 4]) * k;
    }
    out
}

pub fn synthesize(skel: &Skeleton, seq: &PoseSequence, cfg: &ImuConfig) -> Result<ImuSequence, ImuError> {
    cfg.validate(skel)?;
    seq.require_len(3)?;
    let globals: Vec<_> = seq.poses.iter().map(|p| forward_kinematics(skel, p)).collect();
    let g = skel.up_axis.normalize() * GRAVITY;
    let mut acc = Vec::with_capacity(NUM_SITES);
    for &s in &cfg.sites {
        let track: Vec<Vector3<f64>> = globals.iter().map(|gp| gp.positions[s]).collect();
        acc.push(second_difference(&track, seq.fps));
    }
    let frames = (0..seq.len())
        .map(|t| ImuFrame {
            acc: std::array::from_fn(|i| if cfg.with_gravity { acc[i][t] + g } else { acc[i][t] }),
            ori: std::array::from_fn(|i| globals[t].rotations[cfg.sites[i]]),
        })
        .collect();
    Ok(ImuSequence {
        fps: seq.fps,
        sites: cfg.sites.iter().map(|&s| skel.joints[s].name.clone()).collect(),
        frames,
    })
}

#[derive(Serialize, Deserialize)]
struct ImuFile {
    fps: f64,
    sites: Vec<String>,
    frames: Vec<ImuFileFrame>,
}

#[derive(Serialize, Deserialize)]
struct ImuFileFrame {
    acc: Vec<[f64; 3]>,
    ori: Vec<[f64; 6]>,
}

impl ImuSequence {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ImuError> {
        let file = ImuFile {
            fps: self.fps,
            sites: self.sites.clone(),
            frames: self
                .frames
                .iter()
                .map(|f| ImuFileFrame {
                    acc: f.acc.iter().map(|a| [a.x, a.y, a.z]).collect(),
                    ori: f.ori.iter().map(|r| rot_to_sixd(r).0).collect(),
                })
                .collect(),
        };
        let text = serde_json::to_string(&file).expect("IMU data serializes");
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ImuError> {
        let path = path.as_ref();
        let err = |msg: String| ImuError::Parse {
            path: path.display().to_string(),
            msg,
        };
        let text = std::fs::read_to_string(path)?;
        let file: ImuFile = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
        if file.sites.len() != NUM_SITES {
            return Err(err(format!("expected {NUM_SITES} sites, found {}", file.sites.len())));
        }
        let mut frames = Vec::with_capacity(file.frames.len());
        for (t, f) in file.frames.into_iter().enumerate() {
            if f.acc.len() != NUM_SITES || f.ori.len() != NUM_SITES {
                return Err(err(format!("frame {t} does not have {NUM_SITES} sites")));
            }
            let mut ori = [Rot3::identity(); NUM_SITES];
            for (i, o) in f.ori.iter().enumerate() {
                ori[i] = sixd_to_rot(&SixD(*o)).map_err(|e| err(format!("frame {t}: {e}")))?;
            }
            frames.push(ImuFrame {
                acc: std::array::from_fn(|i| Vector3::from(f.acc[i])),
                ori,
            });
        }
        Ok(ImuSequence {
            fps: file.fps,
            sites: file.sites,
            frames,
        })
    }
}
