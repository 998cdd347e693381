//! Deterministic synthetic motions for desk-scale experiments.
//!
//! Every joint angle is a short sum of low-frequency sinusoids (or smooth
//! polynomial ramps), so the generated sequences are band-limited and
//! physically mild.

use std::f64::consts::PI;
use std::str::FromStr;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{forward_kinematics, MotionError, Pose, PoseSequence, Skeleton, NUM_JOINTS};
use crate::rotmath::{euler_to_rot, Euler3, Rot3};

pub const SYNTH_FPS: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MotionKind {
    Walk,
    Wave,
    Squat,
    Mixed,
    /// Quiet standing, no motion at all.
    Stand,
    /// Stair climbing: feet alternately lifted onto higher steps.
    Climb,
}

impl FromStr for MotionKind {
    type Err = MotionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "walk" => MotionKind::Walk,
            "wave" => MotionKind::Wave,
            "squat" => MotionKind::Squat,
            "mixed" => MotionKind::Mixed,
            "stand" => MotionKind::Stand,
            "climb" => MotionKind::Climb,
            other => return Err(MotionError::UnknownKind(other.to_string())),
        })
    }
}

impl MotionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MotionKind::Walk => "walk",
            MotionKind::Wave => "wave",
            MotionKind::Squat => "squat",
            MotionKind::Mixed => "mixed",
            MotionKind::Stand => "stand",
            MotionKind::Climb => "climb",
        }
    }
}

#[derive(Clone, Copy)]
struct Style {
    amp: f64,
    phase: f64,
    rate: f64,
}

#[derive(Clone)]
struct Tracks {
    root: Vector3<f64>,
    root_euler: [f64; 3],
    joints: [[f64; 3]; NUM_JOINTS],
}

impl Tracks {
    fn standing() -> Self {
        let mut joints = [[0.0; 3]; NUM_JOINTS];
        // arms lowered from the rest T-pose
        joints[16][2] = -1.2;
        joints[17][2] = 1.2;
        joints[18][1] = -0.15;
        joints[19][1] = 0.15;
        Tracks {
            root: Vector3::zeros(),
            root_euler: [0.0; 3],
            joints,
        }
    }

    fn blend(parts: &[(f64, Tracks)]) -> Tracks {
        let mut out = Tracks {
            root: Vector3::zeros(),
            root_euler: [0.0; 3],
            joints: [[0.0; 3]; NUM_JOINTS],
        };
        for (w, t) in parts {
            out.root += t.root * *w;
            for a in 0..3 {
                out.root_euler[a] += w * t.root_euler[a];
            }
            for j in 0..NUM_JOINTS {
                for a in 0..3 {
                    out.joints[j][a] += w * t.joints[j][a];
                }
            }
        }
        out
    }

    fn pose(&self) -> Pose {
        let mut p = Pose::rest(self.root);
        p.r_root = euler_to_rot(&Euler3(self.root_euler));
        for j in 1..NUM_JOINTS {
            *p.local_mut(j) = euler_to_rot(&Euler3(self.joints[j]));
        }
        p.enforce_leaves();
        p
    }
}

fn walk(t: f64, s: &Style) -> Tracks {
    let f = 0.9 * s.rate;
    let ph = 2.0 * PI * f * t + s.phase;
    let a = s.amp;
    let mut k = Tracks::standing();
    k.joints[1][0] = -0.4 * a * ph.sin();
    k.joints[2][0] = 0.4 * a * ph.sin();
    k.joints[4][0] = 0.35 * a * (1.0 + (ph - 0.5).sin());
    k.joints[5][0] = 0.35 * a * (1.0 + (ph - 0.5 + PI).sin());
    k.joints[7][0] = 0.1 * a * (ph + 1.0).sin();
    k.joints[8][0] = 0.1 * a * (ph + 1.0 + PI).sin();
    k.joints[3][1] = 0.05 * a * ph.sin();
    k.joints[9][1] = -0.05 * a * ph.sin();
    k.joints[16][0] = 0.3 * a * ph.sin();
    k.joints[17][0] = -0.3 * a * ph.sin();
    k.joints[18][1] = -0.3 - 0.1 * a * ph.sin();
    k.joints[19][1] = 0.3 - 0.1 * a * ph.sin();
    k.root_euler = [0.02 * a * (2.0 * ph).sin(), 0.04 * a * ph.sin(), 0.03 * a * ph.sin()];
    k.root = Vector3::new(0.0, 0.015 * a * (2.0 * ph).cos(), 1.2 * s.rate * t);
    k
}

fn wave(t: f64, s: &Style) -> Tracks {
    let ph = 2.0 * PI * 1.5 * s.rate * t + s.phase;
    let sway = 2.0 * PI * 0.3 * s.rate * t + s.phase;
    let mut k = Tracks::standing();
    k.joints[17][2] = -0.8 * s.amp;
    k.joints[19][2] = -0.6 - 0.5 * s.amp * ph.sin();
    k.joints[21][2] = -0.2 * s.amp * ph.sin();
    k.joints[3][2] = 0.04 * s.amp * sway.sin();
    k.joints[15][1] = 0.1 * s.amp * sway.sin();
    k
}

fn squat(t: f64, s: &Style) -> Tracks {
    let depth = 0.5 - 0.5 * (2.0 * PI * 0.4 * s.rate * t + s.phase).cos();
    let d = depth * s.amp.min(1.05);
    let mut k = Tracks::standing();
    for (hip, knee, ankle) in [(1, 4, 7), (2, 5, 8)] {
        k.joints[hip][0] = -1.1 * d;
        k.joints[knee][0] = 2.0 * d;
        k.joints[ankle][0] = -0.9 * d;
    }
    k.joints[3][0] = -0.3 * d;
    k.joints[16][0] = -1.0 * d;
    k.joints[17][0] = -1.0 * d;
    k
}

fn smoother(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * u * (u * (6.0 * u - 15.0) + 10.0)
}

fn climb(t: f64, s: &Style) -> Tracks {
    let period = 1.0 / s.rate;
    let steps = t / period;
    let n = steps.floor();
    let u = steps - n;
    let bump = (PI * u).sin().powi(2);
    let (swing_hip, swing_knee, swing_ankle) = if (n as i64) % 2 == 0 {
        (1, 4, 7)
    } else {
        (2, 5, 8)
    };
    let mut k = Tracks::standing();
    k.joints[swing_hip][0] = -0.9 * s.amp * bump;
    k.joints[swing_knee][0] = 1.3 * s.amp * bump;
    k.joints[swing_ankle][0] = -0.3 * s.amp * bump;
    k.joints[16][0] = 0.2 * bump * if swing_hip == 1 { 1.0 } else { -1.0 };
    k.joints[17][0] = -k.joints[16][0];
    let progress = n + smoother(u);
    k.root = Vector3::new(0.0, 0.17 * progress, 0.28 * progress);
    k
}

/// Root height (and horizontal position) that keeps the mean ankle
/// position at a fixed anchor.
fn plant_feet(skel: &Skeleton, mut pose: Pose, anchor: &Vector3<f64>) -> Pose {
    pose.p_root = Vector3::zeros();
    let g = forward_kinematics(skel, &pose);
    let mean = (g.positions[7] + g.positions[8]) * 0.5;
    pose.p_root = anchor - mean;
    pose
}

fn standing_height(skel: &Skeleton) -> f64 {
    let g = forward_kinematics(skel, &Tracks::standing().pose());
    let lowest = g
        .positions
        .iter()
        .map(|p| p.dot(&skel.up_axis))
        .fold(f64::INFINITY, f64::min);
    0.05 - lowest
}

/// Generate `seconds` of motion at 60 fps. Same arguments, same bytes.
pub fn gen_synthetic_motion(
    kind: MotionKind,
    seconds: f64,
    seed: u64,
    skel: &Skeleton,
) -> Result<PoseSequence, MotionError> {
    if !(seconds > 0.0 && seconds.is_finite()) {
        return Err(MotionError::InvalidPose("seconds must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let style = Style {
        amp: 1.0 + 0.1 * rng.random_range(-1.0..1.0),
        phase: rng.random_range(0.0..2.0 * PI),
        rate: 1.0 + 0.05 * rng.random_range(-1.0..1.0),
    };
    let n = (seconds * SYNTH_FPS).round().max(1.0) as usize;
    let h = standing_height(skel);
    let anchor = Vector3::new(0.0, 0.05, 0.0);
    let dt = 1.0 / SYNTH_FPS;
    let mut walked = 0.0;
    let mut poses = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 * dt;
        let pose = match kind {
            MotionKind::Walk => {
                let mut k = walk(t, &style);
                k.root.y += h;
                k.pose()
            }
            MotionKind::Wave => plant_feet(skel, wave(t, &style).pose(), &ankle_anchor(skel, &anchor)),
            MotionKind::Squat => plant_feet(skel, squat(t, &style).pose(), &ankle_anchor(skel, &anchor)),
            MotionKind::Stand => {
                plant_feet(skel, Tracks::standing().pose(), &ankle_anchor(skel, &anchor))
            }
            MotionKind::Climb => {
                let mut k = climb(t, &style);
                k.root.y += h;
                k.pose()
            }
            MotionKind::Mixed => {
                // walk -> wave -> squat with smooth cosine cross-fades
                let u = 2.0 * PI * t / seconds.max(3.0);
                let w_walk = (0.5 + 0.5 * u.cos()).powi(2);
                let w_squat = (0.5 - 0.5 * u.cos()).powi(2);
                let w_wave = 1.0 - w_walk - w_squat;
                walked += w_walk * 1.2 * style.rate * dt;
                let mut k = Tracks::blend(&[
                    (w_walk, walk(t, &style)),
                    (w_wave, wave(t, &style)),
                    (w_squat, squat(t, &style)),
                ]);
                let planted = plant_feet(skel, k.pose(), &ankle_anchor(skel, &anchor));
                k.root = planted.p_root;
                k.root.z += walked;
                k.pose()
            }
        };
        poses.push(pose);
    }
    Ok(PoseSequence::new(SYNTH_FPS, poses))
}

fn ankle_anchor(skel: &Skeleton, ground: &Vector3<f64>) -> Vector3<f64> {
    let g = forward_kinematics(skel, &Tracks::standing().pose());
    let ankle = (g.positions[7] + g.positions[8]) * 0.5;
    let lowest = g
        .positions
        .iter()
        .map(|p| p.dot(&skel.up_axis))
        .fold(f64::INFINITY, f64::min);
    Vector3::new(0.0, ground.y + ankle.y - lowest, 0.0)
}

/// Jitter a sequence with zero-mean Gaussian noise of std `sigma` meters on
/// every bone tip, applied as the local joint rotation that moves the tip
/// perpendicular to the bone. Root placement and leaf joints are untouched.
pub fn perturb_motion(skel: &Skeleton, seq: &PoseSequence, sigma: f64, seed: u64) -> PoseSequence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // first child of every joint, giving the bone that its rotation swings
    let bones: Vec<Option<Vector3<f64>>> = (0..skel.joints.len())
        .map(|j| {
            skel.joints
                .iter()
                .find(|c| c.parent == Some(j))
                .map(|c| c.offset)
                .filter(|b| b.norm() > 1e-9)
        })
        .collect();
    let mut out = seq.clone();
    for pose in &mut out.poses {
        for (j, bone) in bones.iter().enumerate().skip(1) {
            let Some(b) = bone else { continue };
            let n = Vector3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal)) * sigma;
            let w = b.cross(&n) / b.norm_squared();
            *pose.local_mut(j) = pose.local(j).mul(&Rot3::exp(&w));
        }
        pose.enforce_leaves();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::save_motion;
    use crate::rotmath::geodesic_rad;

    #[test]
    fn walk_has_expected_length_and_is_deterministic() {
        let skel = Skeleton::smpl_default();
        let a = gen_synthetic_motion(MotionKind::Walk, 2.0, 7, &skel).unwrap();
        let b = gen_synthetic_motion(MotionKind::Walk, 2.0, 7, &skel).unwrap();
        assert_eq!(a.len(), 120);
        assert_eq!(a, b);
        let dir = tempfile::tempdir().unwrap();
        save_motion(&a, dir.path().join("a.json")).unwrap();
        save_motion(&b, dir.path().join("b.json")).unwrap();
        assert_eq!(
            std::fs::read(dir.path().join("a.json")).unwrap(),
            std::fs::read(dir.path().join("b.json")).unwrap()
        );
        let c = gen_synthetic_motion(MotionKind::Walk, 2.0, 8, &skel).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn unknown_kind() {
        assert!(matches!(
            "dance".parse::<MotionKind>(),
            Err(MotionError::UnknownKind(_))
        ));
    }

    #[test]
    fn angular_velocities_are_mild() {
        let skel = Skeleton::smpl_default();
        for kind in ["walk", "wave", "squat", "mixed", "stand", "climb"] {
            let seq = gen_synthetic_motion(kind.parse().unwrap(), 4.0, 3, &skel).unwrap();
            for w in seq.poses.windows(2) {
                for j in 0..NUM_JOINTS {
                    let omega = geodesic_rad(w[0].local(j), w[1].local(j)) * seq.fps;
                    assert!(omega < 10.0, "{kind} joint {j}: {omega}");
                }
                w[1].validate(1e-9).unwrap();
            }
        }
    }

    #[test]
    fn stand_is_static() {
        let skel = Skeleton::smpl_default();
        let seq = gen_synthetic_motion(MotionKind::Stand, 1.0, 1, &skel).unwrap();
        assert!(seq.poses.iter().all(|p| *p == seq.poses[0]));
    }
}
