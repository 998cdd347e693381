use nalgebra::{Matrix3, Vector3};

use super::MotionError;

pub const NUM_JOINTS: usize = 24;

/// Joints whose local rotation is always identity (feet and hands).
pub const LEAF_JOINTS: [usize; 4] = [10, 11, 22, 23];

/// The joints carried in a motion frame, ascending SMPL index: every joint
/// except the root and the four identity leaves.
pub const FRAME_JOINTS: [usize; 19] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 12, 13, 14, 15, 16, 17, 18, 19, 20, 21];

pub const SMPL_NAMES: [&str; NUM_JOINTS] = [
    "pelvis",
    "left_hip",
    "right_hip",
    "spine1",
    "left_knee",
    "right_knee",
    "spine2",
    "left_ankle",
    "right_ankle",
    "spine3",
    "left_foot",
    "right_foot",
    "neck",
    "left_collar",
    "right_collar",
    "head",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
    "left_hand",
    "right_hand",
];

pub const SMPL_PARENTS: [i32; NUM_JOINTS] = [
    -1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21,
];

pub const DEFAULT_SKELETON_NAME: &str = "smpl24";

// Approximate neutral SMPL rest joint locations (m), y up, facing +z.
const SMPL_REST: [[f64; 3]; NUM_JOINTS] = [
    [-0.0018, -0.2233, 0.0282],
    [0.0695, -0.3139, 0.0239],
    [-0.0677, -0.3144, 0.0214],
    [-0.0043, -0.1144, 0.0015],
    [0.1039, -0.6900, 0.0254],
    [-0.1072, -0.6960, 0.0215],
    [0.0027, 0.0209, 0.0026],
    [0.0885, -1.0983, -0.0178],
    [-0.0887, -1.1018, -0.0199],
    [0.0022, 0.0740, 0.0283],
    [0.1193, -1.1554, 0.1054],
    [-0.1193, -1.1547, 0.1106],
    [-0.0003, 0.2897, -0.0180],
    [0.0781, 0.2035, -0.0151],
    [-0.0812, 0.2020, -0.0174],
    [0.0050, 0.3778, 0.0335],
    [0.1722, 0.2285, -0.0193],
    [-0.1730, 0.2293, -0.0174],
    [0.4337, 0.2157, -0.0415],
    [-0.4330, 0.2148, -0.0442],
    [0.6908, 0.2241, -0.0424],
    [-0.6885, 0.2232, -0.0455],
    [0.7762, 0.2124, -0.0575],
    [-0.7780, 0.2131, -0.0572],
];

// Segment mass as a percentage of body mass; sums to 100.
const MASS_PERCENT: [f64; NUM_JOINTS] = [
    14.2, 10.0, 10.0, 10.0, 4.65, 4.65, 10.0, 1.2, 1.2, 11.5, 0.25, 0.25, 2.0, 2.0, 2.0, 6.1, 2.8,
    2.8, 1.6, 1.6, 0.45, 0.45, 0.15, 0.15,
];

// Cross-section edge of the box approximating each segment (m).
const SEGMENT_WIDTH: [f64; NUM_JOINTS] = [
    0.25, 0.12, 0.12, 0.25, 0.09, 0.09, 0.25, 0.08, 0.08, 0.25, 0.06, 0.06, 0.10, 0.08, 0.08,
    0.18, 0.08, 0.08, 0.07, 0.07, 0.06, 0.06, 0.05, 0.05,
];

const BODY_MASS: f64 = 70.0;
const INERTIA_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    pub name: String,
    /// Parent index, `None` for the root.
    pub parent: Option<usize>,
    /// Joint position in the parent frame at rest (m).
    pub offset: Vector3<f64>,
    pub mass: f64,
    /// Center of mass in the body frame (m).
    pub com: Vector3<f64>,
    /// Inertia about the com in the body frame: `[ixx, iyy, izz, ixy, ixz, iyz]`.
    pub inertia: [f64; 6],
}

impl Joint {
    pub fn inertia_matrix(&self) -> Matrix3<f64> {
        let [xx, yy, zz, xy, xz, yz] = self.inertia;
        Matrix3::new(xx, xy, xz, xy, yy, yz, xz, yz, zz)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    pub name: String,
    pub joints: Vec<Joint>,
    pub up_axis: Vector3<f64>,
}

impl Skeleton {
    /// The built-in 24-joint SMPL skeleton with a 70 kg anthropometric mass
    /// distribution.
    pub fn smpl_default() -> Self {
        let rest: Vec<Vector3<f64>> = SMPL_REST
            .iter()
            .map(|p| Vector3::new(p[0], p[1], p[2]))
            .collect();
        let mut joints = Vec::with_capacity(NUM_JOINTS);
        for i in 0..NUM_JOINTS {
            let parent = usize::try_from(SMPL_PARENTS[i]).ok();
            let offset = match parent {
                Some(p) => round_mm(rest[i] - rest[p]),
                None => Vector3::zeros(),
            };
            let children: Vec<usize> = (0..NUM_JOINTS)
                .filter(|&c| SMPL_PARENTS[c] == i as i32)
                .collect();
            let (com, length) = if children.is_empty() {
                // Leaf segment: extend a little along the incoming bone
                // (upward for the head).
                let dir = match i {
                    15 => Vector3::y(),
                    _ => offset.normalize(),
                };
                let len = if i == 15 { 0.2 } else { 0.08 };
                (dir * (0.5 * len), len)
            } else {
                let mean = children
                    .iter()
                    .map(|&c| round_mm(rest[c] - rest[i]))
                    .sum::<Vector3<f64>>()
                    / children.len() as f64;
                (mean * 0.5, mean.norm())
            };
            let mass = BODY_MASS * MASS_PERCENT[i] / 100.0;
            let inertia = box_inertia(mass, length, SEGMENT_WIDTH[i], &com);
            joints.push(Joint {
                name: SMPL_NAMES[i].to_string(),
                parent,
                offset,
                mass,
                com,
                inertia,
            });
        }
        Skeleton {
            name: DEFAULT_SKELETON_NAME.to_string(),
            joints,
            up_axis: Vector3::y(),
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.joints.iter().map(|j| j.mass).sum()
    }

    pub fn parent(&self, i: usize) -> Option<usize> {
        self.joints[i].parent
    }

    pub fn len(&self) -> usize {
        self.joints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }

    pub fn is_identity_leaf(i: usize) -> bool {
        LEAF_JOINTS.contains(&i)
    }

    /// Uniformly scale all lengths (offsets, com); masses unchanged.
    pub fn scaled(&self, s: f64) -> Skeleton {
        let mut out = self.clone();
        for j in &mut out.joints {
            j.offset *= s;
            j.com *= s;
            for v in j.inertia.iter_mut() {
                *v *= s * s;
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), MotionError> {
        if self.joints.len() != NUM_JOINTS {
            return Err(MotionError::Invalid(format!(
                "joint count: expected {NUM_JOINTS}, found {}",
                self.joints.len()
            )));
        }
        for (i, j) in self.joints.iter().enumerate() {
            match (i, j.parent) {
                (0, None) => {}
                (0, Some(_)) => {
                    return Err(MotionError::Invalid("joint 0 must be the root".into()))
                }
                (_, None) => {
                    return Err(MotionError::Invalid(format!(
                        "joint {i} ({}) has no parent; only joint 0 may be the root",
                        j.name
                    )))
                }
                (_, Some(p)) if p >= i => {
                    return Err(MotionError::Invalid(format!(
                        "joint {i} ({}): parent {p} is not topologically before it",
                        j.name
                    )))
                }
                _ => {}
            }
            if !(j.mass > 0.0 && j.mass.is_finite()) {
                return Err(MotionError::Invalid(format!(
                    "joint {i} ({}): mass must be positive",
                    j.name
                )));
            }
            let fin = j.offset.iter().chain(j.com.iter()).chain(j.inertia.iter());
            if fin.into_iter().any(|v| !v.is_finite()) {
                return Err(MotionError::Invalid(format!(
                    "joint {i} ({}): non-finite value",
                    j.name
                )));
            }
            if j.inertia_matrix().cholesky().is_none() {
                return Err(MotionError::Invalid(format!(
                    "joint {i} ({}): inertia is not positive definite",
                    j.name
                )));
            }
        }
        let n = self.up_axis.norm();
        if !((n - 1.0).abs() < 1e-9) {
            return Err(MotionError::Invalid("up_axis must be a unit vector".into()));
        }
        Ok(())
    }
}

fn round_mm(v: Vector3<f64>) -> Vector3<f64> {
    v.map(|x| (x * 1000.0).round() / 1000.0)
}

fn box_inertia(mass: f64, length: f64, width: f64, com: &Vector3<f64>) -> [f64; 6] {
    let along = mass * (2.0 * width * width) / 12.0;
    let perp = mass * (length * length + width * width) / 12.0;
    let dir = if com.norm() > 1e-9 {
        com.normalize()
    } else {
        Vector3::y()
    };
    let ddt = dir * dir.transpose();
    let m = (Matrix3::identity() - ddt) * perp
        + ddt * along
        + Matrix3::identity() * INERTIA_FLOOR;
    [
        m[(0, 0)],
        m[(1, 1)],
        m[(2, 2)],
        m[(0, 1)],
        m[(0, 2)],
        m[(1, 2)],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_skeleton_is_valid() {
        let s = Skeleton::smpl_default();
        s.validate().unwrap();
        assert!((s.total_mass() - 70.0).abs() < 1e-9);
        assert_eq!(s.joints[10].name, "left_foot");
        assert_eq!(FRAME_JOINTS.len(), 19);
        for j in FRAME_JOINTS {
            assert!(!LEAF_JOINTS.contains(&j) && j != 0);
        }
    }

    #[test]
    fn validation_rejects_bad_skeletons() {
        let mut s = Skeleton::smpl_default();
        s.joints.pop();
        let e = s.validate().unwrap_err().to_string();
        assert!(e.contains("joint count"), "{e}");

        let mut s = Skeleton::smpl_default();
        s.joints[4].parent = Some(7);
        assert!(s.validate().is_err());

        let mut s = Skeleton::smpl_default();
        s.joints[3].mass = 0.0;
        assert!(s.validate().is_err());

        let mut s = Skeleton::smpl_default();
        s.joints[3].inertia = [1.0, 1.0, -1.0, 0.0, 0.0, 0.0];
        assert!(s.validate().is_err());
    }
}
