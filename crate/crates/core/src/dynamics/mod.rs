//! Articulated rigid-body dynamics for the floating-base skeleton.
//!
//! Every joint is expanded into single-DoF links: a floating joint is three
//! world-axis translations followed by intrinsic X-Y-Z rotations, a
//! spherical joint is the three rotations, and a revolute joint is one
//! rotation about a fixed axis. All spatial quantities are expressed in the
//! world frame about the world origin, as `[angular; linear]` pairs.
//!
//! Conventions: `q` is `[p_root, theta]` with Euler angles in radians,
//! `M(q) qdd + h(q, qd) = tau + J^T lambda`, and gravity acts along `-up`.

mod spatial;
mod state;

pub use state::{DynState, GimbalFlags};

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use thiserror::Error;

use crate::motion::{Skeleton, NUM_JOINTS};
use crate::rotmath::Rot3;
use spatial::Sv;

pub const GRAVITY: f64 = 9.81;
/// Generalized coordinates of the 24-joint skeleton: `3 + 3 * 24`.
pub const NDOF: usize = 3 + 3 * NUM_JOINTS;
/// Stacked reaction-force / Jacobian rows of the 23 non-root joints.
pub const NFORCE: usize = 3 * (NUM_JOINTS - 1);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynError {
    #[error("invalid joint order: {0}")]
    Order(String),
    #[error("invalid model: {0}")]
    Model(String),
    #[error("state has {got} coordinates, model expects {expected}")]
    Dim { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum JointKind {
    /// Three world translations then X-Y-Z Euler rotations.
    Floating,
    /// X-Y-Z Euler rotations.
    Spherical,
    /// One rotation about a unit axis given in the parent frame.
    Revolute(Vector3<f64>),
}

impl JointKind {
    pub fn dofs(&self) -> usize {
        match self {
            JointKind::Floating => 6,
            JointKind::Spherical => 3,
            JointKind::Revolute(_) => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Body {
    pub name: String,
    pub parent: Option<usize>,
    /// Joint position in the parent body frame.
    pub offset: Vector3<f64>,
    pub kind: JointKind,
    pub mass: f64,
    /// Center of mass in the body frame.
    pub com: Vector3<f64>,
    /// Rotational inertia about the com in the body frame.
    pub inertia: Matrix3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RigidBodyModel {
    pub bodies: Vec<Body>,
    /// Gravity acceleration vector (world frame).
    pub gravity: Vector3<f64>,
    pub up: Vector3<f64>,
    /// `order[k]` is the skeleton joint simulated as body `k`.
    pub order: Vec<usize>,
    dof_start: Vec<usize>,
    dof_parent: Vec<Option<usize>>,
    /// Body owning each DoF.
    dof_body: Vec<usize>,
    ndof: usize,
}

/// World-frame kinematic quantities for one configuration.
#[derive(Debug, Clone)]
pub struct Kinematics {
    /// Joint origin of each body.
    pub positions: Vec<Vector3<f64>>,
    pub rotations: Vec<Matrix3<f64>>,
    /// Motion subspace of each DoF.
    axes: Vec<Sv>,
}

impl RigidBodyModel {
    /// General constructor; bodies must list parents before children.
    pub fn new(bodies: Vec<Body>, gravity: Vector3<f64>, up: Vector3<f64>) -> Result<Self, DynError> {
        if bodies.is_empty() {
            return Err(DynError::Model("no bodies".into()));
        }
        let mut dof_start = Vec::with_capacity(bodies.len());
        let mut dof_parent = Vec::new();
        let mut dof_body = Vec::new();
        let mut last_dof: Vec<usize> = Vec::with_capacity(bodies.len());
        for (b, body) in bodies.iter().enumerate() {
            if let Some(p) = body.parent {
                if p >= b {
                    return Err(DynError::Model(format!(
                        "body {b} ({}) lists parent {p} after itself",
                        body.name
                    )));
                }
            }
            if let JointKind::Revolute(a) = &body.kind {
                if (a.norm() - 1.0).abs() > 1e-9 {
                    return Err(DynError::Model(format!("body {b}: revolute axis not unit")));
                }
            }
            let start = dof_parent.len();
            dof_start.push(start);
            for k in 0..body.kind.dofs() {
                dof_parent.push(if k > 0 {
                    Some(start + k - 1)
                } else {
                    body.parent.map(|p| last_dof[p])
                });
                dof_body.push(b);
            }
            last_dof.push(dof_parent.len() - 1);
        }
        let ndof = dof_parent.len();
        Ok(RigidBodyModel {
            order: (0..bodies.len()).collect(),
            bodies,
            gravity,
            up: up.normalize(),
            dof_start,
            dof_parent,
            dof_body,
            ndof,
        })
    }

    /// The floating-base model of a skeleton with the identity joint order.
    pub fn from_skeleton(skel: &Skeleton) -> Result<Self, DynError> {
        Self::with_order(skel, (0..skel.joints.len()).collect())
    }

    /// Build with an explicit joint order: `order[k]` is the skeleton joint
    /// simulated as body `k`. It must be a permutation with `order[0] = 0`
    /// that places every parent before its children.
    pub fn with_order(skel: &Skeleton, order: Vec<usize>) -> Result<Self, DynError> {
        let n = skel.joints.len();
        if order.len() != n || order.first() != Some(&0) {
            return Err(DynError::Order("must have one entry per joint and start at 0".into()));
        }
        let mut inv = vec![usize::MAX; n];
        for (k, &j) in order.iter().enumerate() {
            if j >= n || inv[j] != usize::MAX {
                return Err(DynError::Order(format!("entry {k} ({j}) repeats or is out of range")));
            }
            inv[j] = k;
        }
        let mut bodies = Vec::with_capacity(n);
        for (k, &j) in order.iter().enumerate() {
            let joint = &skel.joints[j];
            let parent = joint.parent.map(|p| inv[p]);
            if let Some(p) = parent {
                if p >= k {
                    return Err(DynError::Order(format!(
                        "joint {j} would be simulated before its parent"
                    )));
                }
            }
            bodies.push(Body {
                name: joint.name.clone(),
                parent,
                offset: joint.offset,
                kind: if k == 0 {
                    JointKind::Floating
                } else {
                    JointKind::Spherical
                },
                mass: joint.mass,
                com: joint.com,
                inertia: joint.inertia_matrix(),
            });
        }
        let up = skel.up_axis.normalize();
        let mut m = Self::new(bodies, -GRAVITY * up, up)?;
        m.order = order;
        Ok(m)
    }

    pub fn ndof(&self) -> usize {
        self.ndof
    }

    pub fn total_mass(&self) -> f64 {
        self.bodies.iter().map(|b| b.mass).sum()
    }

    /// First generalized coordinate of body `b`.
    pub fn dof_start(&self, b: usize) -> usize {
        self.dof_start[b]
    }

    fn check(&self, v: &DVector<f64>) -> Result<(), DynError> {
        if v.len() != self.ndof {
            return Err(DynError::Dim {
                expected: self.ndof,
                got: v.len(),
            });
        }
        Ok(())
    }

    pub fn kinematics(&self, q: &DVector<f64>) -> Kinematics {
        assert_eq!(q.len(), self.ndof, "configuration size");
        let nb = self.bodies.len();
        let mut positions = Vec::with_capacity(nb);
        let mut rotations: Vec<Matrix3<f64>> = Vec::with_capacity(nb);
        let mut axes = Vec::with_capacity(self.ndof);
        for (b, body) in self.bodies.iter().enumerate() {
            let (mut r, mut p) = match body.parent {
                Some(pb) => (rotations[pb], positions[pb] + rotations[pb] * body.offset),
                None => (Matrix3::identity(), body.offset),
            };
            let s = self.dof_start[b];
            let rot_axis = |r: &Matrix3<f64>, local: Vector3<f64>, p: &Vector3<f64>| {
                let a = r * local;
                Sv::new(a, p.cross(&a))
            };
            match &body.kind {
                JointKind::Floating => {
                    for (k, e) in [Vector3::x(), Vector3::y(), Vector3::z()].iter().enumerate() {
                        axes.push(Sv::new(Vector3::zeros(), *e));
                        p += e * q[s + k];
                    }
                    for (k, e) in [Vector3::x(), Vector3::y(), Vector3::z()].iter().enumerate() {
                        axes.push(rot_axis(&r, *e, &p));
                        r *= Rot3::from_axis_angle(e, q[s + 3 + k]).0;
                    }
                }
                JointKind::Spherical => {
                    for (k, e) in [Vector3::x(), Vector3::y(), Vector3::z()].iter().enumerate() {
                        axes.push(rot_axis(&r, *e, &p));
                        r *= Rot3::from_axis_angle(e, q[s + k]).0;
                    }
                }
                JointKind::Revolute(a) => {
                    axes.push(rot_axis(&r, *a, &p));
                    r *= Rot3::from_axis_angle(a, q[s]).0;
                }
            }
            positions.push(p);
            rotations.push(r);
        }
        Kinematics {
            positions,
            rotations,
            axes,
        }
    }

    /// Spatial inertia of each body about the world origin.
    fn world_inertias(&self, kin: &Kinematics) -> Vec<spatial::Inertia> {
        self.bodies
            .iter()
            .enumerate()
            .map(|(b, body)| {
                let r = kin.rotations[b];
                let c = kin.positions[b] + r * body.com;
                spatial::Inertia::new(body.mass, c, r * body.inertia * r.transpose())
            })
            .collect()
    }

    fn is_body_link(&self, i: usize) -> bool {
        let b = self.dof_body[i];
        i + 1 == self.dof_start[b] + self.bodies[b].kind.dofs()
    }

    /// Recursive Newton-Euler: generalized forces producing `qdd`.
    pub fn inverse_dynamics(
        &self,
        q: &DVector<f64>,
        qd: &DVector<f64>,
        qdd: &DVector<f64>,
    ) -> Result<DVector<f64>, DynError> {
        self.check(q)?;
        self.check(qd)?;
        self.check(qdd)?;
        let kin = self.kinematics(q);
        Ok(self.rnea(&kin, qd, Some(qdd), true))
    }

    fn rnea(
        &self,
        kin: &Kinematics,
        qd: &DVector<f64>,
        qdd: Option<&DVector<f64>>,
        gravity: bool,
    ) -> DVector<f64> {
        let n = self.ndof;
        let inertias = self.world_inertias(kin);
        let a0 = if gravity {
            Sv::new(Vector3::zeros(), -self.gravity)
        } else {
            Sv::zero()
        };
        let mut v = vec![Sv::zero(); n];
        let mut a = vec![Sv::zero(); n];
        let mut f = vec![Sv::zero(); n];
        for i in 0..n {
            let (vp, ap) = match self.dof_parent[i] {
                Some(p) => (v[p], a[p]),
                None => (Sv::zero(), a0),
            };
            let s = kin.axes[i];
            v[i] = vp + s * qd[i];
            let acc = qdd.map_or(0.0, |x| x[i]);
            a[i] = ap + s * acc + v[i].cross_motion(&s) * qd[i];
            if self.is_body_link(i) {
                let inertia = &inertias[self.dof_body[i]];
                f[i] = inertia.mul(&a[i]) + v[i].cross_force(&inertia.mul(&v[i]));
            }
        }
        let mut tau = DVector::zeros(n);
        for i in (0..n).rev() {
            tau[i] = kin.axes[i].dot(&f[i]);
            if let Some(p) = self.dof_parent[i] {
                let fi = f[i];
                f[p] = f[p] + fi;
            }
        }
        tau
    }

    /// `h(q, qd)`: gravity, Coriolis and centrifugal generalized forces.
    pub fn nonlinear_effects(&self, q: &DVector<f64>, qd: &DVector<f64>) -> Result<DVector<f64>, DynError> {
        self.check(q)?;
        self.check(qd)?;
        let kin = self.kinematics(q);
        Ok(self.rnea(&kin, qd, None, true))
    }

    /// Composite-rigid-body mass matrix.
    pub fn mass_matrix(&self, q: &DVector<f64>) -> Result<DMatrix<f64>, DynError> {
        self.check(q)?;
        Ok(self.crba(&self.kinematics(q)))
    }

    fn crba(&self, kin: &Kinematics) -> DMatrix<f64> {
        let n = self.ndof;
        let inertias = self.world_inertias(kin);
        let mut ic = vec![spatial::Inertia::zero(); n];
        for i in 0..n {
            if self.is_body_link(i) {
                ic[i] = inertias[self.dof_body[i]].clone();
            }
        }
        for i in (0..n).rev() {
            if let Some(p) = self.dof_parent[i] {
                let c = ic[i].clone();
                ic[p].add_assign(&c);
            }
        }
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            let fi = ic[i].mul(&kin.axes[i]);
            let mut j = Some(i);
            while let Some(jj) = j {
                let val = kin.axes[jj].dot(&fi);
                m[(i, jj)] = val;
                m[(jj, i)] = val;
                j = self.dof_parent[jj];
            }
        }
        m
    }

    /// Joint origins of all bodies (body 0 is the root).
    pub fn joint_positions(&self, q: &DVector<f64>) -> Vec<Vector3<f64>> {
        self.kinematics(q).positions
    }

    /// Stacked 3 x ndof positional Jacobians of bodies `1..`.
    pub fn joint_jacobians(&self, q: &DVector<f64>) -> Result<DMatrix<f64>, DynError> {
        self.check(q)?;
        Ok(self.jacobians(&self.kinematics(q)))
    }

    fn jacobians(&self, kin: &Kinematics) -> DMatrix<f64> {
        let nb = self.bodies.len();
        let mut jac = DMatrix::zeros(3 * (nb - 1), self.ndof);
        for b in 1..nb {
            let p = kin.positions[b];
            let mut i = self.dof_parent[self.dof_start[b]];
            while let Some(ii) = i {
                let s = kin.axes[ii];
                let col = s.v + s.w.cross(&p);
                jac.fixed_view_mut::<3, 1>(3 * (b - 1), ii).copy_from(&col);
                i = self.dof_parent[ii];
            }
        }
        jac
    }

    /// Bias acceleration `Jdot * qd` of the non-root joint origins.
    pub fn jdot_qdot(&self, q: &DVector<f64>, qd: &DVector<f64>) -> Result<DVector<f64>, DynError> {
        self.check(q)?;
        self.check(qd)?;
        Ok(self.bias_accelerations(&self.kinematics(q), qd))
    }

    fn bias_accelerations(&self, kin: &Kinematics, qd: &DVector<f64>) -> DVector<f64> {
        let n = self.ndof;
        let mut v = vec![Sv::zero(); n];
        let mut a = vec![Sv::zero(); n];
        for i in 0..n {
            let (vp, ap) = match self.dof_parent[i] {
                Some(p) => (v[p], a[p]),
                None => (Sv::zero(), Sv::zero()),
            };
            let s = kin.axes[i];
            v[i] = vp + s * qd[i];
            a[i] = ap + v[i].cross_motion(&s) * qd[i];
        }
        let nb = self.bodies.len();
        let mut out = DVector::zeros(3 * (nb - 1));
        for b in 1..nb {
            // the joint origin rides on the parent link
            let Some(l) = self.dof_parent[self.dof_start[b]] else {
                continue;
            };
            let p = kin.positions[b];
            let (vl, al) = (v[l], a[l]);
            let vp = vl.v + vl.w.cross(&p);
            let acc = al.v + al.w.cross(&p) + vl.w.cross(&vp);
            out.fixed_rows_mut::<3>(3 * (b - 1)).copy_from(&acc);
        }
        out
    }

    /// World velocities of the non-root joint origins, stacked.
    pub fn joint_velocities(&self, q: &DVector<f64>, qd: &DVector<f64>) -> Result<DVector<f64>, DynError> {
        Ok(self.joint_jacobians(q)? * qd)
    }

    /// Everything the per-frame optimizer needs, from one kinematics pass.
    pub fn terms(&self, q: &DVector<f64>, qd: &DVector<f64>) -> Result<DynTerms, DynError> {
        self.check(q)?;
        self.check(qd)?;
        let kin = self.kinematics(q);
        let jac = self.jacobians(&kin);
        let pdot = &jac * qd;
        Ok(DynTerms {
            mass: self.crba(&kin),
            bias: self.rnea(&kin, qd, None, true),
            jdot_qdot: self.bias_accelerations(&kin, qd),
            jacobian: jac,
            joint_velocities: pdot,
            positions: kin.positions,
        })
    }

    /// Kinetic plus potential energy (potential relative to the world origin).
    pub fn energy(&self, q: &DVector<f64>, qd: &DVector<f64>) -> Result<f64, DynError> {
        let m = self.mass_matrix(q)?;
        let kin = self.kinematics(q);
        let ke = 0.5 * qd.dot(&(&m * qd));
        let pe: f64 = self
            .bodies
            .iter()
            .enumerate()
            .map(|(b, body)| {
                let c = kin.positions[b] + kin.rotations[b] * body.com;
                -body.mass * self.gravity.dot(&c)
            })
            .sum();
        Ok(ke + pe)
    }
}

/// Dynamics terms at one state.
#[derive(Debug, Clone)]
pub struct DynTerms {
    pub mass: DMatrix<f64>,
    pub bias: DVector<f64>,
    pub jacobian: DMatrix<f64>,
    pub jdot_qdot: DVector<f64>,
    pub joint_velocities: DVector<f64>,
    /// Joint origins of all bodies (body 0 is the root).
    pub positions: Vec<Vector3<f64>>,
}

#[cfg(test)]
mod tests;
