//! Per-frame physical optimization of a reference motion.
//!
//! Every frame solves one QP over `x = [qdd (75); lambda (69); tau (75)]`:
//! track PD-controller accelerations toward the next reference frame,
//! keep reaction forces small (more so near the root) and torques small,
//! subject to the equation of motion, the stationary-support bound
//! `|pdot_i . lambda_i| <= delta` and a friction pyramid around world up.
//! The state is then advanced with semi-implicit Euler.

mod sim;

pub use sim::{optimize_sequence, step, CheckSummary, FrameStatus, FrameTrace, OptTrace, Simulation};

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{DynError, DynState, DynTerms, RigidBodyModel, NDOF, NFORCE};
use crate::motion::MotionError;
use crate::qp::{CscMatrix, QpError, QpProblem};
use crate::rotmath::wrap_angle;

/// Number of QP decision variables.
pub const NVAR: usize = NDOF + NFORCE + NDOF;
/// Inequality rows: two support rows and four friction rows per joint.
pub const NINEQ: usize = 2 * NFORCE;

#[derive(Debug, Error)]
pub enum PhysError {
    #[error("dynamics: {0}")]
    Dyn(#[from] DynError),
    #[error("motion: {0}")]
    Motion(#[from] MotionError),
    #[error("qp: {0}")]
    Qp(#[from] QpError),
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("reference runs at {fps} fps but the time step is {dt} s")]
    FrameRate { fps: f64, dt: f64 },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PdGains {
    pub kp_theta: f64,
    pub kd_theta: f64,
    pub kp_pos: f64,
    pub kd_pos: f64,
}

impl Default for PdGains {
    fn default() -> Self {
        PdGains {
            kp_theta: 1800.0,
            kd_theta: 60.0,
            kp_pos: 2400.0,
            kd_pos: 60.0,
        }
    }
}

impl PdGains {
    pub fn validate(&self) -> Result<(), PhysError> {
        if [self.kp_theta, self.kd_theta, self.kp_pos, self.kd_pos]
            .iter()
            .all(|g| *g > 0.0 && g.is_finite())
        {
            Ok(())
        } else {
            Err(PhysError::Params("PD gains must be positive".into()))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhysParams {
    pub k_lambda: f64,
    pub k_root: f64,
    pub k_joint: f64,
    /// Stationary-support bound on `|pdot . lambda|` per joint.
    pub delta: f64,
    pub mu: f64,
    pub dt: f64,
    /// Floor on the root distance in the force penalty, meters.
    pub d_min: f64,
    pub ridge: f64,
    pub qp_tol: f64,
    pub qp_max_iter: usize,
}

impl Default for PhysParams {
    fn default() -> Self {
        PhysParams {
            k_lambda: 0.02,
            k_root: 0.05,
            k_joint: 0.02,
            delta: 10.0,
            mu: 0.6,
            dt: 1.0 / 60.0,
            d_min: 0.01,
            ridge: 1e-9,
            qp_tol: 1e-8,
            qp_max_iter: 200,
        }
    }
}

impl PhysParams {
    pub fn validate(&self) -> Result<(), PhysError> {
        let pos = [self.k_lambda, self.k_root, self.k_joint, self.delta, self.mu, self.dt, self.d_min, self.qp_tol];
        if !pos.iter().all(|v| *v > 0.0 && v.is_finite()) {
            return Err(PhysError::Params(
                "weights, delta, mu, dt, d_min and qp_tol must be positive".into(),
            ));
        }
        if !(self.ridge >= 0.0) || self.qp_max_iter == 0 {
            return Err(PhysError::Params("ridge must be >= 0 and qp_max_iter > 0".into()));
        }
        Ok(())
    }
}

/// `kp (theta_ref - theta_cur) - kd thetadot`, differences wrapped per component.
pub fn desired_rot_acc(
    gains: &PdGains,
    theta_ref: &DVector<f64>,
    theta_cur: &DVector<f64>,
    theta_dot: &DVector<f64>,
) -> DVector<f64> {
    DVector::from_fn(theta_ref.len(), |i, _| {
        gains.kp_theta * wrap_angle(theta_ref[i] - theta_cur[i]) - gains.kd_theta * theta_dot[i]
    })
}

/// `kp (pdot_ref dt) - kd pdot_cur`.
pub fn desired_pos_acc(gains: &PdGains, dt: f64, pdot_ref: &DVector<f64>, pdot_cur: &DVector<f64>) -> DVector<f64> {
    pdot_ref * (gains.kp_pos * dt) - pdot_cur * gains.kd_pos
}

/// Index of the world axis closest to `up`, and the two remaining axes.
pub(crate) fn axis_frame(up: &Vector3<f64>) -> (usize, usize, usize) {
    let u = up.iamax();
    let rest: Vec<usize> = (0..3).filter(|&k| k != u).collect();
    (u, rest[0], rest[1])
}

/// Root distance of every non-root joint, floored at `d_min`.
pub fn root_distances(terms: &DynTerms, d_min: f64) -> Vec<f64> {
    let root = terms.positions[0];
    terms.positions[1..].iter().map(|p| (p - root).norm().max(d_min)).collect()
}

/// Build the frame QP at `state`.
pub fn assemble(
    model: &RigidBodyModel,
    state: &DynState,
    theta_ref: &DVector<f64>,
    pdot_ref: &DVector<f64>,
    params: &PhysParams,
    gains: &PdGains,
) -> Result<QpProblem, PhysError> {
    let terms = model.terms(&state.q, &state.qd)?;
    build_problem(model, &terms, state, theta_ref, pdot_ref, params, gains)
}

pub(crate) fn build_problem(
    model: &RigidBodyModel,
    terms: &DynTerms,
    state: &DynState,
    theta_ref: &DVector<f64>,
    pdot_ref: &DVector<f64>,
    params: &PhysParams,
    gains: &PdGains,
) -> Result<QpProblem, PhysError> {
    let n = model.ndof();
    if n != NDOF || terms.jacobian.nrows() != NFORCE {
        return Err(PhysError::Params("optimizer needs the 24-joint floating-base model".into()));
    }
    let nt = n - 3;
    if theta_ref.len() != nt || pdot_ref.len() != NFORCE {
        return Err(PhysError::Params(format!(
            "reference sizes {} / {} (expected {nt} / {NFORCE})",
            theta_ref.len(),
            pdot_ref.len()
        )));
    }
    let (lo, to) = (n, n + NFORCE);
    let jac = &terms.jacobian;

    let theta_cur = state.q.rows(3, nt).into_owned();
    let theta_dot = state.qd.rows(3, nt).into_owned();
    let th_des = desired_rot_acc(gains, theta_ref, &theta_cur, &theta_dot);
    let p_des = desired_pos_acc(gains, params.dt, pdot_ref, &terms.joint_velocities);

    // objective
    let mut p = DMatrix::<f64>::zeros(NVAR, NVAR);
    let mut c = DVector::<f64>::zeros(NVAR);
    p.view_mut((0, 0), (n, n)).copy_from(&(jac.tr_mul(jac) * 2.0));
    let pos_off = &terms.jdot_qdot - &p_des;
    c.rows_mut(0, n).copy_from(&(jac.tr_mul(&pos_off) * 2.0));
    for i in 0..nt {
        p[(3 + i, 3 + i)] += 2.0;
        c[3 + i] -= 2.0 * th_des[i];
    }
    for (i, d) in root_distances(terms, params.d_min).iter().enumerate() {
        let w = 2.0 * params.k_lambda / (d * d);
        for k in 0..3 {
            p[(lo + 3 * i + k, lo + 3 * i + k)] += w;
        }
    }
    for i in 0..n {
        let k = if i < 6 { params.k_root } else { params.k_joint };
        p[(to + i, to + i)] += 2.0 * k;
    }
    for i in 0..NVAR {
        p[(i, i)] += 2.0 * params.ridge;
    }

    // M qdd - J^T lambda - tau = -h
    let mut a = Vec::new();
    for r in 0..n {
        for col in 0..n {
            let v = terms.mass[(r, col)];
            if v != 0.0 {
                a.push((r, col, v));
            }
        }
        for k in 0..NFORCE {
            let v = jac[(k, r)];
            if v != 0.0 {
                a.push((r, lo + k, -v));
            }
        }
        a.push((r, to + r, -1.0));
    }
    let b = -&terms.bias;

    let (u, t1, t2) = axis_frame(&model.up);
    let mut g = Vec::new();
    let mut h = DVector::zeros(NINEQ);
    for i in 0..NFORCE / 3 {
        let row = 6 * i;
        let col = lo + 3 * i;
        for k in 0..3 {
            let v = terms.joint_velocities[3 * i + k];
            if v != 0.0 {
                g.push((row, col + k, v));
                g.push((row + 1, col + k, -v));
            }
        }
        h[row] = params.delta;
        h[row + 1] = params.delta;
        for (j, t) in [t1, t2].into_iter().enumerate() {
            let r = row + 2 + 2 * j;
            g.push((r, col + t, 1.0));
            g.push((r, col + u, -params.mu));
            g.push((r + 1, col + t, -1.0));
            g.push((r + 1, col + u, -params.mu));
        }
    }

    Ok(QpProblem {
        p: CscMatrix::from_dense(&p),
        c,
        a: CscMatrix::from_triplets(n, NVAR, &a),
        b,
        g: CscMatrix::from_triplets(NINEQ, NVAR, &g),
        h,
    })
}
