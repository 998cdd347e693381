use std::path::Path;

use nalgebra::DVector;
use serde::Serialize;

use super::{axis_frame, build_problem, PdGains, PhysError, PhysParams};
use crate::dynamics::{DynState, DynTerms, RigidBodyModel, NFORCE};
use crate::motion::{Pose, PoseSequence};
use crate::qp::{solve, KktResiduals, QpSettings, QpStatus, WarmStart};
use crate::rotmath::wrap_angle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameStatus {
    /// Copied from the reference (first frame).
    Reference,
    Optimal,
    /// The QP failed; the reference pose was copied instead.
    Fallback,
}

#[derive(Debug, Clone, Serialize)]
pub struct FrameTrace {
    pub frame: usize,
    pub status: FrameStatus,
    pub qp_status: Option<QpStatus>,
    pub qp_iterations: usize,
    pub residuals: KktResiduals,
    /// `|M qdd - tau - J^T lambda + h|_inf`
    pub eom_residual: f64,
    /// Largest `|pdot_i . lambda_i|`.
    pub support_power: f64,
    /// Largest `|lambda_t| - mu lambda_up` over joints and tangents.
    pub friction_excess: f64,
    pub min_up_force: f64,
    /// Bodies whose reference rotation hit the singular Euler chart.
    pub gimbal: Vec<usize>,
    #[serde(skip)]
    pub qdd: DVector<f64>,
    #[serde(skip)]
    pub lambda: DVector<f64>,
    #[serde(skip)]
    pub tau: DVector<f64>,
}

impl FrameTrace {
    fn empty(frame: usize, status: FrameStatus, ndof: usize) -> Self {
        FrameTrace {
            frame,
            status,
            qp_status: None,
            qp_iterations: 0,
            residuals: KktResiduals::default(),
            eom_residual: 0.0,
            support_power: 0.0,
            friction_excess: 0.0,
            min_up_force: 0.0,
            gimbal: Vec::new(),
            qdd: DVector::zeros(ndof),
            lambda: DVector::zeros(NFORCE),
            tau: DVector::zeros(ndof),
        }
    }

    /// Sum of the reaction forces along `axis`.
    pub fn total_force(&self, axis: usize) -> f64 {
        (0..NFORCE / 3).map(|i| self.lambda[3 * i + axis]).sum()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OptTrace {
    /// Skeleton joint index of each reaction-force block.
    pub joints: Vec<usize>,
    pub up_axis: usize,
    pub frames: Vec<FrameTrace>,
}

/// Worst post-check values over the optimal frames of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CheckSummary {
    pub frames: usize,
    pub optimal: usize,
    pub fallback: usize,
    pub eom_residual: f64,
    pub support_power: f64,
    pub friction_excess: f64,
}

impl CheckSummary {
    /// EOM residual and friction excess below `tol`, support power at most `delta + tol`.
    pub fn passes(&self, delta: f64, tol: f64) -> bool {
        self.eom_residual < tol && self.support_power <= delta + tol && self.friction_excess <= tol
    }
}

impl OptTrace {
    pub fn summary(&self) -> CheckSummary {
        CheckSummary {
            frames: self.frames.len(),
            optimal: self.count(FrameStatus::Optimal),
            fallback: self.count(FrameStatus::Fallback),
            eom_residual: self.max_optimal(|f| f.eom_residual),
            support_power: self.max_optimal(|f| f.support_power),
            friction_excess: self.max_optimal(|f| f.friction_excess),
        }
    }

    pub fn count(&self, status: FrameStatus) -> usize {
        self.frames.iter().filter(|f| f.status == status).count()
    }

    /// Largest value of `f` over optimal frames.
    pub fn max_optimal(&self, f: impl Fn(&FrameTrace) -> f64) -> f64 {
        self.frames
            .iter()
            .filter(|t| t.status == FrameStatus::Optimal)
            .map(f)
            .fold(0.0, f64::max)
    }

    /// Reaction force on a skeleton joint at one frame.
    pub fn force(&self, frame: usize, joint: usize) -> Option<[f64; 3]> {
        let k = self.joints.iter().position(|&j| j == joint)?;
        let l = &self.frames.get(frame)?.lambda;
        Some([l[3 * k], l[3 * k + 1], l[3 * k + 2]])
    }

    /// CSV with header `frame,joint,fx,fy,fz`.
    pub fn write_forces_csv(&self, path: impl AsRef<Path>) -> Result<(), PhysError> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["frame", "joint", "fx", "fy", "fz"])?;
        for f in &self.frames {
            for (k, j) in self.joints.iter().enumerate() {
                w.serialize((f.frame, j, f.lambda[3 * k], f.lambda[3 * k + 1], f.lambda[3 * k + 2]))?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// CSV with header `frame,dof,tau`.
    pub fn write_torques_csv(&self, path: impl AsRef<Path>) -> Result<(), PhysError> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["frame", "dof", "tau"])?;
        for f in &self.frames {
            for (d, t) in f.tau.iter().enumerate() {
                w.serialize((f.frame, d, t))?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Reference configuration with every Euler block moved to whichever of
/// its two equivalent triples lies closer to `q_cur`.
pub(super) fn nearest_chart(model: &RigidBodyModel, q_ref: &DVector<f64>, q_cur: &DVector<f64>) -> DVector<f64> {
    let mut out = q_ref.clone();
    for k in 0..model.bodies.len() {
        let r = model.euler_range(k);
        let s = r.start;
        let e = [q_ref[s], q_ref[s + 1], q_ref[s + 2]];
        let alt = [wrap_angle(e[0] + std::f64::consts::PI), wrap_angle(std::f64::consts::PI - e[1]), wrap_angle(e[2] + std::f64::consts::PI)];
        let dist = |v: &[f64; 3]| (0..3).map(|i| wrap_angle(v[i] - q_cur[s + i]).powi(2)).sum::<f64>();
        if dist(&alt) < dist(&e) {
            for i in 0..3 {
                out[s + i] = alt[i];
            }
        }
    }
    out
}

fn checks(trace: &mut FrameTrace, terms: &DynTerms, mu: f64, up: (usize, usize, usize)) {
    let eom = &terms.mass * &trace.qdd + &terms.bias - &trace.tau - terms.jacobian.tr_mul(&trace.lambda);
    trace.eom_residual = eom.amax();
    let (u, t1, t2) = up;
    let mut power = 0.0f64;
    let mut excess = f64::NEG_INFINITY;
    let mut min_up = f64::INFINITY;
    for i in 0..NFORCE / 3 {
        let l = trace.lambda.fixed_rows::<3>(3 * i);
        let v = terms.joint_velocities.fixed_rows::<3>(3 * i);
        power = power.max(v.dot(&l).abs());
        excess = excess.max(l[t1].abs() - mu * l[u]).max(l[t2].abs() - mu * l[u]);
        min_up = min_up.min(l[u]);
    }
    trace.support_power = power;
    trace.friction_excess = excess;
    trace.min_up_force = min_up;
}

/// Stepping state for one sequence, carrying the previous QP solution as
/// a warm start.
pub struct Simulation<'m> {
    model: &'m RigidBodyModel,
    params: PhysParams,
    gains: PdGains,
    pub state: DynState,
    warm: Option<WarmStart>,
    frame: usize,
}

impl<'m> Simulation<'m> {
    pub fn new(model: &'m RigidBodyModel, state: DynState, params: PhysParams, gains: PdGains) -> Result<Self, PhysError> {
        params.validate()?;
        gains.validate()?;
        Ok(Simulation {
            model,
            params,
            gains,
            state,
            warm: None,
            frame: 0,
        })
    }

    /// Advance one time step toward `ref_next`.
    pub fn advance(&mut self, ref_next: &Pose) -> Result<FrameTrace, PhysError> {
        self.frame += 1;
        let model = self.model;
        let p = &self.params;
        let dt = p.dt;
        let n = model.ndof();
        let terms = model.terms(&self.state.q, &self.state.qd)?;
        let (q_raw, gimbal) = model.pose_to_q(ref_next)?;
        let q_ref = nearest_chart(model, &q_raw, &self.state.q);
        let p_ref = model.joint_positions(&q_ref);
        let mut pdot_ref = DVector::zeros(NFORCE);
        for b in 1..p_ref.len() {
            let v = (p_ref[b] - terms.positions[b]) / dt;
            pdot_ref.fixed_rows_mut::<3>(3 * (b - 1)).copy_from(&v);
        }
        let theta_ref = q_ref.rows(3, n - 3).into_owned();
        let prob = build_problem(model, &terms, &self.state, &theta_ref, &pdot_ref, p, &self.gains)?;
        let settings = QpSettings {
            eps_abs: p.qp_tol,
            max_iter: p.qp_max_iter,
            warm_start: self.warm.take(),
            ..QpSettings::default()
        };
        let sol = solve(&prob, &settings).ok();

        let mut trace = FrameTrace::empty(self.frame, FrameStatus::Fallback, n);
        trace.gimbal = gimbal;
        if let Some(s) = &sol {
            trace.qp_status = Some(s.status);
            trace.qp_iterations = s.iterations;
            trace.residuals = s.residuals;
        }
        match sol {
            Some(s) if s.status == QpStatus::Optimal => {
                trace.status = FrameStatus::Optimal;
                trace.qdd = s.x.rows(0, n).into_owned();
                trace.lambda = s.x.rows(n, NFORCE).into_owned();
                trace.tau = s.x.rows(n + NFORCE, n).into_owned();
                self.warm = Some(s.warm_start());
                self.state.qd += &trace.qdd * dt;
                self.state.q += &self.state.qd * dt;
                model.wrap_angles(&mut self.state.q);
            }
            _ => {
                let mut qd = DVector::zeros(n);
                for i in 0..n {
                    let d = q_ref[i] - self.state.q[i];
                    qd[i] = if i < 3 { d } else { wrap_angle(d) } / dt;
                }
                trace.qdd = (&qd - &self.state.qd) / dt;
                self.state = DynState { q: q_ref, qd };
            }
        }
        if trace.status == FrameStatus::Optimal {
            checks(&mut trace, &terms, p.mu, axis_frame(&model.up));
        }
        Ok(trace)
    }
}

/// One cold-started step from `state` toward `ref_next`.
pub fn step(
    model: &RigidBodyModel,
    state: &DynState,
    ref_next: &Pose,
    params: &PhysParams,
    gains: &PdGains,
) -> Result<(DynState, FrameTrace), PhysError> {
    let mut sim = Simulation::new(model, state.clone(), params.clone(), gains.clone())?;
    let trace = sim.advance(ref_next)?;
    Ok((sim.state, trace))
}

/// Simulate a whole reference sequence. Frame 0 is copied; the initial
/// velocity comes from frames 0 and 1.
pub fn optimize_sequence(
    model: &RigidBodyModel,
    reference: &PoseSequence,
    params: &PhysParams,
    gains: &PdGains,
) -> Result<(PoseSequence, OptTrace), PhysError> {
    reference.require_len(2)?;
    if ((reference.fps * params.dt) - 1.0).abs() > 1e-6 {
        return Err(PhysError::FrameRate {
            fps: reference.fps,
            dt: params.dt,
        });
    }
    let (q0, gimbal0) = model.pose_to_q(&reference.poses[0])?;
    let (s1, _) = model.pose_to_state(&reference.poses[1], &reference.poses[0], reference.fps)?;
    let state = DynState { q: q0, qd: s1.qd };
    let mut sim = Simulation::new(model, state, params.clone(), gains.clone())?;

    let mut poses = Vec::with_capacity(reference.len());
    poses.push(reference.poses[0].clone());
    let mut first = FrameTrace::empty(0, FrameStatus::Reference, model.ndof());
    first.gimbal = gimbal0;
    let mut frames = vec![first];
    for pose in &reference.poses[1..] {
        let t = sim.advance(pose)?;
        log::debug!("frame {} {:?} iters {}", t.frame, t.status, t.qp_iterations);
        frames.push(t);
        poses.push(model.state_to_pose(&sim.state.q)?);
    }
    let out = PoseSequence {
        fps: reference.fps,
        skeleton: reference.skeleton.clone(),
        poses,
    };
    let trace = OptTrace {
        joints: model.order[1..].to_vec(),
        up_axis: axis_frame(&model.up).0,
        frames,
    };
    Ok((out, trace))
}
