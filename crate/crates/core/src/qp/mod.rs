//! Convex quadratic programs
//!
//! ```text
//! minimize    1/2 x'Px + c'x
//! subject to  Ax = b,  Gx <= h
//! ```
//!
//! solved with a proximal augmented Lagrangian method. Matrices are stored
//! in compressed sparse column form; see [`solve`].

mod solver;
mod sparse;

pub use solver::solve;
pub use sparse::CscMatrix;

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DVector;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("dimension mismatch: {0}")]
    Dim(String),
    #[error("P is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("non-finite problem data in {0}")]
    NonFinite(&'static str),
    #[error("P is not positive semidefinite")]
    NotConvex,
    #[error("invalid settings: {0}")]
    Settings(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub p: CscMatrix,
    pub c: DVector<f64>,
    pub a: CscMatrix,
    pub b: DVector<f64>,
    pub g: CscMatrix,
    pub h: DVector<f64>,
}

impl QpProblem {
    pub fn n(&self) -> usize {
        self.c.len()
    }

    pub fn n_eq(&self) -> usize {
        self.b.len()
    }

    pub fn n_ineq(&self) -> usize {
        self.h.len()
    }

    pub fn validate(&self) -> Result<(), QpError> {
        let n = self.n();
        let dim = |what: &str, got: (usize, usize), want: (usize, usize)| {
            if got != want {
                Err(QpError::Dim(format!("{what} is {got:?}, expected {want:?}")))
            } else {
                Ok(())
            }
        };
        dim("P", self.p.shape(), (n, n))?;
        dim("A", self.a.shape(), (self.n_eq(), n))?;
        dim("G", self.g.shape(), (self.n_ineq(), n))?;
        for (name, ok) in [
            ("P", self.p.values().iter().all(|v| v.is_finite())),
            ("c", self.c.iter().all(|v| v.is_finite())),
            ("A", self.a.values().iter().all(|v| v.is_finite())),
            ("b", self.b.iter().all(|v| v.is_finite())),
            ("G", self.g.values().iter().all(|v| v.is_finite())),
            ("h", self.h.iter().all(|v| v.is_finite())),
        ] {
            if !ok {
                return Err(QpError::NonFinite(name));
            }
        }
        let asym = self.p.asymmetry();
        if asym > 1e-12 * self.p.max_abs().max(1.0) {
            return Err(QpError::NotSymmetric(asym));
        }
        Ok(())
    }

    /// Write every block in matrix-market coordinate/array form, one after
    /// another, each preceded by a `%%block <name>` line.
    pub fn dump(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let mut s = String::from("% quadratic program: min 1/2 x'Px + c'x, Ax = b, Gx <= h\n");
        for (name, m) in [("P", &self.p), ("A", &self.a), ("G", &self.g)] {
            let _ = writeln!(s, "%%block {name}");
            s.push_str("%%MatrixMarket matrix coordinate real general\n");
            let (r, c) = m.shape();
            let _ = writeln!(s, "{r} {c} {}", m.nnz());
            for (i, j, v) in m.triplets() {
                let _ = writeln!(s, "{} {} {v:e}", i + 1, j + 1);
            }
        }
        for (name, v) in [("c", &self.c), ("b", &self.b), ("h", &self.h)] {
            let _ = writeln!(s, "%%block {name}");
            s.push_str("%%MatrixMarket matrix array real general\n");
            let _ = writeln!(s, "{} 1", v.len());
            for x in v.iter() {
                let _ = writeln!(s, "{x:e}");
            }
        }
        std::fs::write(path, s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WarmStart {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub z: DVector<f64>,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSettings {
    /// Absolute tolerance on every KKT residual.
    pub eps_abs: f64,
    /// Relative tolerance, scaled by the magnitude of the terms in each residual.
    pub eps_rel: f64,
    pub max_iter: usize,
    pub rho_init: f64,
    pub rho_growth: f64,
    pub rho_max: f64,
    /// Proximal weight on the distance to the previous outer iterate.
    pub eps_prox: f64,
    /// Ruiz equilibration passes (0 disables scaling).
    pub scaling_iters: usize,
    pub max_newton: usize,
    pub warm_start: Option<WarmStart>,
}

impl Default for QpSettings {
    fn default() -> Self {
        QpSettings {
            eps_abs: 1e-8,
            eps_rel: 0.0,
            max_iter: 200,
            rho_init: 0.1,
            rho_growth: 10.0,
            rho_max: 1e7,
            eps_prox: 1e-9,
            scaling_iters: 10,
            max_newton: 50,
            warm_start: None,
        }
    }
}

impl QpSettings {
    pub fn validate(&self) -> Result<(), QpError> {
        if !(self.eps_abs > 0.0 && self.eps_rel >= 0.0) {
            return Err(QpError::Settings("tolerances must be positive".into()));
        }
        if !(self.rho_init > 0.0 && self.rho_growth > 1.0 && self.rho_max >= self.rho_init) {
            return Err(QpError::Settings("penalty schedule is inconsistent".into()));
        }
        if !(self.eps_prox > 0.0) || self.max_iter == 0 || self.max_newton == 0 {
            return Err(QpError::Settings("eps_prox and iteration limits must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QpStatus {
    Optimal,
    MaxIter,
    /// The penalty reached its cap without restoring feasibility.
    InfeasibleIsh,
}

/// Infinity norms of the KKT conditions.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct KktResiduals {
    /// `Px + c + A'y + G'z`
    pub stationarity: f64,
    /// `Ax - b`
    pub eq_feasibility: f64,
    /// `max(Gx - h, 0)`
    pub ineq_feasibility: f64,
    /// `min(z, h - Gx)` together with any negative `z`
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.eq_feasibility)
            .max(self.ineq_feasibility)
            .max(self.complementarity)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: DVector<f64>,
    /// Equality multipliers.
    pub y: DVector<f64>,
    /// Inequality multipliers (non-negative).
    pub z: DVector<f64>,
    pub status: QpStatus,
    pub iterations: usize,
    pub newton_steps: usize,
    pub rho: f64,
    pub residuals: KktResiduals,
}

impl QpSolution {
    pub fn warm_start(&self) -> WarmStart {
        WarmStart {
            x: self.x.clone(),
            y: self.y.clone(),
            z: self.z.clone(),
            rho: self.rho,
        }
    }
}

/// Recompute all KKT residuals of `(x, y, z)` from the problem data.
pub fn kkt_residuals(p: &QpProblem, x: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>) -> KktResiduals {
    let stat = p.p.mul_vec(x) + &p.c + p.a.tr_mul_vec(y) + p.g.tr_mul_vec(z);
    let eq = p.a.mul_vec(x) - &p.b;
    let gx = p.g.mul_vec(x);
    let mut ineq = 0.0f64;
    let mut comp = 0.0f64;
    for i in 0..p.n_ineq() {
        let slack = p.h[i] - gx[i];
        ineq = ineq.max(-slack);
        comp = comp.max(z[i].min(slack).abs()).max(-z[i]);
    }
    KktResiduals {
        stationarity: stat.amax(),
        eq_feasibility: if eq.is_empty() { 0.0 } else { eq.amax() },
        ineq_feasibility: ineq.max(0.0),
        complementarity: comp,
    }
}
