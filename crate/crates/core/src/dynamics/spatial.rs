//! Minimal 6-D spatial algebra about the world origin.

use std::ops::{Add, Mul};

use nalgebra::{Matrix3, Vector3};

use crate::rotmath::skew;

/// Spatial vector `[w; v]`: a motion (angular velocity, origin velocity)
/// or a force (moment about origin, force).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sv {
    pub w: Vector3<f64>,
    pub v: Vector3<f64>,
}

impl Sv {
    pub fn new(w: Vector3<f64>, v: Vector3<f64>) -> Self {
        Sv { w, v }
    }

    pub fn zero() -> Self {
        Sv::new(Vector3::zeros(), Vector3::zeros())
    }

    /// Motion cross product `self x m`.
    pub fn cross_motion(&self, m: &Sv) -> Sv {
        Sv::new(self.w.cross(&m.w), self.w.cross(&m.v) + self.v.cross(&m.w))
    }

    /// Force cross product `self x* f`.
    pub fn cross_force(&self, f: &Sv) -> Sv {
        Sv::new(self.w.cross(&f.w) + self.v.cross(&f.v), self.w.cross(&f.v))
    }

    /// Pairing of a motion (self) with a force.
    pub fn dot(&self, f: &Sv) -> f64 {
        self.w.dot(&f.w) + self.v.dot(&f.v)
    }
}

impl Add for Sv {
    type Output = Sv;
    fn add(self, o: Sv) -> Sv {
        Sv::new(self.w + o.w, self.v + o.v)
    }
}

impl Mul<f64> for Sv {
    type Output = Sv;
    fn mul(self, s: f64) -> Sv {
        Sv::new(self.w * s, self.v * s)
    }
}

/// Spatial inertia about the world origin, stored as mass, first moment
/// `m c` and rotational inertia about the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct Inertia {
    mass: f64,
    moment: Vector3<f64>,
    rot: Matrix3<f64>,
}

impl Inertia {
    pub fn zero() -> Self {
        Inertia {
            mass: 0.0,
            moment: Vector3::zeros(),
            rot: Matrix3::zeros(),
        }
    }

    /// Body of mass `m` with center `c` and inertia `ic` about `c`.
    pub fn new(m: f64, c: Vector3<f64>, ic: Matrix3<f64>) -> Self {
        let cx = skew(&c);
        Inertia {
            mass: m,
            moment: c * m,
            rot: ic - cx * cx * m,
        }
    }

    pub fn add_assign(&mut self, o: &Inertia) {
        self.mass += o.mass;
        self.moment += o.moment;
        self.rot += o.rot;
    }

    /// Momentum of motion `m`.
    pub fn mul(&self, m: &Sv) -> Sv {
        Sv::new(
            self.rot * m.w + self.moment.cross(&m.v),
            m.v * self.mass - self.moment.cross(&m.w),
        )
    }
}
