//! Rotation representations shared by every stage of the pipeline.
//!
//! Three forms are used:
//!
//! * [`Rot3`]: a proper 3x3 rotation matrix,
//! * [`SixD`]: the first two columns of a rotation matrix (the continuous
//!   representation consumed and produced by the VAE),
//! * [`Euler3`]: intrinsic X-Y-Z Euler angles, the generalized coordinates of
//!   the dynamics model. `R = Rx(a) * Ry(b) * Rz(c)`.
//!
//! Everything is `f64`.

use nalgebra::{Matrix3, Vector3};
use std::f64::consts::PI;
use thiserror::Error;

/// Cosine of the middle Euler angle below which the X-Y-Z chart is singular.
pub const GIMBAL_EPS: f64 = 1e-6;

const DEGENERATE_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RotError {
    #[error("degenerate 6D rotation: {0}")]
    Degenerate(&'static str),
    #[error("non-finite rotation input")]
    NonFinite,
}

/// A proper rotation matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rot3(pub Matrix3<f64>);

impl Default for Rot3 {
    fn default() -> Self {
        Self::identity()
    }
}

impl Rot3 {
    pub fn identity() -> Self {
        Rot3(Matrix3::identity())
    }

    pub fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Rot3(m)
    }

    /// Rotation of `angle` radians about `axis` (normalized internally).
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        let n = axis.norm();
        if n < DEGENERATE_EPS || angle == 0.0 {
            return Self::identity();
        }
        let k = axis / n;
        let kx = skew(&k);
        let (s, c) = angle.sin_cos();
        Rot3(Matrix3::identity() + kx * s + kx * kx * (1.0 - c))
    }

    pub fn rot_x(a: f64) -> Self {
        let (s, c) = a.sin_cos();
        Rot3(Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c))
    }

    pub fn rot_y(a: f64) -> Self {
        let (s, c) = a.sin_cos();
        Rot3(Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c))
    }

    pub fn rot_z(a: f64) -> Self {
        let (s, c) = a.sin_cos();
        Rot3(Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Rot3(self.0.transpose())
    }

    pub fn mul(&self, other: &Rot3) -> Rot3 {
        Rot3(self.0 * other.0)
    }

    pub fn apply(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0 * v
    }

    /// `max |RᵀR - I|` and `|det R - 1|`, the larger of the two.
    pub fn orthonormality_error(&self) -> f64 {
        let e = (self.0.transpose() * self.0 - Matrix3::identity()).abs().max();
        e.max((self.0.determinant() - 1.0).abs())
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        self.0.iter().all(|v| v.is_finite()) && self.orthonormality_error() <= tol
    }

    /// Rotation vector (axis * angle) of this rotation.
    pub fn log(&self) -> Vector3<f64> {
        let angle = geodesic_rad(&Rot3::identity(), self);
        let w = vee(&(self.0 - self.0.transpose())) * 0.5;
        let s = w.norm();
        if s < 1e-12 {
            if angle < 1e-6 {
                return w;
            }
            // near pi: axis from the symmetric part
            let b = (self.0 + Matrix3::identity()) * 0.5;
            let mut best = 0;
            for i in 1..3 {
                if b[(i, i)] > b[(best, best)] {
                    best = i;
                }
            }
            let axis = b.column(best).into_owned();
            return axis.normalize() * angle;
        }
        w * (angle / s)
    }

    pub fn exp(w: &Vector3<f64>) -> Self {
        Self::from_axis_angle(w, w.norm())
    }
}

/// First two columns of a rotation matrix, column-major:
/// `(R00, R10, R20, R01, R11, R21)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SixD(pub [f64; 6]);

impl SixD {
    pub fn identity() -> Self {
        SixD([1.0, 0.0, 0.0, 0.0, 1.0, 0.0])
    }

    pub fn from_slice(s: &[f64]) -> Self {
        let mut a = [0.0; 6];
        a.copy_from_slice(&s[..6]);
        SixD(a)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    fn cols(&self) -> (Vector3<f64>, Vector3<f64>) {
        let r = &self.0;
        (
            Vector3::new(r[0], r[1], r[2]),
            Vector3::new(r[3], r[4], r[5]),
        )
    }
}

/// Intrinsic X-Y-Z Euler angles in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Euler3(pub [f64; 3]);

impl Euler3 {
    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.0[0], self.0[1], self.0[2])
    }
}

/// Euler angles recovered from a matrix plus a flag raised when the chart
/// was singular and the third angle was zeroed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerDecomp {
    pub angles: Euler3,
    pub gimbal_lock: bool,
}

/// Gram-Schmidt projection of a 6D vector onto a rotation matrix.
pub fn sixd_to_rot(r: &SixD) -> Result<Rot3, RotError> {
    if r.0.iter().any(|v| !v.is_finite()) {
        return Err(RotError::NonFinite);
    }
    let (a, b) = r.cols();
    let na = a.norm();
    if na < DEGENERATE_EPS {
        return Err(RotError::Degenerate("first column has near-zero norm"));
    }
    let c1 = a / na;
    let b_perp = b - c1 * c1.dot(&b);
    let nb = b_perp.norm();
    if nb < DEGENERATE_EPS || nb < 1e-10 * b.norm() {
        return Err(RotError::Degenerate("columns are near-parallel"));
    }
    let c2 = b_perp / nb;
    let c3 = c1.cross(&c2);
    Ok(Rot3(Matrix3::from_columns(&[c1, c2, c3])))
}

pub fn rot_to_sixd(r: &Rot3) -> SixD {
    let m = &r.0;
    SixD([
        m[(0, 0)],
        m[(1, 0)],
        m[(2, 0)],
        m[(0, 1)],
        m[(1, 1)],
        m[(2, 1)],
    ])
}

pub fn renormalize_sixd(r: &SixD) -> Result<SixD, RotError> {
    sixd_to_rot(r).map(|m| rot_to_sixd(&m))
}

pub fn euler_to_rot(e: &Euler3) -> Rot3 {
    let [a, b, c] = e.0;
    Rot3::rot_x(a).mul(&Rot3::rot_y(b)).mul(&Rot3::rot_z(c))
}

/// Inverse of [`euler_to_rot`]. When `|cos b| < GIMBAL_EPS` the third angle
/// is set to zero and the flag is raised.
pub fn rot_to_euler(r: &Rot3) -> EulerDecomp {
    let m = &r.0;
    let sb = m[(0, 2)].clamp(-1.0, 1.0);
    let cb = (m[(0, 0)] * m[(0, 0)] + m[(0, 1)] * m[(0, 1)]).sqrt();
    let b = sb.atan2(cb);
    if cb < GIMBAL_EPS {
        let a = m[(2, 1)].atan2(m[(1, 1)]);
        return EulerDecomp {
            angles: Euler3([wrap_angle(a), b, 0.0]),
            gimbal_lock: true,
        };
    }
    let a = (-m[(1, 2)]).atan2(m[(2, 2)]);
    let c = (-m[(0, 1)]).atan2(m[(0, 0)]);
    EulerDecomp {
        angles: Euler3([wrap_angle(a), wrap_angle(b), wrap_angle(c)]),
        gimbal_lock: false,
    }
}

/// Geodesic distance between two rotations in radians, in `[0, pi]`.
pub fn geodesic_rad(ra: &Rot3, rb: &Rot3) -> f64 {
    let rel = ra.0.transpose() * rb.0;
    let cos = (rel.trace() - 1.0) * 0.5;
    let sin = vee(&(rel - rel.transpose())).norm() * 0.5;
    sin.atan2(cos).clamp(0.0, PI)
}

/// Geodesic distance in degrees, clamped to `[0, 180]`.
pub fn geodesic_deg(ra: &Rot3, rb: &Rot3) -> f64 {
    geodesic_rad(ra, rb).to_degrees().clamp(0.0, 180.0)
}

/// Wrap an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    if a > -PI && a <= PI {
        return a;
    }
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

pub fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_rot(rng: &mut ChaCha8Rng) -> Rot3 {
        let axis = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        Rot3::from_axis_angle(&axis, rng.random_range(0.0..PI))
    }

    #[test]
    fn sixd_identity_and_quarter_turn() {
        let r = sixd_to_rot(&SixD([1.0, 0.0, 0.0, 0.0, 1.0, 0.0])).unwrap();
        assert!((r.0 - Matrix3::identity()).abs().max() < 1e-15);
        let r = sixd_to_rot(&SixD([0.0, 1.0, 0.0, -1.0, 0.0, 0.0])).unwrap();
        assert!((r.0 - Rot3::rot_z(PI / 2.0).0).abs().max() < 1e-15);
    }

    #[test]
    fn sixd_skewed_input_is_orthonormalized() {
        let r = sixd_to_rot(&SixD([1.1, 0.01, 0.0, 0.2, 0.9, 0.0])).unwrap();
        let e = (r.0.transpose() * r.0 - Matrix3::identity()).abs().max();
        assert!(e < 1e-12, "{e}");
        assert!((r.0.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sixd_degenerate_inputs_error() {
        assert!(matches!(
            sixd_to_rot(&SixD([0.0; 6])),
            Err(RotError::Degenerate(_))
        ));
        assert!(matches!(
            sixd_to_rot(&SixD([1.0, 0.0, 0.0, 2.0, 0.0, 0.0])),
            Err(RotError::Degenerate(_))
        ));
        assert!(matches!(
            sixd_to_rot(&SixD([f64::NAN, 0.0, 0.0, 0.0, 1.0, 0.0])),
            Err(RotError::NonFinite)
        ));
    }

    #[test]
    fn rot_to_sixd_examples_and_round_trip() {
        assert_eq!(rot_to_sixd(&Rot3::identity()), SixD::identity());
        let q = rot_to_sixd(&Rot3::rot_z(PI / 2.0));
        let want = [0.0, 1.0, 0.0, -1.0, 0.0, 0.0];
        for (a, b) in q.0.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let r = random_rot(&mut rng);
            let back = sixd_to_rot(&rot_to_sixd(&r)).unwrap();
            assert!((back.0 - r.0).abs().max() < 1e-12);
        }
    }

    #[test]
    fn renormalize_examples() {
        let v = rot_to_sixd(&Rot3::rot_x(0.4));
        let n = renormalize_sixd(&v).unwrap();
        for (a, b) in n.0.iter().zip(v.0) {
            assert!((a - b).abs() < 1e-12);
        }
        let n = renormalize_sixd(&SixD([2.0, 0.0, 0.0, 0.0, 3.0, 0.0])).unwrap();
        assert_eq!(n, SixD::identity());
    }

    #[test]
    fn euler_examples() {
        let r = euler_to_rot(&Euler3([0.0, 0.0, 0.0]));
        assert!((r.0 - Matrix3::identity()).abs().max() < 1e-15);
        let r = euler_to_rot(&Euler3([PI / 2.0, 0.0, 0.0]));
        let z = r.apply(&Vector3::y());
        assert!((z - Vector3::z()).norm() < 1e-15);
    }

    #[test]
    fn euler_round_trip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let e = Euler3([
                rng.random_range(-PI..PI),
                rng.random_range(-1.4..1.4),
                rng.random_range(-PI..PI),
            ]);
            let d = rot_to_euler(&euler_to_rot(&e));
            assert!(!d.gimbal_lock);
            for i in 0..3 {
                assert!(
                    wrap_angle(d.angles.0[i] - e.0[i]).abs() < 1e-9,
                    "{e:?} {d:?}"
                );
            }
        }
    }

    #[test]
    fn euler_gimbal_lock_flags_and_zeroes_third_angle() {
        let e = Euler3([0.3, PI / 2.0, 0.2]);
        let r = euler_to_rot(&e);
        let d = rot_to_euler(&r);
        assert!(d.gimbal_lock);
        assert_eq!(d.angles.0[2], 0.0);
        // the fallback still represents the same rotation
        assert!(geodesic_deg(&euler_to_rot(&d.angles), &r) < 1e-6);
    }

    #[test]
    fn geodesic_examples() {
        let r = Rot3::rot_y(0.7);
        assert_eq!(geodesic_deg(&r, &r), 0.0);
        assert!((geodesic_deg(&Rot3::identity(), &Rot3::rot_z(PI / 2.0)) - 90.0).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let axis = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let d = geodesic_deg(&Rot3::identity(), &Rot3::from_axis_angle(&axis, 0.3));
        assert!((d - 0.3f64.to_degrees()).abs() < 1e-9);
    }

    #[test]
    fn log_exp_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let r = random_rot(&mut rng);
            let back = Rot3::exp(&r.log());
            assert!(geodesic_deg(&r, &back) < 1e-7);
        }
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
    }

    fn six() -> impl Strategy<Value = [f64; 6]> {
        prop::array::uniform6(-3.0f64..3.0)
    }

    proptest! {
        #[test]
        fn sixd_output_is_rotation(v in six()) {
            let s = SixD(v);
            if let Ok(r) = sixd_to_rot(&s) {
                prop_assert!(r.orthonormality_error() < 1e-9);
            }
        }

        #[test]
        fn renormalize_idempotent_and_scale_invariant(v in six(), s in 0.01f64..100.0) {
            if let Ok(n) = renormalize_sixd(&SixD(v)) {
                let nn = renormalize_sixd(&n).unwrap();
                for i in 0..6 { prop_assert!((n.0[i] - nn.0[i]).abs() < 1e-12); }
                let mut scaled = v;
                for x in scaled.iter_mut().take(3) { *x *= s; }
                let ns = renormalize_sixd(&SixD(scaled)).unwrap();
                for i in 0..6 { prop_assert!((n.0[i] - ns.0[i]).abs() < 1e-9); }
            }
        }

        #[test]
        fn geodesic_symmetric_and_triangle(a in six(), b in six(), c in six()) {
            let (Ok(ra), Ok(rb), Ok(rc)) = (sixd_to_rot(&SixD(a)), sixd_to_rot(&SixD(b)), sixd_to_rot(&SixD(c))) else {
                return Ok(());
            };
            let ab = geodesic_deg(&ra, &rb);
            prop_assert!((ab - geodesic_deg(&rb, &ra)).abs() < 1e-9);
            prop_assert!(geodesic_deg(&ra, &rc) <= ab + geodesic_deg(&rb, &rc) + 1e-9);
        }
    }
}
