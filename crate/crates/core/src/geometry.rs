//! 3-D vectors, rotation matrices and coordinate frames.
//!
//! Vectors and rotations are plain `nalgebra` types; the functions here add
//! the handful of constructions the retargeting pipeline needs on top:
//! Rodrigues' formula, a robust axis-angle extraction, frame building from
//! three keypoints and rigid point transformation between frames.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Rot3 = Matrix3<f64>;

/// Tolerance below which a norm, cross product or projection is treated as
/// vanishing.
pub const EPS_DEG: f64 = 1e-9;

/// Tolerance used when checking that a matrix is a proper rotation.
pub const ROT_TOL: f64 = 1e-9;

/// Skew-symmetric matrix such that `hat(a) * b == a.cross(&b)`.
#[inline]
pub fn hat(v: &Vec3) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`hat`] applied to the skew part of `m`.
#[inline]
pub fn vee(m: &Matrix3<f64>) -> Vec3 {
    Vec3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    )
}

pub fn normalize(v: &Vec3) -> Result<Vec3> {
    let n = v.norm();
    if !(n > EPS_DEG) || !n.is_finite() {
        return Err(Error::ZeroVector(n));
    }
    Ok(v / n)
}

/// Rotation by `angle` about the unit axis `h`.
///
/// Fails when `h` is not unit length to within `1e-9`.
pub fn rodrigues(h: &Vec3, angle: f64) -> Result<Rot3> {
    let n = h.norm();
    if !((n - 1.0).abs() <= 1e-9) {
        return Err(Error::DegenerateAxis(n));
    }
    Ok(rotation_about(h, angle))
}

/// Unchecked Rodrigues rotation; `h` must already be a unit vector.
///
/// `1 - cos(a)` is evaluated as `2 sin^2(a/2)` so small angles keep full
/// relative precision.
#[inline]
pub fn rotation_about(h: &Vec3, angle: f64) -> Rot3 {
    debug_assert!((h.norm() - 1.0).abs() < 1e-6, "axis not unit: {h:?}");
    let k = hat(h);
    let half = (0.5 * angle).sin();
    Rot3::identity() + k * angle.sin() + (k * k) * (2.0 * half * half)
}

/// Rotates `v` about unit axis `h` without forming the matrix.
#[inline]
pub fn rotate_vector(h: &Vec3, angle: f64, v: &Vec3) -> Vec3 {
    let (s, c) = angle.sin_cos();
    v * c + h.cross(v) * s + h * (h.dot(v) * (1.0 - c))
}

/// Wraps an angle into `(-pi, pi]`.
#[inline]
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// True when `r` is orthonormal with determinant +1 (both to [`ROT_TOL`]).
pub fn is_rotation(r: &Rot3) -> bool {
    let ortho = (r.transpose() * r - Rot3::identity()).norm();
    ortho < ROT_TOL && (r.determinant() - 1.0).abs() < ROT_TOL
}

/// Extracts `(axis, angle)` with `angle` in `[0, pi]`.
///
/// The angle comes from `atan2` of the skew and symmetric parts, which keeps
/// precision near both 0 and pi. At exactly pi the axis sign is arbitrary;
/// at exactly 0 the axis is `+x`.
pub fn axis_angle(r: &Rot3) -> (Vec3, f64) {
    let w = vee(r);
    let s = w.norm();
    let c = 0.5 * (r.trace() - 1.0);
    let angle = s.atan2(c);
    if s == 0.0 && c >= 0.0 {
        return (Vec3::x(), 0.0);
    }
    if angle < 0.5 * PI {
        return (w / s, angle);
    }
    // Near pi the skew part is tiny; recover the axis from the symmetric part
    // instead: (R + R^T)/2 = cos(a) I + (1 - cos(a)) k k^T.
    let sym = (r + r.transpose()) * 0.5 - Rot3::identity() * c;
    let mut best = 0;
    for i in 1..3 {
        if sym[(i, i)] > sym[(best, best)] {
            best = i;
        }
    }
    let mut axis = sym.column(best).into_owned();
    let n = axis.norm();
    if n == 0.0 {
        return (Vec3::x(), angle);
    }
    axis /= n;
    if axis.dot(&w) < 0.0 {
        axis = -axis;
    }
    (axis, angle)
}

/// Re-orthonormalizes a nearly-orthonormal matrix (Gram-Schmidt on columns
/// 1 and 2, column 3 from their cross product).
pub fn orthonormalize(r: &Rot3) -> Rot3 {
    let x = r.column(0).normalize();
    let y0 = r.column(1).into_owned();
    let y = (y0 - x * x.dot(&y0)).normalize();
    let z = x.cross(&y);
    Rot3::from_columns(&[x, y, z])
}

/// A coordinate frame: orientation and origin relative to a shared parent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub orientation: Rot3,
    pub origin: Vec3,
}

impl Default for Frame {
    fn default() -> Self {
        Self::identity()
    }
}

impl Frame {
    pub fn new(orientation: Rot3, origin: Vec3) -> Self {
        Self {
            orientation,
            origin,
        }
    }

    pub fn identity() -> Self {
        Self::new(Rot3::identity(), Vec3::zeros())
    }

    /// Parent-frame coordinates of a point given in this frame.
    #[inline]
    pub fn to_parent(&self, local: &Vec3) -> Vec3 {
        self.orientation * local + self.origin
    }

    /// This frame's coordinates of a point given in the parent frame.
    #[inline]
    pub fn from_parent(&self, parent: &Vec3) -> Vec3 {
        self.orientation.transpose() * (parent - self.origin)
    }

    pub fn is_valid(&self) -> bool {
        is_rotation(&self.orientation) && self.origin.iter().all(|v| v.is_finite())
    }
}

/// Re-expresses a point given in `frame_a` in `frame_b`, both frames being
/// described relative to the same parent.
pub fn transform_point(v_a: &Vec3, frame_a: &Frame, frame_b: &Frame) -> Vec3 {
    frame_b.from_parent(&frame_a.to_parent(v_a))
}

/// Builds a frame from left, right and bottom keypoints.
///
/// The origin is the left/right midpoint, `y` points right-to-left, `x` is
/// `y` crossed with the bottom-to-origin direction and `z = x * y`. For a
/// torso this gives the front/left/up convention.
pub fn make_frame(k_lt: &Vec3, k_rt: &Vec3, k_b: &Vec3) -> Result<Frame> {
    let area = 0.5 * (k_lt - k_b).cross(&(k_rt - k_b)).norm();
    if !(area > EPS_DEG) {
        return Err(Error::DegenerateFrame(area));
    }
    let origin = 0.5 * (k_lt + k_rt);
    let u_y = normalize(&(k_lt - k_rt))?;
    let u_x = normalize(&u_y.cross(&(origin - k_b)))?;
    let u_z = u_x.cross(&u_y);
    Ok(Frame::new(Rot3::from_columns(&[u_x, u_y, u_z]), origin))
}
