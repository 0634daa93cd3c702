//! Intrinsic Euler decomposition about signed coordinate axes.

use std::f64::consts::PI;

use crate::geometry::{wrap_angle, Rot3, Vec3};

/// Below this `|cos b|` (distinct axes) or `|sin b|` (repeated axis) the
/// decomposition is treated as gimbal locked.
pub(crate) const GIMBAL_TOL: f64 = 1e-6;

/// A coordinate axis `sign * e_index`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct SignedAxis {
    pub index: usize,
    pub sign: f64,
}

impl SignedAxis {
    /// Matches `v` against `+-x`, `+-y`, `+-z` to within `tol`.
    pub fn from_vec(v: &Vec3, tol: f64) -> Option<Self> {
        (0..3).find_map(|index| {
            let mut e = Vec3::zeros();
            e[index] = 1.0;
            if (v - e).norm() < tol {
                Some(SignedAxis { index, sign: 1.0 })
            } else if (v + e).norm() < tol {
                Some(SignedAxis { index, sign: -1.0 })
            } else {
                None
            }
        })
    }

    pub fn letter(&self) -> char {
        ['X', 'Y', 'Z'][self.index]
    }
}

/// Both angle triples `(a, b, c)` with `m = R(ax0, a) R(ax1, b) R(ax2, c)`,
/// or `None` at gimbal lock or when consecutive axes coincide.
pub(crate) fn decompose(m: &Rot3, axes: [SignedAxis; 3]) -> Option<[[f64; 3]; 2]> {
    let (i, j, l) = (axes[0].index, axes[1].index, axes[2].index);
    if i == j || j == l {
        return None;
    }
    let k = 3 - i - j;
    let s = if j == (i + 1) % 3 { 1.0 } else { -1.0 };
    let r = |row: usize, col: usize| m[(row, col)];

    let (first, second) = if l == i {
        // Proper Euler, e.g. X-Y-X.
        let sb = r(i, j).hypot(r(i, k));
        if sb < GIMBAL_TOL {
            return None;
        }
        let b = sb.atan2(r(i, i));
        let a = r(j, i).atan2(-s * r(k, i));
        let c = r(i, j).atan2(s * r(i, k));
        ([a, b, c], [a + PI, -b, c + PI])
    } else {
        // Tait-Bryan, e.g. X-Y-Z.
        let cb = r(i, i).hypot(r(i, j));
        if cb < GIMBAL_TOL {
            return None;
        }
        let b = (s * r(i, k)).atan2(cb);
        let a = (-s * r(j, k)).atan2(r(k, k));
        let c = (-s * r(i, j)).atan2(r(i, i));
        ([a, b, c], [a + PI, PI - b, c + PI])
    };

    let signed = |t: [f64; 3]| {
        [
            wrap_angle(axes[0].sign * t[0]),
            wrap_angle(axes[1].sign * t[1]),
            wrap_angle(axes[2].sign * t[2]),
        ]
    };
    Some([signed(first), signed(second)])
}
