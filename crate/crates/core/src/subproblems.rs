//! Closed-form canonical geometric subproblems.
//!
//! * [`sp1`]: rotate one vector about an axis to best align it with another.
//! * [`sp4`]: rotate a vector about an axis onto (or nearest to) a plane.
//! * [`sp2`]: rotate two vectors about two axes so they coincide, built from
//!   two [`sp4`] calls.
//!
//! Every solver returns least-squares optimal angles when no exact solution
//! exists. All returned angles are wrapped to `(-pi, pi]`.

use crate::error::{Error, Result};
use crate::geometry::{normalize, rotate_vector, wrap_angle, Vec3, EPS_DEG};

/// Residual below which a reconstructed solution counts as exact.
pub const EXACT_TOL: f64 = 1e-9;

/// Roots closer than this are reported once.
pub const MERGE_TOL: f64 = 1e-7;

/// Angles returned by a subproblem solver.
///
/// `exact` is true when every returned solution satisfies the geometric
/// constraint to [`EXACT_TOL`]; otherwise the solutions are least-squares
/// optimizers.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleSolutionSet<T> {
    pub solutions: Vec<T>,
    pub exact: bool,
}

impl<T> AngleSolutionSet<T> {
    pub fn len(&self) -> usize {
        self.solutions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solutions.is_empty()
    }
}

/// Angle `theta` minimizing `|R(k, theta) p1 - p2|`.
///
/// Both vectors are projected onto the plane perpendicular to `k`; fails if
/// either projection vanishes.
pub fn sp1(p1: &Vec3, p2: &Vec3, k: &Vec3) -> Result<f64> {
    let a = p1 - k * k.dot(p1);
    let b = p2 - k * k.dot(p2);
    let (na, nb) = (a.norm(), b.norm());
    if !(na > EPS_DEG && nb > EPS_DEG) {
        return Err(Error::DegenerateProjection);
    }
    let (a, b) = (a / na, b / nb);
    let mut theta = 2.0 * (a - b).norm().atan2((a + b).norm());
    if k.dot(&a.cross(&b)) < 0.0 {
        theta = -theta;
    }
    Ok(wrap_angle(theta))
}

/// Angles minimizing `|h^T R(k, theta) p - d|`.
///
/// Writing `R(k, theta) = k k^T + sin(theta) [k] - cos(theta) [k]^2` turns the
/// constraint into `A [sin, cos]^T = b` with `A` a 1x2 row. When the circle
/// traced by `p` crosses the plane (`|A|^2 > b^2`) the two intersections are
/// returned; otherwise the single least-squares angle.
pub fn sp4(p: &Vec3, h: &Vec3, k: &Vec3, d: f64) -> AngleSolutionSet<f64> {
    let kxp = k.cross(p);
    let kxkxp = k.cross(&kxp);
    let a1 = h.dot(&kxp);
    let a2 = -h.dot(&kxkxp);
    let b = d - h.dot(k) * k.dot(p);
    let a_sq = a1 * a1 + a2 * a2;

    let residual = |theta: f64| (h.dot(&rotate_vector(k, theta, p)) - d).abs();

    if a_sq.sqrt() <= 1e-14 * p.norm().max(1.0) {
        // Rotation cannot move p relative to the plane.
        return AngleSolutionSet {
            solutions: vec![0.0],
            exact: b.abs() < EXACT_TOL,
        };
    }

    let solutions = if a_sq > b * b {
        // x = A^+ b offset along the nullspace [a2, -a1] onto the unit
        // circle; both terms share the 1/|A|^2 scale, which atan2 ignores.
        let z = (a_sq - b * b).sqrt();
        let plus = wrap_angle((b * a1 + z * a2).atan2(b * a2 - z * a1));
        let minus = wrap_angle((b * a1 - z * a2).atan2(b * a2 + z * a1));
        if wrap_angle(plus - minus).abs() < MERGE_TOL {
            vec![wrap_angle((b * a1).atan2(b * a2))]
        } else {
            vec![plus, minus]
        }
    } else {
        vec![wrap_angle((b * a1).atan2(b * a2))]
    };
    let exact = solutions.iter().all(|&t| residual(t) < EXACT_TOL);
    AngleSolutionSet { solutions, exact }
}

/// Angle pairs minimizing `|R(k1, t1) p1 - R(k2, t2) p2|` over unit-normalized
/// `p1`, `p2`.
///
/// `t1` is found by putting `R(k1, t1) p1` on the plane `k2^T x = k2^T p2`
/// (the plane holding the circle of `p2` about `k2`) and `t2` symmetrically.
/// When both calls return two roots they are matched into the two
/// intersection points of the circles; the matching with the smaller
/// residual is kept. Otherwise every combination is scored by residual and
/// those within [`EXACT_TOL`] (or the single best) are returned.
pub fn sp2(p1: &Vec3, p2: &Vec3, k1: &Vec3, k2: &Vec3) -> Result<AngleSolutionSet<(f64, f64)>> {
    let p1 = normalize(p1)?;
    let p2 = normalize(p2)?;
    let first = sp4(&p1, k2, k1, k2.dot(&p2));
    let second = sp4(&p2, k1, k2, k1.dot(&p1));

    let residual = |a: f64, b: f64| (rotate_vector(k1, a, &p1) - rotate_vector(k2, b, &p2)).norm();

    let (t1, t2) = (&first.solutions, &second.solutions);
    let scored: Vec<((f64, f64), f64)> = if t1.len() == 2 && t2.len() == 2 {
        let crossed = [(t1[0], t2[1]), (t1[1], t2[0])];
        let straight = [(t1[0], t2[0]), (t1[1], t2[1])];
        let worst = |m: &[(f64, f64); 2]| {
            m.iter()
                .map(|&(a, b)| residual(a, b))
                .fold(0.0_f64, f64::max)
        };
        let pick = if worst(&crossed) <= worst(&straight) {
            crossed
        } else {
            straight
        };
        pick.iter()
            .map(|&(a, b)| ((a, b), residual(a, b)))
            .collect()
    } else {
        let mut all: Vec<_> = t1
            .iter()
            .flat_map(|&a| t2.iter().map(move |&b| (a, b)))
            .map(|(a, b)| ((a, b), residual(a, b)))
            .collect();
        all.sort_by(|x, y| x.1.total_cmp(&y.1));
        let keep = all.iter().filter(|s| s.1 < EXACT_TOL).count().max(1);
        all.truncate(keep);
        all
    };

    let exact = scored.iter().all(|s| s.1 < EXACT_TOL);
    Ok(AngleSolutionSet {
        solutions: scored.into_iter().map(|s| s.0).collect(),
        exact,
    })
}
