//! Helpers shared by the integration tests and the acceptance suite:
//! random instances and brute-force oracles that share no code with the
//! solvers they check.

#![allow(dead_code)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sew_core::geometry::{rotation_about, wrap_angle};
use sew_core::model::Bimanual;
use sew_core::subproblems::{sp1, sp2, sp4};
use sew_core::{ArmPair, JointVector, RobotArmModel, Rot3, Side, Vec3};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn unit(rng: &mut impl Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

pub fn angle(rng: &mut impl Rng) -> f64 {
    rng.random_range(-PI..PI)
}

pub fn rotation(rng: &mut impl Rng) -> Rot3 {
    rotation_about(&unit(rng), angle(rng))
}

/// Wrapped angular distance.
pub fn ang_dist(a: f64, b: f64) -> f64 {
    wrap_angle(a - b).abs()
}

/// Uniform in-limit pose, with `|q6|` kept below `q6_max`.
pub fn random_q(model: &RobotArmModel, rng: &mut impl Rng, q6_max: f64) -> JointVector {
    let mut q = JointVector::zeros();
    for j in 0..7 {
        let (mut lo, mut hi) = model.limits(j + 1);
        if j == 5 {
            lo = lo.max(-q6_max);
            hi = hi.min(q6_max);
        }
        q[j] = rng.random_range(lo..hi);
    }
    q
}

pub fn random_pair_q(pair: &ArmPair, rng: &mut impl Rng) -> Bimanual<JointVector> {
    Bimanual::new(
        random_q(pair.arm(Side::Left), rng, 10.0),
        random_q(pair.arm(Side::Right), rng, 10.0),
    )
}

/// Minimum of `f` over a uniform grid of `(-pi, pi]` with spacing `step`.
pub fn grid_min_1d(f: impl Fn(f64) -> f64, step: f64) -> (f64, f64) {
    let n = (2.0 * PI / step).ceil() as usize;
    let mut best = (0.0, f64::INFINITY);
    for i in 0..n {
        let t = -PI + (i + 1) as f64 * step;
        let v = f(t);
        if v < best.1 {
            best = (t, v);
        }
    }
    best
}

/// Minimum of `|g1(a) - g2(b)|` over a 2-D grid at `coarse` spacing,
/// refined by a `fine` grid over the surrounding coarse cell. The fine
/// window is re-centered on each improvement so flat valleys are followed
/// to their lowest grid point.
pub fn grid_min_2d(
    g1: impl Fn(f64) -> Vec3,
    g2: impl Fn(f64) -> Vec3,
    coarse: f64,
    fine: f64,
) -> ((f64, f64), f64) {
    let n = (2.0 * PI / coarse).ceil() as usize;
    let angles: Vec<f64> = (0..n).map(|i| -PI + (i + 1) as f64 * coarse).collect();
    let c1: Vec<Vec3> = angles.iter().map(|&a| g1(a)).collect();
    let c2: Vec<Vec3> = angles.iter().map(|&b| g2(b)).collect();
    let mut best = ((0.0, 0.0), f64::INFINITY);
    for (a, u) in angles.iter().zip(&c1) {
        for (b, v) in angles.iter().zip(&c2) {
            let d = (u - v).norm();
            if d < best.1 {
                best = ((*a, *b), d);
            }
        }
    }
    let m = (coarse / fine).ceil() as i64;
    loop {
        let ((a0, b0), v0) = best;
        let rows: Vec<(f64, Vec3)> = (-m..=m)
            .map(|i| a0 + i as f64 * fine)
            .map(|a| (a, g1(a)))
            .collect();
        let cols: Vec<(f64, Vec3)> = (-m..=m)
            .map(|j| b0 + j as f64 * fine)
            .map(|b| (b, g2(b)))
            .collect();
        for (a, u) in &rows {
            for (b, v) in &cols {
                let d = (u - v).norm();
                if d < best.1 {
                    best = ((wrap_angle(*a), wrap_angle(*b)), d);
                }
            }
        }
        if best.1 >= v0 {
            return best;
        }
    }
}

/// Outcome of an oracle comparison: instances run and failures seen.
#[derive(Debug, Default)]
pub struct OracleTally {
    pub instances: usize,
    pub failures: Vec<String>,
}

impl OracleTally {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

const GRID_1D: f64 = 1e-4;

/// sp1 against a 1-D grid: the solver's residual never exceeds the grid
/// minimum, and its angle lies within a grid step of the grid argmin.
pub fn check_sp1(n: usize, seed: u64) -> OracleTally {
    let mut rng = rng(seed);
    let mut tally = OracleTally::default();
    while tally.instances < n {
        let k = unit(&mut rng);
        let p1 = unit(&mut rng) * rng.random_range(0.2..2.0);
        let p2 = if rng.random_bool(0.5) {
            rotation_about(&k, angle(&mut rng)) * p1
        } else {
            unit(&mut rng) * rng.random_range(0.2..2.0)
        };
        // Skip inputs nearly parallel to the axis; the argmin is then
        // ill-conditioned and the solver reports an error instead.
        if (p1 - k * k.dot(&p1)).norm() < 0.05 || (p2 - k * k.dot(&p2)).norm() < 0.05 {
            continue;
        }
        tally.instances += 1;
        let f = |t: f64| (rotation_about(&k, t) * p1 - p2).norm();
        let (t_grid, v_grid) = grid_min_1d(f, GRID_1D);
        match sp1(&p1, &p2, &k) {
            Ok(t) => {
                if f(t) > v_grid + 1e-12 || ang_dist(t, t_grid) > GRID_1D {
                    tally.failures.push(format!(
                        "sp1: theta {t} (res {}) vs grid {t_grid} (res {v_grid})",
                        f(t)
                    ));
                }
            }
            Err(e) => tally.failures.push(format!("sp1 error {e}")),
        }
    }
    tally
}

/// sp4 against a 1-D grid. Exact instances: every sign change of the
/// constraint on the grid is matched by one returned root, and every root
/// satisfies the constraint. Least-squares instances: the returned angle's
/// residual never exceeds the grid minimum and lies within a grid step of
/// the grid argmin.
pub fn check_sp4(n: usize, seed: u64) -> OracleTally {
    let mut rng = rng(seed);
    let mut tally = OracleTally::default();
    while tally.instances < n {
        let k = unit(&mut rng);
        let h = unit(&mut rng);
        let p = unit(&mut rng) * rng.random_range(0.2..2.0);
        let exact = rng.random_bool(0.5);
        let d = if exact {
            h.dot(&(rotation_about(&k, angle(&mut rng)) * p))
        } else {
            rng.random_range(-3.0..3.0)
        };
        let g = |t: f64| h.dot(&(rotation_about(&k, t) * p)) - d;
        // Amplitude and offset of g as a sinusoid.
        let kxp = k.cross(&p);
        let amp = (h.dot(&kxp).powi(2) + h.dot(&k.cross(&kxp)).powi(2)).sqrt();
        let offset = h.dot(&k) * k.dot(&p) - d;
        // Skip near-tangent instances, where two roots merge and the
        // grid cannot separate them.
        if amp < 0.05 || (amp - offset.abs()).abs() < 1e-3 {
            continue;
        }
        tally.instances += 1;
        let sol = sp4(&p, &h, &k, d);
        if amp > offset.abs() {
            let steps = (2.0 * PI / GRID_1D).ceil() as usize;
            let mut brackets = Vec::new();
            let mut prev = (-PI, g(-PI));
            for i in 1..=steps {
                let t = -PI + i as f64 * GRID_1D;
                let v = g(t);
                if prev.1.signum() != v.signum() {
                    brackets.push(0.5 * (prev.0 + t));
                }
                prev = (t, v);
            }
            let ok_count = brackets.len() == sol.solutions.len();
            let ok_match = brackets
                .iter()
                .all(|b| sol.solutions.iter().any(|&s| ang_dist(s, *b) <= GRID_1D));
            let ok_res = sol.exact && sol.solutions.iter().all(|&s| g(s).abs() < 1e-9);
            if !(ok_count && ok_match && ok_res) {
                tally.failures.push(format!(
                    "sp4 exact: roots {:?} vs grid brackets {brackets:?}",
                    sol.solutions
                ));
            }
        } else {
            let (t_grid, v_grid) = grid_min_1d(|t| g(t).abs(), GRID_1D);
            let ok = sol.solutions.len() == 1
                && !sol.exact
                && g(sol.solutions[0]).abs() <= v_grid + 1e-12
                && ang_dist(sol.solutions[0], t_grid) <= GRID_1D;
            if !ok {
                tally.failures.push(format!(
                    "sp4 ls: {:?} vs grid {t_grid} (res {v_grid})",
                    sol.solutions
                ));
            }
        }
    }
    tally
}

/// sp2 against a 2-D grid (1e-2 coarse, 1e-3 refined). The best returned
/// pair's residual never exceeds the grid minimum and the grid minimum is
/// within grid resolution of it. Solvable instances must come back exact.
pub fn check_sp2(n: usize, seed: u64) -> OracleTally {
    const COARSE: f64 = 1e-2;
    const FINE: f64 = 1e-3;
    let mut rng = rng(seed);
    let mut tally = OracleTally::default();
    while tally.instances < n {
        let k1 = unit(&mut rng);
        let k2 = unit(&mut rng);
        if k1.cross(&k2).norm() < 0.1 {
            continue;
        }
        let p1 = unit(&mut rng);
        let exact = rng.random_bool(0.5);
        let p2 = if exact {
            rotation_about(&k2, angle(&mut rng)).transpose()
                * rotation_about(&k1, angle(&mut rng))
                * p1
        } else {
            unit(&mut rng)
        };
        let f = |a: f64, b: f64| (rotation_about(&k1, a) * p1 - rotation_about(&k2, b) * p2).norm();
        tally.instances += 1;
        let sol = match sp2(&p1, &p2, &k1, &k2) {
            Ok(s) => s,
            Err(e) => {
                tally.failures.push(format!("sp2 error {e}"));
                continue;
            }
        };
        let ((ga, gb), gv) = grid_min_2d(
            |a| rotation_about(&k1, a) * p1,
            |b| rotation_about(&k2, b) * p2,
            COARSE,
            FINE,
        );
        let best = sol
            .solutions
            .iter()
            .map(|&(a, b)| f(a, b))
            .fold(f64::INFINITY, f64::min);
        // A grid point within half a fine step of the optimum in each
        // angle is at most this far above it (unit inputs, unit axes).
        let slack = FINE;
        let exact_ok = !exact || (sol.exact && sol.solutions.iter().all(|&(a, b)| f(a, b) < 1e-9));
        if best > gv + 1e-12 || gv - best > slack || !exact_ok {
            tally.failures.push(format!(
                "sp2: best {best} at {:?} vs grid {gv} at ({ga}, {gb})",
                sol.solutions
            ));
        }
    }
    tally
}

/// A generic capture sample: a random robot pose turned into keypoints,
/// with elbows, wrists and hands perturbed and the whole sample moved by a
/// random rigid motion.
pub fn random_human_input(pair: &ArmPair, rng: &mut impl Rng) -> sew_core::HumanInput {
    let q = random_pair_q(pair, rng);
    let mut input = sew_core::harness::synth::input_from_robot(pair, &q).expect("symmetric pair");
    let world = rotation(rng);
    let shift = Vec3::new(
        rng.random_range(-2.0..2.0),
        rng.random_range(-2.0..2.0),
        rng.random_range(-2.0..2.0),
    );
    let place = |p: &Vec3| world * p + shift;
    for arm in [&mut input.left, &mut input.right] {
        arm.elbow += unit(rng) * 0.03;
        arm.wrist += unit(rng) * 0.03;
        let hand = arm.hand.expect("orientation") * rotation_about(&unit(rng), 0.3);
        arm.shoulder = place(&arm.shoulder);
        arm.elbow = place(&arm.elbow);
        arm.wrist = place(&arm.wrist);
        arm.hand = Some(world * hand);
    }
    input.torso = place(&input.torso);
    input
}

/// Retargets both arms of a capture sample from the zero pose.
pub fn retarget_both(
    pair: &ArmPair,
    input: &sew_core::HumanInput,
) -> Bimanual<sew_core::RetargetResult> {
    let synced = sew_core::retarget::sync_frames(input, &Default::default()).expect("valid frame");
    Bimanual::new(JointVector::zeros(), JointVector::zeros())
        .map(|side, q0| sew_core::sew_mimic(pair.arm(side), q0, synced.arms.get(side)))
}

/// Applies `f` to every position in a capture sample.
pub fn map_points(input: &sew_core::HumanInput, f: impl Fn(&Vec3) -> Vec3) -> sew_core::HumanInput {
    let mut out = *input;
    for arm in [&mut out.left, &mut out.right] {
        arm.shoulder = f(&arm.shoulder);
        arm.elbow = f(&arm.elbow);
        arm.wrist = f(&arm.wrist);
        arm.index = arm.index.as_ref().map(&f);
        arm.pinky = arm.pinky.as_ref().map(&f);
    }
    out.torso = f(&out.torso);
    out
}
