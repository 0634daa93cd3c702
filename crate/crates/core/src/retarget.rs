//! Shoulder-elbow-wrist retargeting.
//!
//! The robot's third joint axis stands in for the upper arm and the fifth
//! for the forearm. Each is aligned with the matching human limb direction
//! by solving for its two predecessor joints with [`sp2`]; the last three
//! joints then match the hand orientation. Every stage minimizes its own
//! cost term, and since later stages never disturb earlier terms the result
//! minimizes the summed cost when no joint limit interferes.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::euler;
use crate::geometry::{
    axis_angle, make_frame, normalize, rotation_about, Frame, Rot3, Vec3, EPS_DEG,
};
use crate::model::{Bimanual, JointVector, RobotArmModel, WristType};
use crate::subproblems::{sp1, sp2};

/// Body-centric keypoints and hand orientation for one arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmInput {
    pub shoulder: Vec3,
    pub elbow: Vec3,
    pub wrist: Vec3,
    /// Hand orientation: columns are the finger, palm-normal and thumb-side
    /// directions.
    pub hand: Rot3,
}

/// One arm as captured, in the capture device's frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawArm {
    pub shoulder: Vec3,
    pub elbow: Vec3,
    pub wrist: Vec3,
    pub hand: Option<Rot3>,
    pub index: Option<Vec3>,
    pub pinky: Option<Vec3>,
}

impl RawArm {
    pub fn new(shoulder: Vec3, elbow: Vec3, wrist: Vec3, hand: Rot3) -> Self {
        Self {
            shoulder,
            elbow,
            wrist,
            hand: Some(hand),
            index: None,
            pinky: None,
        }
    }
}

/// A bimanual capture sample: both arms plus a torso anchor below the
/// shoulders.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HumanInput {
    pub left: RawArm,
    pub right: RawArm,
    pub torso: Vec3,
}

/// Convention fixes applied while moving hand orientations into the body
/// frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncOptions {
    /// Right-multiplied onto a captured hand orientation.
    pub hand_align: Rot3,
    /// Right-multiplied onto `make_frame(index, pinky, wrist)` when the hand
    /// orientation is built from finger keypoints.
    pub finger_axes: Rot3,
}

impl Default for SyncOptions {
    fn default() -> Self {
        Self {
            hand_align: Rot3::identity(),
            // make_frame yields (palm normal, index side, fingers); reorder
            // to (fingers, palm normal, index side).
            finger_axes: Rot3::from_columns(&[Vec3::z(), Vec3::x(), Vec3::y()]),
        }
    }
}

/// Output of [`sync_frames`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncedInput {
    pub arms: Bimanual<ArmInput>,
    /// Body-centric frame expressed in the capture frame.
    pub frame: Frame,
}

/// Moves a capture sample into the body-centric frame built from the two
/// shoulders and the torso anchor.
pub fn sync_frames(raw: &HumanInput, options: &SyncOptions) -> Result<SyncedInput> {
    let frame = make_frame(&raw.left.shoulder, &raw.right.shoulder, &raw.torso)?;
    let c_t = frame.orientation.transpose();
    let arm = |a: &RawArm| -> Result<ArmInput> {
        let hand = match (a.hand, a.index, a.pinky) {
            (Some(h), _, _) => c_t * h * options.hand_align,
            (None, Some(index), Some(pinky)) => {
                let f = make_frame(
                    &frame.from_parent(&index),
                    &frame.from_parent(&pinky),
                    &frame.from_parent(&a.wrist),
                )?;
                f.orientation * options.finger_axes
            }
            _ => {
                return Err(Error::Parse {
                    what: "hand".into(),
                    message: "needs an orientation or index and pinky keypoints".into(),
                })
            }
        };
        Ok(ArmInput {
            shoulder: frame.from_parent(&a.shoulder),
            elbow: frame.from_parent(&a.elbow),
            wrist: frame.from_parent(&a.wrist),
            hand,
        })
    };
    Ok(SyncedInput {
        arms: Bimanual::new(arm(&raw.left)?, arm(&raw.right)?),
        frame,
    })
}

/// Cosine-similarity error `1/2 - 1/2 cos(angle(u, v))`, in `[0, 1]`.
pub fn metric_c(u: &Vec3, v: &Vec3) -> Result<f64> {
    let (nu, nv) = (u.norm(), v.norm());
    if !(nu > EPS_DEG) {
        return Err(Error::ZeroVector(nu));
    }
    if !(nv > EPS_DEG) {
        return Err(Error::ZeroVector(nv));
    }
    let c = u.dot(v) / (nu * nv);
    Ok((0.5 - 0.5 * c).clamp(0.0, 1.0))
}

/// Half-angle chordal error `1/2 |sqrt(R1^T R2) - I|_F`, in `[0, 1]`.
pub fn metric_m(r1: &Rot3, r2: &Rot3) -> f64 {
    let (axis, angle) = axis_angle(&(r1.transpose() * r2));
    let half = rotation_about(&axis, 0.5 * angle);
    0.5 * (half - Rot3::identity()).norm()
}

/// Squared per-limb errors: the three terms of the retargeting objective.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Costs {
    pub upper: f64,
    pub lower: f64,
    pub wrist: f64,
}

impl Costs {
    pub fn total(&self) -> f64 {
        self.upper + self.lower + self.wrist
    }
}

/// What went wrong, if anything, in one alignment stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StageFlags {
    /// A joint limit moved the solution off the unconstrained optimum.
    pub clamped: bool,
    /// The target was degenerate and some joints were held.
    pub degenerate: bool,
}

impl StageFlags {
    pub fn any(&self) -> bool {
        self.clamped || self.degenerate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RetargetFlags {
    pub upper: StageFlags,
    pub lower: StageFlags,
    pub wrist: StageFlags,
    /// Perpendicular wrist near its Euler singularity; wrist joints held.
    pub gimbal: bool,
}

impl RetargetFlags {
    pub fn any(&self) -> bool {
        self.upper.any() || self.lower.any() || self.wrist.any() || self.gimbal
    }

    pub fn clamped(&self) -> bool {
        self.upper.clamped || self.lower.clamped || self.wrist.clamped
    }

    pub fn degenerate(&self) -> bool {
        self.upper.degenerate || self.lower.degenerate || self.wrist.degenerate || self.gimbal
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetargetResult {
    pub q: JointVector,
    pub costs: Costs,
    pub flags: RetargetFlags,
    /// Wall-clock solve time in seconds.
    pub solve_time: f64,
}

/// Angles for joints `i-2` and `i-1` that point joint `i`'s axis along `v`,
/// chosen nearest `q` among the in-limit solutions.
///
/// Joints before `i-2` are read from `q`; `i` must be 3, 5 or 7.
pub fn align_axis(
    model: &RobotArmModel,
    i: usize,
    q: &JointVector,
    v: &Vec3,
) -> Result<((f64, f64), StageFlags)> {
    let (candidates, flags) = align_axis_candidates(model, i, q, v)?;
    Ok(((candidates[0][0], candidates[0][1]), flags))
}

/// All solutions [`align_axis`] chooses from, nearest `q` first. Never
/// empty.
pub fn align_axis_candidates(
    model: &RobotArmModel,
    i: usize,
    q: &JointVector,
    v: &Vec3,
) -> Result<(Vec<[f64; 2]>, StageFlags)> {
    if !matches!(i, 3 | 5 | 7) {
        return Err(Error::JointIndex(i));
    }
    let v = normalize(v)?;
    let (j2, j1, j0) = (model.joint(i - 2), model.joint(i - 1), model.joint(i));
    // Frame i-2 with its own joint at zero.
    let base = model.rotation_to_frame(q, i - 3)? * j2.rotation;
    let v_local = base.transpose() * v;
    let h_prev = j1.rotation * j1.axis;
    let h_target = j1.rotation * j0.rotation * j0.axis;
    let (a0, b0) = (q[i - 3], q[i - 2]);

    let mut flags = StageFlags::default();
    let candidates: Vec<[f64; 2]> = if j2.axis.cross(&v_local).norm() < EPS_DEG {
        // Any angle of joint i-2 is optimal; keep it and align with i-1.
        flags.degenerate = true;
        let target = rotation_about(&(-j2.axis), a0) * v_local;
        match sp1(&h_target, &target, &h_prev) {
            Ok(b) => vec![[a0, b]],
            Err(_) => vec![[a0, b0]],
        }
    } else {
        sp2(&v_local, &h_target, &(-j2.axis), &h_prev)?
            .solutions
            .into_iter()
            .map(|(a, b)| [a, b])
            .collect()
    };

    let bounded = model.bound_joints(&candidates, [i - 2, i - 1], q);
    flags.clamped = bounded.clamped;
    let mut out = bounded.candidates;
    let dist = |x: &[f64; 2]| (a0 - x[0]).abs() + (b0 - x[1]).abs();
    out.sort_by(|x, y| dist(x).total_cmp(&dist(y)));
    Ok((out, flags))
}

/// Desired orientation of frame 7 for a hand orientation.
fn desired_frame7(model: &RobotArmModel, hand: &Rot3) -> Rot3 {
    hand * model.r_align().transpose() * model.tool_rotation().transpose()
}

/// Wrist angles for a wrist whose tool normal is parallel to joint 7.
pub fn align_wrist_parallel(
    model: &RobotArmModel,
    q: &JointVector,
    hand: &Rot3,
) -> Result<([f64; 3], StageFlags)> {
    let r_des = desired_frame7(model, hand);
    let j7 = model.joint(7);
    let (pairs, pair_flags) = align_axis_candidates(model, 7, q, &(r_des * j7.axis))?;
    let h6 = model.joint(6).axis;
    let h6_in_7 = j7.rotation.transpose() * h6;

    // Nearest (q5, q6) first, unless only another one leaves q7 in limits.
    let mut best = None;
    for [q5, q6] in pairs {
        let mut q_new = *q;
        q_new[4] = q5;
        q_new[5] = q6;
        let mut flags = pair_flags;
        let u6_in_7 = r_des.transpose() * model.rotation_to_frame(&q_new, 6)? * h6;
        let q7 = match sp1(&h6_in_7, &u6_in_7, &(-j7.axis)) {
            Ok(t) => {
                let b = model.bound_joints(&[[t]], [7], &q_new);
                flags.clamped |= b.clamped;
                b.candidates[0][0]
            }
            Err(_) => {
                flags.degenerate = true;
                q[6]
            }
        };
        let done = !flags.clamped;
        if best.is_none() || done {
            best = Some(([q5, q6, q7], flags));
        }
        if done {
            break;
        }
    }
    Ok(best.expect("align_axis_candidates is never empty"))
}

/// Wrist angles for a wrist whose tool normal is perpendicular to joint 7,
/// from an intrinsic Euler decomposition of the wrist rotation.
///
/// Returns `None` for the angles at the Euler singularity.
pub fn align_wrist_perpendicular(
    model: &RobotArmModel,
    q: &JointVector,
    hand: &Rot3,
) -> Result<(Option<[f64; 3]>, StageFlags)> {
    let axes = model.wrist_axes().ok_or_else(|| {
        Error::Model(format!(
            "{} does not have a perpendicular wrist",
            model.name()
        ))
    })?;
    let r_des = desired_frame7(model, hand);
    let (j5, j6, j7) = (model.joint(5), model.joint(6), model.joint(7));
    let frame5 = model.rotation_to_frame(q, 4)? * j5.rotation;
    let m = frame5.transpose() * r_des * (j6.rotation * j7.rotation).transpose();

    let mut flags = StageFlags::default();
    let Some(branches) = euler::decompose(&m, axes) else {
        flags.degenerate = true;
        return Ok((None, flags));
    };
    let bounded = model.bound_joints(&branches, [5, 6, 7], q);
    flags.clamped = bounded.clamped;
    let dist = |c: &[f64; 3]| (0..3).map(|k| (q[4 + k] - c[k]).abs()).sum::<f64>();
    let best = bounded
        .candidates
        .iter()
        .min_by(|a, b| dist(a).total_cmp(&dist(b)))
        .copied()
        .expect("bound_joints returns a candidate");
    Ok((Some(best), flags))
}

/// Problem cost terms of `q` against an input.
///
/// A degenerate limb contributes zero.
pub fn costs(model: &RobotArmModel, q: &JointVector, input: &ArmInput) -> Costs {
    let r3 = model.rotation_to_frame(q, 3).expect("valid index") * model.joint(3).axis;
    let r5 = model.rotation_to_frame(q, 5).expect("valid index") * model.joint(5).axis;
    let sq = |x: Result<f64>| x.map(|c| c * c).unwrap_or(0.0);
    Costs {
        upper: sq(metric_c(&(input.elbow - input.shoulder), &r3)),
        lower: sq(metric_c(&(input.wrist - input.elbow), &r5)),
        wrist: metric_m(&model.tool_orientation(q), &input.hand).powi(2),
    }
}

/// Solutions of one shoulder or elbow stage, nearest first. A degenerate
/// limb keeps the current angles.
fn stage_candidates(
    model: &RobotArmModel,
    i: usize,
    q: &JointVector,
    v: Option<Vec3>,
) -> (Vec<[f64; 2]>, StageFlags) {
    match v.map(|v| align_axis_candidates(model, i, q, &v)) {
        Some(Ok(c)) => c,
        _ => (
            vec![[q[i - 3], q[i - 2]]],
            StageFlags {
                degenerate: true,
                ..StageFlags::default()
            },
        ),
    }
}

/// Wrist stage on top of `q`: the updated pose, the stage flags and whether
/// the perpendicular wrist hit its singularity.
fn solve_wrist(
    model: &RobotArmModel,
    q: &JointVector,
    hand: &Rot3,
) -> (JointVector, StageFlags, bool) {
    let mut q = *q;
    let mut flags = StageFlags::default();
    let mut gimbal = false;
    let solved = match model.wrist_type() {
        WristType::Parallel => align_wrist_parallel(model, &q, hand).map(|(w, f)| (Some(w), f)),
        WristType::Perpendicular => align_wrist_perpendicular(model, &q, hand),
    };
    match solved {
        Ok((Some(w), f)) => {
            q[4..].iter_mut().zip(w).for_each(|(d, s)| *d = s);
            flags = f;
        }
        Ok((None, _)) => gimbal = true,
        Err(_) => flags.degenerate = true,
    }
    (q, flags, gimbal)
}

/// Retargets one arm, starting from (and staying close to) `q0`.
///
/// Each stage takes its solution nearest `q0`. If that chain ends up
/// clamping a later joint, the first combination of shoulder and elbow
/// solutions that needs no clamping is used instead.
pub fn sew_mimic(model: &RobotArmModel, q0: &JointVector, input: &ArmInput) -> RetargetResult {
    let start = Instant::now();

    let limb = |a: &Vec3, b: &Vec3| normalize(&(b - a)).ok();
    let upper = limb(&input.shoulder, &input.elbow);
    let lower = limb(&input.elbow, &input.wrist);

    let mut best: Option<(JointVector, RetargetFlags)> = None;
    let (uppers, upper_flags) = stage_candidates(model, 3, q0, upper);
    'search: for [a, b] in uppers {
        let mut q = *q0;
        q[0] = a;
        q[1] = b;
        let (lowers, lower_flags) = stage_candidates(model, 5, &q, lower);
        for [c, d] in lowers {
            q[2] = c;
            q[3] = d;
            let (qw, wrist, gimbal) = solve_wrist(model, &q, &input.hand);
            let flags = RetargetFlags {
                upper: upper_flags,
                lower: lower_flags,
                wrist,
                gimbal,
            };
            let done = !flags.clamped();
            if best.is_none() || done {
                best = Some((qw, flags));
            }
            if done {
                break 'search;
            }
        }
    }
    let (q, flags) = best.expect("stages are never empty");

    let costs = costs(model, &q, input);
    RetargetResult {
        q,
        costs,
        flags,
        solve_time: start.elapsed().as_secs_f64(),
    }
}

/// Robot keypoints and tool orientation of a pose, as a synced input.
pub fn input_from_pose(model: &RobotArmModel, q: &JointVector) -> ArmInput {
    let k = model.fk(q);
    ArmInput {
        shoulder: k.shoulder,
        elbow: k.elbow,
        wrist: k.wrist,
        hand: k.tool_orientation,
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::geometry::is_rotation;
    use crate::model::{Side, NUM_JOINTS};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_q(model: &RobotArmModel, rng: &mut impl Rng) -> JointVector {
        let mut q = JointVector::zeros();
        for i in 0..NUM_JOINTS {
            let (lo, hi) = model.limits(i + 1);
            q[i] = rng.random_range(lo..hi);
        }
        q
    }

    /// Direction joint `i`'s axis points along at `q`.
    fn axis_dir(model: &RobotArmModel, q: &JointVector, i: usize) -> Vec3 {
        model.axis_in_base(q, i).unwrap()
    }

    #[test]
    fn metric_c_reference_values() {
        let u = Vec3::new(0.3, -1.2, 0.5);
        assert_eq!(metric_c(&u, &u).unwrap(), 0.0);
        assert_eq!(metric_c(&u, &(-u)).unwrap(), 1.0);
        assert!((metric_c(&Vec3::x(), &Vec3::y()).unwrap() - 0.5).abs() < 1e-16);
        assert!(metric_c(&Vec3::zeros(), &u).is_err());
    }

    #[test]
    fn metric_m_reference_values() {
        let r = rotation_about(&Vec3::new(0.6, 0.0, 0.8), 1.1);
        assert!(metric_m(&r, &r) < 1e-15);
        let half_turn = rotation_about(&Vec3::z(), PI);
        assert!((metric_m(&Rot3::identity(), &half_turn) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn metric_m_closed_form_and_monotone() {
        let axis = normalize(&Vec3::new(1.0, 2.0, -0.5)).unwrap();
        let mut last = -1.0;
        for k in 0..100 {
            let phi = PI * k as f64 / 99.0;
            let m = metric_m(&Rot3::identity(), &rotation_about(&axis, phi));
            // |R(a, t) - I|_F = 2 sqrt(2) sin(t/2), here with t = phi/2.
            let closed = 2.0_f64.sqrt() * (phi / 4.0).sin();
            assert!((m - closed).abs() < 1e-12, "phi {phi}");
            assert!(m >= last);
            last = m;
        }
    }

    #[test]
    fn sync_identity_frame_is_passthrough() {
        let hand = rotation_about(&Vec3::y(), 0.4);
        let left = RawArm::new(
            Vec3::new(0.0, 0.25, 0.0),
            Vec3::new(0.1, 0.3, -0.25),
            Vec3::new(0.3, 0.2, -0.3),
            hand,
        );
        let right = RawArm::new(
            Vec3::new(0.0, -0.25, 0.0),
            Vec3::new(0.0, -0.3, -0.28),
            Vec3::new(0.2, -0.3, -0.4),
            hand,
        );
        let raw = HumanInput {
            left,
            right,
            torso: Vec3::new(0.0, 0.0, -0.5),
        };
        let synced = sync_frames(&raw, &SyncOptions::default()).unwrap();
        assert_eq!(synced.arms.left.elbow, left.elbow);
        assert_eq!(synced.arms.right.wrist, right.wrist);
        assert_eq!(synced.arms.left.hand, hand);
    }

    #[test]
    fn sync_finger_keypoints_build_hand() {
        // Right hand pointing forward, palm down: index on the left.
        let w = Vec3::new(0.3, -0.25, -0.3);
        let mut arm = RawArm::new(
            Vec3::new(0.0, -0.25, 0.0),
            Vec3::new(0.0, -0.25, -0.28),
            w,
            Rot3::identity(),
        );
        arm.hand = None;
        arm.index = Some(w + Vec3::new(0.08, 0.03, 0.0));
        arm.pinky = Some(w + Vec3::new(0.08, -0.03, 0.0));
        let mut left = arm;
        left.shoulder = Vec3::new(0.0, 0.25, 0.0);
        let raw = HumanInput {
            left,
            right: arm,
            torso: Vec3::new(0.0, 0.0, -0.5),
        };
        let h = sync_frames(&raw, &SyncOptions::default())
            .unwrap()
            .arms
            .right
            .hand;
        assert!(is_rotation(&h));
        assert!((h.column(0) - Vec3::x()).norm() < 1e-12);
        assert!((h.column(1) + Vec3::z()).norm() < 1e-12);
        assert!((h.column(2) - Vec3::y()).norm() < 1e-12);
    }

    #[test]
    fn align_axis_zero_motion() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = RobotArmModel::bundled("parallel7_right").unwrap();
        for _ in 0..50 {
            let q = random_q(&m, &mut rng);
            for i in [3, 5, 7] {
                let v = axis_dir(&m, &q, i);
                let ((a, b), flags) = align_axis(&m, i, &q, &v).unwrap();
                assert!(!flags.any());
                assert!((a - q[i - 3]).abs() < 1e-9 && (b - q[i - 2]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn align_axis_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = RobotArmModel::bundled("perpendicular7_left")
            .unwrap()
            .with_all_limits(-2.0 * PI, 2.0 * PI)
            .unwrap();
        for _ in 0..200 {
            let q_star = random_q(&m, &mut rng);
            let q0 = random_q(&m, &mut rng);
            for i in [3, 5, 7] {
                let v = axis_dir(&m, &q_star, i);
                let mut q = q_star;
                q[i - 3] = q0[i - 3];
                q[i - 2] = q0[i - 2];
                let ((a, b), _) = align_axis(&m, i, &q, &v).unwrap();
                q[i - 3] = a;
                q[i - 2] = b;
                assert!(metric_c(&v, &axis_dir(&m, &q, i)).unwrap() < 1e-9);
            }
        }
    }

    #[test]
    fn align_axis_clamps_with_tight_limits() {
        let m = RobotArmModel::bundled("parallel7_right")
            .unwrap()
            .with_limits(1, -0.1, 0.1)
            .unwrap()
            .with_limits(2, -0.1, 0.1)
            .unwrap();
        // Upper arm pointing straight forward needs a large shoulder pitch.
        let ((a, b), flags) = align_axis(&m, 3, &JointVector::zeros(), &Vec3::x()).unwrap();
        assert!(flags.clamped);
        assert!(a.abs() <= 0.1 && b.abs() <= 0.1);
    }

    #[test]
    fn align_axis_degenerate_target_holds_first_joint() {
        let m = RobotArmModel::bundled("parallel7_right").unwrap();
        let mut q = JointVector::zeros();
        q[0] = 0.3;
        // Joint 1 axis is y; pointing the upper arm along it leaves q1 free.
        let ((a, _), flags) = align_axis(&m, 3, &q, &Vec3::y()).unwrap();
        assert!(flags.degenerate);
        assert_eq!(a, 0.3);
    }

    #[test]
    fn wrist_fixed_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for name in ["parallel7_right", "perpendicular7_right"] {
            let m = RobotArmModel::bundled(name).unwrap();
            for _ in 0..50 {
                let q = random_q(&m, &mut rng);
                let hand = m.tool_orientation(&q);
                let w = match m.wrist_type() {
                    WristType::Parallel => align_wrist_parallel(&m, &q, &hand).unwrap().0,
                    WristType::Perpendicular => {
                        align_wrist_perpendicular(&m, &q, &hand).unwrap().0.unwrap()
                    }
                };
                for k in 0..3 {
                    assert!((w[k] - q[4 + k]).abs() < 1e-9, "{name} {w:?} vs {q:?}");
                }
            }
        }
    }

    #[test]
    fn parallel_wrist_clamps_q7() {
        let m = RobotArmModel::bundled("parallel7_right")
            .unwrap()
            .with_limits(7, -0.1, 0.1)
            .unwrap();
        let mut q_star = JointVector::zeros();
        q_star[6] = 1.0;
        let hand = {
            let free = m.with_limits(7, -3.0, 3.0).unwrap();
            free.tool_orientation(&q_star)
        };
        let (w, flags) = align_wrist_parallel(&m, &JointVector::zeros(), &hand).unwrap();
        assert!(flags.clamped);
        assert!((w[2] - 0.1).abs() < 1e-12);
        let mut q = JointVector::zeros();
        q[4..].copy_from_slice(&w);
        assert!(metric_m(&m.tool_orientation(&q), &hand) > 0.1);
    }

    #[test]
    fn perpendicular_wrist_gimbal() {
        let m = RobotArmModel::bundled("perpendicular7_right")
            .unwrap()
            .with_limits(6, -2.0, 2.0)
            .unwrap();
        let mut q = JointVector::zeros();
        q[5] = PI / 2.0;
        let hand = m.tool_orientation(&q);
        let (w, flags) = align_wrist_perpendicular(&m, &JointVector::zeros(), &hand).unwrap();
        assert!(w.is_none() && flags.degenerate);
        let r = sew_mimic(&m, &JointVector::zeros(), &input_from_pose(&m, &q));
        assert!(r.flags.gimbal);
    }

    #[test]
    fn sew_mimic_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for name in crate::model::BUNDLED_MODELS {
            let m = RobotArmModel::bundled(name).unwrap();
            for _ in 0..100 {
                let q_star = random_q(&m, &mut rng);
                let r = sew_mimic(&m, &q_star, &input_from_pose(&m, &q_star));
                assert!(r.costs.total() < 1e-9, "{name}: {:?}", r.costs);
                assert!(!r.flags.any());
            }
        }
    }

    #[test]
    fn degenerate_limb_holds_joints() {
        let m = RobotArmModel::bundled("parallel7_left").unwrap();
        let mut q0 = JointVector::zeros();
        q0[0] = 0.2;
        q0[1] = -0.3;
        let mut input = input_from_pose(&m, &JointVector::zeros());
        input.elbow = input.shoulder;
        let r = sew_mimic(&m, &q0, &input);
        assert!(r.flags.upper.degenerate);
        assert_eq!((r.q[0], r.q[1]), (0.2, -0.3));
        assert_eq!(m.side(), Side::Left);
    }

    #[test]
    fn nearest_branch_is_skipped_when_it_forces_a_clamp() {
        // From zero, the nearest shoulder solution flips q1 by pi and then
        // needs q3 beyond its limit; the other one reproduces the pose.
        let m = RobotArmModel::bundled("parallel7_right").unwrap();
        let q_star = JointVector([
            2.534344482813572,
            2.5915736836998176,
            0.04902944333106696,
            -0.9179752229714928,
            1.4896457202142903,
            0.5527399296126969,
            2.018704428951194,
        ]);
        let input = input_from_pose(&m, &q_star);
        let (uppers, _) = align_axis_candidates(
            &m,
            3,
            &JointVector::zeros(),
            &(input.elbow - input.shoulder),
        )
        .unwrap();
        assert!((uppers[0][0] - q_star[0]).abs() > 1.0);
        let r = sew_mimic(&m, &JointVector::zeros(), &input);
        assert!(!r.flags.clamped());
        assert!(r.costs.total() < 1e-9, "{:?}", r.costs);
    }
}
