//! Bimanual self-collision filter.
//!
//! Both arms are wrapped in capsules built on their shoulder, elbow, wrist
//! and tool keypoints, plus a fixed torso capsule. A desired pose is first
//! checked along the straight keypoint path from the current pose; if some
//! intermediate pose comes within the safety margin, that pose's keypoints
//! are pushed apart with XPBD contact constraints, link lengths are
//! re-projected, and the arms are solved back to joint angles with
//! [`sew_mimic`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{normalize, rotation_about, Rot3, Vec3, EPS_DEG};
use crate::model::{ArmPair, Bimanual, JointVector, RobotKeypoints, Side, StaticCapsule};
use crate::retarget::{sew_mimic, ArmInput, RetargetFlags};

/// Squared segment length below which a capsule is treated as a sphere.
const POINT_EPS: f64 = 1e-18;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CapsuleTag {
    Torso,
    Upper(Side),
    Lower(Side),
    Hand(Side),
    /// Index into the static capsules of a [`CapsuleSet`].
    Static(usize),
}

impl CapsuleTag {
    pub fn name(&self) -> String {
        let side = |s: &Side| match s {
            Side::Left => "lt",
            Side::Right => "rt",
        };
        match self {
            CapsuleTag::Torso => "torso".into(),
            CapsuleTag::Upper(s) => format!("upper_{}", side(s)),
            CapsuleTag::Lower(s) => format!("lower_{}", side(s)),
            CapsuleTag::Hand(s) => format!("hand_{}", side(s)),
            CapsuleTag::Static(i) => format!("static_{i}"),
        }
    }
}

/// A sphere of radius `radius` swept from `p1` to `p2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Capsule {
    pub p1: Vec3,
    pub p2: Vec3,
    pub radius: f64,
    pub tag: CapsuleTag,
}

/// Output of [`collision_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactResult {
    /// Signed distance between the capsule surfaces; negative on overlap.
    pub d: f64,
    /// Closest points on the two segments.
    pub c_i: Vec3,
    pub c_j: Vec3,
    /// Segment parameters with `c = p1 + tau (p2 - p1)`. A point capsule
    /// reports `tau = 1`.
    pub tau_i: f64,
    pub tau_j: f64,
    /// `tau_i * normalize(c_j - c_i)`: points from capsule i toward j,
    /// shortened when the contact is near `p1`.
    pub n_i: Vec3,
    pub n_j: Vec3,
}

/// Closest points between segments `p1-q1` and `p2-q2` as parameters
/// `(s, t)`. Parallel overlapping segments use the middle of the overlap.
fn closest_params(p1: &Vec3, q1: &Vec3, p2: &Vec3, q2: &Vec3) -> (f64, f64) {
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.dot(&d1);
    let e = d2.dot(&d2);
    let f = d2.dot(&r);
    if a <= POINT_EPS && e <= POINT_EPS {
        return (0.0, 0.0);
    }
    if a <= POINT_EPS {
        return (0.0, (f / e).clamp(0.0, 1.0));
    }
    let c = d1.dot(&r);
    if e <= POINT_EPS {
        return ((-c / a).clamp(0.0, 1.0), 0.0);
    }
    let b = d1.dot(&d2);
    let denom = a * e - b * b;
    let s = if denom > 1e-12 * a * e {
        ((b * f - c * e) / denom).clamp(0.0, 1.0)
    } else {
        // Parallel: project segment 2 onto segment 1 and take the middle of
        // the overlapping range.
        let sa = (p2 - p1).dot(&d1) / a;
        let sb = (q2 - p1).dot(&d1) / a;
        let lo = sa.min(sb).max(0.0);
        let hi = sa.max(sb).min(1.0);
        if lo <= hi {
            0.5 * (lo + hi)
        } else if hi < 0.0 {
            0.0
        } else {
            1.0
        }
    };
    let t = (b * s + f) / e;
    if t < 0.0 {
        ((-c / a).clamp(0.0, 1.0), 0.0)
    } else if t > 1.0 {
        (((b - c) / a).clamp(0.0, 1.0), 1.0)
    } else {
        (s, t)
    }
}

/// A unit vector perpendicular to `v` (or `x` if `v` vanishes): the
/// coordinate axis most orthogonal to `v`, lowest index on ties, with its
/// `v` component removed.
fn perpendicular_to(v: &Vec3) -> Vec3 {
    let Ok(u) = normalize(v) else {
        return Vec3::x();
    };
    let mut best = 0;
    for i in 1..3 {
        if u[i].abs() < u[best].abs() {
            best = i;
        }
    }
    let mut e = Vec3::zeros();
    e[best] = 1.0;
    (e - u * u.dot(&e)).normalize()
}

/// Signed distance, closest points and scaled contact normals of two
/// capsules.
pub fn collision_check(ci: &Capsule, cj: &Capsule) -> ContactResult {
    let (s, t) = closest_params(&ci.p1, &ci.p2, &cj.p1, &cj.p2);
    let c_i = ci.p1 + (ci.p2 - ci.p1) * s;
    let c_j = cj.p1 + (cj.p2 - cj.p1) * t;
    let gap = c_j - c_i;
    let dist = gap.norm();
    let dir = if dist > EPS_DEG {
        gap / dist
    } else {
        // Coincident centers: separate across segment i deterministically.
        let axis = if (ci.p2 - ci.p1).norm_squared() > POINT_EPS {
            ci.p2 - ci.p1
        } else {
            cj.p2 - cj.p1
        };
        perpendicular_to(&axis)
    };
    let tau = |c: &Capsule, x: f64| {
        if (c.p2 - c.p1).norm_squared() <= POINT_EPS {
            1.0
        } else {
            x
        }
    };
    let (tau_i, tau_j) = (tau(ci, s), tau(cj, t));
    ContactResult {
        d: dist - ci.radius - cj.radius,
        c_i,
        c_j,
        tau_i,
        tau_j,
        n_i: dir * tau_i,
        n_j: -dir * tau_j,
    }
}

/// Per-keypoint XPBD inverse masses. Zero pins a keypoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KeypointWeights {
    pub shoulder: f64,
    pub elbow: f64,
    pub wrist: f64,
    pub tool: f64,
    pub torso: f64,
}

impl Default for KeypointWeights {
    fn default() -> Self {
        Self {
            shoulder: 0.0,
            elbow: 1.0,
            wrist: 1.0,
            tool: 1.0,
            torso: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterParams {
    /// Clearance the filter enforces between capsules, meters.
    pub d_min: f64,
    /// An inactive pair starts pushing below this distance.
    pub d_act: f64,
    /// An active pair lets go at or above this distance.
    pub d_rel: f64,
    /// XPBD compliance.
    pub alpha: f64,
    pub n_iter: usize,
    pub weights: KeypointWeights,
    /// Links shorter than this skip length projection.
    pub length_eps: f64,
    /// Slack on `d_min` when deciding that a capsule set is clear.
    pub tolerance: f64,
    /// Cap on how far one contact may move a keypoint in one iteration.
    pub max_step: f64,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self {
            d_min: 0.01,
            d_act: 0.02,
            d_rel: 0.05,
            alpha: 1e-4,
            n_iter: 20,
            weights: KeypointWeights::default(),
            length_eps: 1e-9,
            tolerance: 1e-4,
            max_step: 0.05,
        }
    }
}

impl FilterParams {
    /// Parses a TOML table of overrides; missing keys keep their defaults.
    pub fn from_toml(text: &str) -> Result<Self> {
        let params: Self = toml::from_str(text).map_err(|e| Error::Parse {
            what: "filter parameters".into(),
            message: e.to_string(),
        })?;
        params.validate()?;
        Ok(params)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::FilterParams(m.into()));
        if !(0.0 <= self.d_min && self.d_min <= self.d_act && self.d_act <= self.d_rel) {
            return bad("need 0 <= d_min <= d_act <= d_rel");
        }
        if !(self.alpha >= 0.0) {
            return bad("alpha must be non-negative");
        }
        if self.n_iter == 0 {
            return bad("n_iter must be at least 1");
        }
        let w = &self.weights;
        if [w.shoulder, w.elbow, w.wrist, w.tool, w.torso]
            .iter()
            .any(|x| !(*x >= 0.0))
        {
            return bad("weights must be non-negative");
        }
        if !(self.length_eps >= 0.0 && self.tolerance >= 0.0 && self.max_step > 0.0) {
            return bad("length_eps and tolerance must be non-negative, max_step positive");
        }
        Ok(())
    }
}

// Keypoint slots in a CapsuleSet.
const TORSO_TOP: usize = 0;
const TORSO_BOTTOM: usize = 1;

fn arm_base(side: Side) -> usize {
    match side {
        Side::Left => 2,
        Side::Right => 6,
    }
}

/// Keypoints of both arms and the torso with the capsules they span.
///
/// Capsules share keypoints, so the elbow ending the upper arm is the same
/// point that starts the forearm.
#[derive(Debug, Clone, PartialEq)]
pub struct CapsuleSet {
    keypoints: [Vec3; 10],
    radii: CapsuleRadiiPair,
    statics: Vec<StaticCapsule>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct CapsuleRadiiPair {
    torso: f64,
    upper: [f64; 2],
    lower: [f64; 2],
    hand: [f64; 2],
}

fn side_index(side: Side) -> usize {
    match side {
        Side::Left => 0,
        Side::Right => 1,
    }
}

const ARM_TAGS: [CapsuleTag; 7] = [
    CapsuleTag::Torso,
    CapsuleTag::Upper(Side::Left),
    CapsuleTag::Upper(Side::Right),
    CapsuleTag::Lower(Side::Left),
    CapsuleTag::Lower(Side::Right),
    CapsuleTag::Hand(Side::Left),
    CapsuleTag::Hand(Side::Right),
];

/// Pairs that share a keypoint (or the shoulder sits on the torso) and so
/// always touch.
fn adjacent(a: CapsuleTag, b: CapsuleTag) -> bool {
    use CapsuleTag::*;
    let pair = |x, y| (a == x && b == y) || (a == y && b == x);
    [Side::Left, Side::Right]
        .iter()
        .any(|&s| pair(Torso, Upper(s)) || pair(Upper(s), Lower(s)) || pair(Lower(s), Hand(s)))
}

impl CapsuleSet {
    pub fn capsule(&self, tag: CapsuleTag) -> Capsule {
        let k = &self.keypoints;
        let (p1, p2, radius) = match tag {
            CapsuleTag::Torso => (k[TORSO_TOP], k[TORSO_BOTTOM], self.radii.torso),
            CapsuleTag::Upper(s) => {
                let b = arm_base(s);
                (k[b], k[b + 1], self.radii.upper[side_index(s)])
            }
            CapsuleTag::Lower(s) => {
                let b = arm_base(s);
                (k[b + 1], k[b + 2], self.radii.lower[side_index(s)])
            }
            CapsuleTag::Hand(s) => {
                let b = arm_base(s);
                (k[b + 2], k[b + 3], self.radii.hand[side_index(s)])
            }
            CapsuleTag::Static(i) => {
                let c = &self.statics[i];
                (c.p1, c.p2, c.radius)
            }
        };
        Capsule {
            p1,
            p2,
            radius,
            tag,
        }
    }

    pub fn tags(&self) -> Vec<CapsuleTag> {
        ARM_TAGS
            .iter()
            .copied()
            .chain((0..self.statics.len()).map(CapsuleTag::Static))
            .collect()
    }

    pub fn capsules(&self) -> Vec<Capsule> {
        self.tags().into_iter().map(|t| self.capsule(t)).collect()
    }

    /// Every checked pair: all arm/torso pairs except adjacent ones, plus
    /// each static capsule against every arm capsule it does not exclude.
    pub fn pairs(&self) -> Vec<(CapsuleTag, CapsuleTag)> {
        let mut out = Vec::new();
        for (i, &a) in ARM_TAGS.iter().enumerate() {
            for &b in &ARM_TAGS[i + 1..] {
                if !adjacent(a, b) {
                    out.push((a, b));
                }
            }
        }
        for (i, c) in self.statics.iter().enumerate() {
            for &b in &ARM_TAGS[1..] {
                if !c.exclude.contains(&b.name()) {
                    out.push((CapsuleTag::Static(i), b));
                }
            }
        }
        out
    }

    pub fn contacts(&self) -> Vec<((CapsuleTag, CapsuleTag), ContactResult)> {
        self.pairs()
            .into_iter()
            .map(|(a, b)| ((a, b), collision_check(&self.capsule(a), &self.capsule(b))))
            .collect()
    }

    /// Smallest signed distance over all checked pairs.
    pub fn min_distance(&self) -> f64 {
        self.contacts()
            .iter()
            .map(|(_, c)| c.d)
            .fold(f64::INFINITY, f64::min)
    }

    /// True if any checked pair is closer than `threshold`.
    pub fn any_closer_than(&self, threshold: f64) -> bool {
        self.pairs()
            .into_iter()
            .any(|(a, b)| collision_check(&self.capsule(a), &self.capsule(b)).d < threshold)
    }

    /// Torso top and bottom, then shoulder, elbow, wrist and tool of the
    /// left arm and of the right arm.
    pub fn keypoints(&self) -> &[Vec3; 10] {
        &self.keypoints
    }

    /// Replaces one arm's shoulder, elbow, wrist and tool points.
    pub fn set_arm_keypoints(&mut self, side: Side, points: [Vec3; 4]) {
        let b = arm_base(side);
        self.keypoints[b..b + 4].copy_from_slice(&points);
    }

    /// Shoulder, elbow, wrist and tool points of one arm.
    pub fn arm_keypoints(&self, side: Side) -> [Vec3; 4] {
        let b = arm_base(side);
        [
            self.keypoints[b],
            self.keypoints[b + 1],
            self.keypoints[b + 2],
            self.keypoints[b + 3],
        ]
    }

    fn endpoint_slots(tag: CapsuleTag) -> Option<(usize, usize)> {
        Some(match tag {
            CapsuleTag::Torso => (TORSO_TOP, TORSO_BOTTOM),
            CapsuleTag::Upper(s) => (arm_base(s), arm_base(s) + 1),
            CapsuleTag::Lower(s) => (arm_base(s) + 1, arm_base(s) + 2),
            CapsuleTag::Hand(s) => (arm_base(s) + 2, arm_base(s) + 3),
            CapsuleTag::Static(_) => return None,
        })
    }

    fn weight(slot: usize, w: &KeypointWeights) -> f64 {
        match slot {
            TORSO_TOP | TORSO_BOTTOM => w.torso,
            s => [w.shoulder, w.elbow, w.wrist, w.tool][(s - 2) % 4],
        }
    }

    fn lerp(a: &Self, b: &Self, t: f64) -> Self {
        let mut out = a.clone();
        for (k, (p, q)) in out
            .keypoints
            .iter_mut()
            .zip(a.keypoints.iter().zip(&b.keypoints))
        {
            *k = p + (q - p) * t;
        }
        out
    }
}

/// Capsules around a bimanual pose's keypoints.
pub fn make_capsules(pair: &ArmPair, kp: &Bimanual<RobotKeypoints>) -> CapsuleSet {
    let torso = pair.left.torso_endpoints();
    let mut keypoints = [Vec3::zeros(); 10];
    keypoints[TORSO_TOP] = torso[0];
    keypoints[TORSO_BOTTOM] = torso[1];
    for side in [Side::Left, Side::Right] {
        let k = kp.get(side);
        let b = arm_base(side);
        keypoints[b] = k.shoulder;
        keypoints[b + 1] = k.elbow;
        keypoints[b + 2] = k.wrist;
        keypoints[b + 3] = k.tool;
    }
    let (l, r) = (pair.left.radii(), pair.right.radii());
    let mut statics: Vec<StaticCapsule> = pair.left.extra_capsules().to_vec();
    for c in pair.right.extra_capsules() {
        if !statics.iter().any(|s| s.name == c.name) {
            statics.push(c.clone());
        }
    }
    CapsuleSet {
        keypoints,
        radii: CapsuleRadiiPair {
            torso: l.torso,
            upper: [l.upper, r.upper],
            lower: [l.lower, r.lower],
            hand: [l.hand, r.hand],
        },
        statics,
    }
}

/// Result of [`find_first_collision`].
#[derive(Debug, Clone, PartialEq)]
pub struct FirstCollision {
    pub capsules: CapsuleSet,
    /// Index of the first interpolant within the safety margin, if any
    /// (1..=`n_interp`).
    pub index: Option<usize>,
    pub n_interp: usize,
}

/// Walks the straight keypoint path from `q0` to `q_des` in steps no
/// longer than the smallest capsule radius at each keypoint and returns the
/// first capsule set closer than `threshold`, or that of `q_des`.
pub fn find_first_collision(
    pair: &ArmPair,
    q0: &Bimanual<JointVector>,
    q_des: &Bimanual<JointVector>,
    threshold: f64,
) -> FirstCollision {
    let start = make_capsules(pair, &pair.fk(q0));
    let end = make_capsules(pair, &pair.fk(q_des));

    let mut n = 0.0_f64;
    for side in [Side::Left, Side::Right] {
        let i = side_index(side);
        let r = &start.radii;
        let slot_radius = [
            r.upper[i],
            r.upper[i].min(r.lower[i]),
            r.lower[i].min(r.hand[i]),
            r.hand[i],
        ];
        let b = arm_base(side);
        for (k, radius) in slot_radius.iter().enumerate() {
            let moved = (end.keypoints[b + k] - start.keypoints[b + k]).norm();
            n = n.max(moved / radius);
        }
    }
    let n_interp = (n.ceil() as usize).max(1);

    for i in 1..=n_interp {
        let caps = if i == n_interp {
            end.clone()
        } else {
            CapsuleSet::lerp(&start, &end, i as f64 / n_interp as f64)
        };
        if caps.any_closer_than(threshold) {
            return FirstCollision {
                capsules: caps,
                index: Some(i),
                n_interp,
            };
        }
    }
    FirstCollision {
        capsules: end,
        index: None,
        n_interp,
    }
}

/// Whether a pair takes part in this iteration. Inactive pairs (zero
/// multiplier) wake up below `d_act`; active ones let go at `d_rel`.
pub fn hysteresis_active(d: f64, lambda: f64, params: &FilterParams) -> bool {
    !(d >= params.d_rel || (d >= params.d_act && lambda == 0.0))
}

/// One XPBD contact pass over every pair followed by one link-length pass.
///
/// `lambdas` holds one non-negative multiplier per entry of
/// [`CapsuleSet::pairs`]; `lengths` the upper/forearm/hand lengths per arm.
pub fn xpbd_iter(
    caps: &mut CapsuleSet,
    lambdas: &mut [f64],
    lengths: &Bimanual<[f64; 3]>,
    params: &FilterParams,
) {
    let pairs = caps.pairs();
    assert_eq!(pairs.len(), lambdas.len(), "one multiplier per pair");
    for ((a, b), lambda) in pairs.into_iter().zip(lambdas.iter_mut()) {
        let contact = collision_check(&caps.capsule(a), &caps.capsule(b));
        if !hysteresis_active(contact.d, *lambda, params) {
            *lambda = 0.0;
            continue;
        }
        let c = contact.d - params.d_min;
        if c >= 0.0 {
            continue;
        }

        // Gradients push each capsule away from the other.
        let mut moves: Vec<(usize, Vec3)> = Vec::with_capacity(4);
        for (tag, n) in [(a, -contact.n_i), (b, -contact.n_j)] {
            let Some((s1, s2)) = CapsuleSet::endpoint_slots(tag) else {
                continue;
            };
            match tag {
                CapsuleTag::Upper(_) => moves.push((s2, n)),
                CapsuleTag::Lower(_) | CapsuleTag::Hand(_) => {
                    moves.push((s1, n * (1.0 - n.norm())));
                    moves.push((s2, n));
                }
                _ => {}
            }
        }
        let weighted: Vec<(usize, f64, Vec3)> = moves
            .into_iter()
            .map(|(slot, g)| (slot, CapsuleSet::weight(slot, &params.weights), g))
            .collect();
        let denom: f64 = params.alpha
            + weighted
                .iter()
                .map(|(_, w, g)| w * g.norm_squared())
                .sum::<f64>();
        if !(denom > 0.0) {
            continue;
        }
        let old = *lambda;
        let mut delta = -(c + params.alpha * old) / denom;
        let largest = weighted
            .iter()
            .map(|(_, w, g)| w * g.norm())
            .fold(0.0_f64, f64::max);
        if largest * delta.abs() > params.max_step {
            delta = delta.signum() * params.max_step / largest;
        }
        *lambda = (old + delta).max(0.0);
        let step = *lambda - old;
        for (slot, w, g) in weighted {
            caps.keypoints[slot] += g * (w * step);
        }
    }
    let mut link_lambdas = [0.0; 7];
    xpbd_length_iter(caps, &mut link_lambdas, lengths, params);
}

/// One XPBD pass pulling every arm link back to its reference length.
/// The torso is fixed and is left alone.
pub fn xpbd_length_iter(
    caps: &mut CapsuleSet,
    lambdas: &mut [f64; 7],
    lengths: &Bimanual<[f64; 3]>,
    params: &FilterParams,
) {
    let mut k = 0;
    for side in [Side::Left, Side::Right] {
        let base = arm_base(side);
        for (link, &rest) in lengths.get(side).iter().enumerate() {
            let (ia, ib) = (base + link, base + link + 1);
            let lambda = &mut lambdas[1 + k];
            k += 1;
            let d = caps.keypoints[ib] - caps.keypoints[ia];
            let len = d.norm();
            if len < params.length_eps {
                continue;
            }
            let c = len - rest;
            let g_b = d / len;
            let w_a = CapsuleSet::weight(ia, &params.weights);
            let w_b = CapsuleSet::weight(ib, &params.weights);
            let denom = params.alpha + w_a + w_b;
            if !(denom > 0.0) {
                continue;
            }
            let delta = -(c + params.alpha * *lambda) / denom;
            *lambda += delta;
            caps.keypoints[ia] -= g_b * (w_a * delta);
            caps.keypoints[ib] += g_b * (w_b * delta);
        }
    }
}

/// Rotates `current` by the smallest rotation taking its first column onto
/// `t`.
pub fn recover_tool(current: &Rot3, t: &Vec3) -> Result<Rot3> {
    let u_x: Vec3 = current.column(0).into_owned();
    let u_t = normalize(t)?;
    let k = u_x.cross(&u_t);
    let s = k.norm();
    let cos = u_x.dot(&u_t);
    if s < EPS_DEG {
        if cos > 0.0 {
            return Ok(*current);
        }
        return Ok(rotation_about(&perpendicular_to(&u_x), std::f64::consts::PI) * current);
    }
    Ok(rotation_about(&(k / s), s.atan2(cos)) * current)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterStatus {
    /// The path to the desired pose never entered the safety margin; the
    /// desired pose is returned as is.
    Clear,
    /// Keypoints were pushed apart and re-solved.
    Adjusted,
    /// No safe pose was found; the current pose is returned.
    Held,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutput {
    pub q: Bimanual<JointVector>,
    pub status: FilterStatus,
    /// XPBD iterations run (0 when clear).
    pub iterations: usize,
    /// Re-solve flags per arm (only for adjusted poses).
    pub flags: Option<Bimanual<RetargetFlags>>,
    /// Smallest capsule distance of the returned pose.
    pub min_distance: f64,
    /// Largest distance between a keypoint the XPBD pass produced and the
    /// same keypoint of the re-solved pose.
    pub resolve_residual: f64,
    /// Largest link-length deviation of the XPBD keypoints handed to the
    /// re-solve, meters (0 unless adjusted).
    pub link_length_error: f64,
}

/// Largest deviation of any arm link in `caps` from its reference length.
pub fn link_length_error(caps: &CapsuleSet, lengths: &Bimanual<[f64; 3]>) -> f64 {
    let mut worst = 0.0_f64;
    for side in [Side::Left, Side::Right] {
        let k = caps.arm_keypoints(side);
        for (i, rest) in lengths.get(side).iter().enumerate() {
            worst = worst.max(((k[i + 1] - k[i]).norm() - rest).abs());
        }
    }
    worst
}

/// Returns a pose near `q_des` whose capsules keep `d_min` apart, moving
/// continuously from `q0`.
pub fn safety_filter(
    pair: &ArmPair,
    q0: &Bimanual<JointVector>,
    q_des: &Bimanual<JointVector>,
    params: &FilterParams,
) -> FilterOutput {
    let threshold = params.d_min - params.tolerance;
    let first = find_first_collision(pair, q0, q_des, threshold);
    let output_distance =
        |q: &Bimanual<JointVector>| make_capsules(pair, &pair.fk(q)).min_distance();
    if first.index.is_none() {
        return FilterOutput {
            q: *q_des,
            status: FilterStatus::Clear,
            iterations: 0,
            flags: None,
            min_distance: output_distance(q_des),
            resolve_residual: 0.0,
            link_length_error: 0.0,
        };
    }

    let lengths = Bimanual::new(pair.left.link_lengths(), pair.right.link_lengths());
    let mut caps = first.capsules;
    let mut lambdas = vec![0.0; caps.pairs().len()];
    for k in 1..=params.n_iter {
        xpbd_iter(&mut caps, &mut lambdas, &lengths, params);
        if caps.any_closer_than(threshold) {
            continue;
        }
        let mut residual = 0.0_f64;
        let solved = q0.map(|side, q_start| {
            let model = pair.arm(side);
            let [s, e, w, t] = caps.arm_keypoints(side);
            let desired_tool = model.tool_orientation(q_des.get(side));
            let hand = recover_tool(&desired_tool, &(t - w)).unwrap_or(desired_tool);
            let input = ArmInput {
                shoulder: s,
                elbow: e,
                wrist: w,
                hand,
            };
            let r = sew_mimic(model, q_start, &input);
            let kp = model.fk(&r.q);
            for (a, b) in [(kp.elbow, e), (kp.wrist, w), (kp.tool, t)] {
                residual = residual.max((a - b).norm());
            }
            r
        });
        let q = solved.map(|_, r| r.q);
        return FilterOutput {
            q,
            status: FilterStatus::Adjusted,
            iterations: k,
            flags: Some(solved.map(|_, r| r.flags)),
            min_distance: output_distance(&q),
            resolve_residual: residual,
            link_length_error: link_length_error(&caps, &lengths),
        };
    }
    FilterOutput {
        q: *q0,
        status: FilterStatus::Held,
        iterations: params.n_iter,
        flags: None,
        min_distance: output_distance(q0),
        resolve_residual: 0.0,
        link_length_error: 0.0,
    }
}
