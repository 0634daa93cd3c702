//! 7-DoF serial arm description, forward kinematics and joint bounding.
//!
//! Joints are numbered 1..=7 as in the usual humanoid arm layout: three
//! shoulder joints, the elbow, forearm roll and two wrist joints. Frame `i`
//! is the link frame after joint `i`; frame 0 is the body-centric base frame.
//!
//! ```text
//! R^{i-1,i}(q) = R_local^{i-1,i} * R(h_i, q_i)
//! o_i          = o_{i-1} + R^{0,i-1}(q) * p_local^{i-1,i}
//! T(q)         = R^{0,7}(q) * R_local^{7,T} * R_align
//! ```
//!
//! Descriptions are loaded from TOML; see `docs/robot-format.md`.

use std::f64::consts::PI;
use std::ops::{Index, IndexMut};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::euler::SignedAxis;
use crate::geometry::{
    is_rotation, make_frame, normalize, orthonormalize, rotation_about, Frame, Rot3, Vec3,
};

/// Limit violations closer than this count as equal in [`RobotArmModel::bound_joints`].
pub const VIOLATION_TIE: f64 = 1e-9;

pub const NUM_JOINTS: usize = 7;
pub const FORMAT_VERSION: u32 = 1;

/// Consecutive joint axes must be perpendicular to this tolerance.
const PERPENDICULAR_TOL: f64 = 1e-6;

/// Joint angles in radians, stored 0-based (`q[0]` is joint 1).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JointVector(pub [f64; NUM_JOINTS]);

impl JointVector {
    pub fn zeros() -> Self {
        Self([0.0; NUM_JOINTS])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl Index<usize> for JointVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for JointVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl std::ops::Index<std::ops::RangeFrom<usize>> for JointVector {
    type Output = [f64];
    fn index(&self, r: std::ops::RangeFrom<usize>) -> &[f64] {
        &self.0[r]
    }
}

impl std::ops::IndexMut<std::ops::RangeFrom<usize>> for JointVector {
    fn index_mut(&mut self, r: std::ops::RangeFrom<usize>) -> &mut [f64] {
        &mut self.0[r]
    }
}

impl From<[f64; NUM_JOINTS]> for JointVector {
    fn from(q: [f64; NUM_JOINTS]) -> Self {
        Self(q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WristType {
    /// End-effector mount normal parallel to the 7th joint axis.
    Parallel,
    /// Mount normal perpendicular to the 7th joint axis; solved by Euler
    /// decomposition of the last three joints.
    Perpendicular,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Joint {
    /// Unit rotation axis in the joint's own frame.
    pub axis: Vec3,
    /// Fixed rotation from the predecessor frame.
    pub rotation: Rot3,
    /// Fixed offset from the predecessor origin, in the predecessor frame.
    pub translation: Vec3,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapsuleRadii {
    pub torso: f64,
    pub upper: f64,
    pub lower: f64,
    pub hand: f64,
}

/// A static capsule attached to the base frame (e.g. shoulder volumes).
#[derive(Debug, Clone, PartialEq)]
pub struct StaticCapsule {
    pub name: String,
    pub p1: Vec3,
    pub p2: Vec3,
    pub radius: f64,
    /// Arm capsule tags (e.g. `"upper_rt"`) this capsule is not checked
    /// against.
    pub exclude: Vec<String>,
}

/// Forward-kinematics keypoints of one arm, in the base frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotKeypoints {
    pub shoulder: Vec3,
    pub elbow: Vec3,
    pub wrist: Vec3,
    pub tool: Vec3,
    /// End-effector orientation `T(q)`.
    pub tool_orientation: Rot3,
}

#[derive(Debug, Clone)]
pub struct RobotArmModel {
    name: String,
    side: Side,
    wrist_type: WristType,
    joints: [Joint; NUM_JOINTS],
    r_align: Rot3,
    tool_rotation: Rot3,
    tool_offset: Vec3,
    keypoint_joints: [usize; 3],
    radii: CapsuleRadii,
    torso_endpoints: [Vec3; 2],
    extra_capsules: Vec<StaticCapsule>,
    base: Frame,
    wrist_axes: Option<[SignedAxis; 3]>,
}

/// Outcome of [`RobotArmModel::bound_joints`].
#[derive(Debug, Clone, PartialEq)]
pub struct Bounded<const N: usize> {
    pub candidates: Vec<[f64; N]>,
    /// True when no candidate was inside the limits and one was clamped.
    pub clamped: bool,
}

impl RobotArmModel {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Loads one of the descriptions shipped with the crate.
    pub fn bundled(name: &str) -> Result<Self> {
        let text = bundled_source(name)
            .ok_or_else(|| Error::Model(format!("no bundled model named {name:?}")))?;
        Self::from_toml(text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: ModelFile = toml::from_str(text).map_err(|e| Error::Parse {
            what: "robot description".into(),
            message: e.to_string(),
        })?;
        file.build()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn wrist_type(&self) -> WristType {
        self.wrist_type
    }

    /// Joint `i`, 1-based.
    pub fn joint(&self, i: usize) -> &Joint {
        &self.joints[i - 1]
    }

    pub fn joints(&self) -> &[Joint; NUM_JOINTS] {
        &self.joints
    }

    pub fn r_align(&self) -> &Rot3 {
        &self.r_align
    }

    pub fn tool_rotation(&self) -> &Rot3 {
        &self.tool_rotation
    }

    pub fn radii(&self) -> &CapsuleRadii {
        &self.radii
    }

    pub fn torso_endpoints(&self) -> &[Vec3; 2] {
        &self.torso_endpoints
    }

    pub fn extra_capsules(&self) -> &[StaticCapsule] {
        &self.extra_capsules
    }

    /// Transform from the description's native frame into the base frame.
    pub fn base(&self) -> &Frame {
        &self.base
    }

    pub(crate) fn wrist_axes(&self) -> Option<[SignedAxis; 3]> {
        self.wrist_axes
    }

    /// Euler order of the last three joints for perpendicular wrists
    /// (e.g. `"ZYX"`).
    pub fn wrist_euler_order(&self) -> Option<String> {
        self.wrist_axes
            .map(|a| a.iter().map(SignedAxis::letter).collect())
    }

    pub fn limits(&self, i: usize) -> (f64, f64) {
        let j = self.joint(i);
        (j.lower, j.upper)
    }

    /// Returns a copy with joint `i` (1-based) limited to `[lower, upper]`.
    pub fn with_limits(&self, i: usize, lower: f64, upper: f64) -> Result<Self> {
        if !(1..=NUM_JOINTS).contains(&i) {
            return Err(Error::JointIndex(i));
        }
        if !(lower < upper) {
            return Err(Error::ModelInvariant {
                name: self.name.clone(),
                joint: i,
                reason: format!("lower limit {lower} is not below upper limit {upper}"),
            });
        }
        let mut m = self.clone();
        m.joints[i - 1].lower = lower;
        m.joints[i - 1].upper = upper;
        Ok(m)
    }

    /// Returns a copy with every joint limited to `[lower, upper]`.
    pub fn with_all_limits(&self, lower: f64, upper: f64) -> Result<Self> {
        (1..=NUM_JOINTS).try_fold(self.clone(), |m, i| m.with_limits(i, lower, upper))
    }

    pub fn within_limits(&self, q: &JointVector) -> bool {
        self.joints
            .iter()
            .zip(q.0)
            .all(|(j, v)| v >= j.lower && v <= j.upper)
    }

    pub fn clamp(&self, q: &JointVector) -> JointVector {
        let mut out = *q;
        for (v, j) in out.0.iter_mut().zip(&self.joints) {
            *v = v.clamp(j.lower, j.upper);
        }
        out
    }

    /// `R^{0,i}(q)` for `i` in `0..=7`.
    pub fn rotation_to_frame(&self, q: &JointVector, i: usize) -> Result<Rot3> {
        if i > NUM_JOINTS {
            return Err(Error::JointIndex(i));
        }
        let mut r = Rot3::identity();
        for (j, joint) in self.joints.iter().take(i).enumerate() {
            r = r * joint.rotation * rotation_about(&joint.axis, q[j]);
        }
        Ok(r)
    }

    /// Joint `i`'s axis expressed in the base frame at configuration `q`.
    pub fn axis_in_base(&self, q: &JointVector, i: usize) -> Result<Vec3> {
        if !(1..=NUM_JOINTS).contains(&i) {
            return Err(Error::JointIndex(i));
        }
        Ok(self.rotation_to_frame(q, i)? * self.joint(i).axis)
    }

    /// Cumulative rotations `R^{0,i}` and origins `o_i` for `i = 0..=7`.
    pub fn frames(&self, q: &JointVector) -> ([Rot3; NUM_JOINTS + 1], [Vec3; NUM_JOINTS + 1]) {
        let mut rots = [Rot3::identity(); NUM_JOINTS + 1];
        let mut origins = [Vec3::zeros(); NUM_JOINTS + 1];
        for (i, joint) in self.joints.iter().enumerate() {
            origins[i + 1] = origins[i] + rots[i] * joint.translation;
            rots[i + 1] = rots[i] * joint.rotation * rotation_about(&joint.axis, q[i]);
        }
        (rots, origins)
    }

    /// End-effector orientation `T(q)`.
    pub fn tool_orientation(&self, q: &JointVector) -> Rot3 {
        let (rots, _) = self.frames(q);
        rots[NUM_JOINTS] * self.tool_rotation * self.r_align
    }

    pub fn fk(&self, q: &JointVector) -> RobotKeypoints {
        let (rots, origins) = self.frames(q);
        let [s, e, w] = self.keypoint_joints;
        RobotKeypoints {
            shoulder: origins[s],
            elbow: origins[e],
            wrist: origins[w],
            tool: origins[NUM_JOINTS] + rots[NUM_JOINTS] * self.tool_offset,
            tool_orientation: rots[NUM_JOINTS] * self.tool_rotation * self.r_align,
        }
    }

    /// Upper-arm, forearm and hand link lengths implied by the description.
    ///
    /// These are only configuration-independent when the keypoint joints sit
    /// on their neighbours' axes, as in the bundled descriptions.
    pub fn link_lengths(&self) -> [f64; 3] {
        let k = self.fk(&JointVector::zeros());
        [
            (k.elbow - k.shoulder).norm(),
            (k.wrist - k.elbow).norm(),
            (k.tool - k.wrist).norm(),
        ]
    }

    /// Filters candidate angle tuples for `joints` (1-based) against the
    /// limits.
    ///
    /// Each angle is first shifted by multiples of `2 pi` to the in-limit
    /// representative nearest `q0`. With several candidates, those outside
    /// the limits are dropped; if none survive, those with the smallest
    /// total violation (ties within [`VIOLATION_TIE`]) are clamped and
    /// `clamped` is set. A single candidate
    /// is always clamped.
    pub fn bound_joints<const N: usize>(
        &self,
        candidates: &[[f64; N]],
        joints: [usize; N],
        q0: &JointVector,
    ) -> Bounded<N> {
        assert!(!candidates.is_empty(), "bound_joints needs a candidate");
        let shifted: Vec<[f64; N]> = candidates
            .iter()
            .map(|c| {
                let mut out = *c;
                for (v, &j) in out.iter_mut().zip(&joints) {
                    *v = self.nearest_representative(j, *v, q0[j - 1]);
                }
                out
            })
            .collect();

        let violation = |c: &[f64; N]| -> f64 {
            c.iter()
                .zip(&joints)
                .map(|(&v, &j)| {
                    let (lo, hi) = self.limits(j);
                    (lo - v).max(0.0) + (v - hi).max(0.0)
                })
                .sum()
        };
        let clamp = |c: &[f64; N]| {
            let mut out = *c;
            for (v, &j) in out.iter_mut().zip(&joints) {
                let (lo, hi) = self.limits(j);
                *v = v.clamp(lo, hi);
            }
            out
        };

        if shifted.len() == 1 {
            return Bounded {
                clamped: violation(&shifted[0]) > 0.0,
                candidates: vec![clamp(&shifted[0])],
            };
        }
        let inside: Vec<_> = shifted
            .iter()
            .copied()
            .filter(|c| violation(c) == 0.0)
            .collect();
        if !inside.is_empty() {
            return Bounded {
                candidates: inside,
                clamped: false,
            };
        }
        // Candidates tied on violation (mirror branches straddling a limit)
        // are all returned so the caller's nearest-to-q0 choice decides.
        let least = shifted.iter().map(violation).fold(f64::INFINITY, f64::min);
        Bounded {
            candidates: shifted
                .iter()
                .filter(|c| violation(c) <= least + VIOLATION_TIE)
                .map(clamp)
                .collect(),
            clamped: true,
        }
    }

    /// `angle + 2 pi k` inside joint `j`'s limits and closest to `reference`,
    /// or the representative with least violation if none fits.
    fn nearest_representative(&self, j: usize, angle: f64, reference: f64) -> f64 {
        let (lo, hi) = self.limits(j);
        let mut best = angle;
        let mut best_key = (f64::INFINITY, f64::INFINITY);
        for k in -3..=3 {
            let v = angle + 2.0 * PI * k as f64;
            let violation = (lo - v).max(0.0) + (v - hi).max(0.0);
            let key = (violation, (v - reference).abs());
            if key.0 < best_key.0 || (key.0 == best_key.0 && key.1 < best_key.1) {
                best = v;
                best_key = key;
            }
        }
        best
    }
}

/// Left and right arms of one robot.
#[derive(Debug, Clone)]
pub struct ArmPair {
    pub left: RobotArmModel,
    pub right: RobotArmModel,
}

impl ArmPair {
    pub fn new(left: RobotArmModel, right: RobotArmModel) -> Result<Self> {
        if left.side != Side::Left || right.side != Side::Right {
            return Err(Error::Model(format!(
                "arm pair needs a left and a right arm, got {:?} and {:?}",
                left.side, right.side
            )));
        }
        let same_torso = left
            .torso_endpoints
            .iter()
            .zip(&right.torso_endpoints)
            .all(|(a, b)| (a - b).norm() < 1e-9)
            && (left.radii.torso - right.radii.torso).abs() < 1e-12;
        if !same_torso {
            return Err(Error::Model(
                "left and right descriptions disagree on the torso capsule".into(),
            ));
        }
        Ok(Self { left, right })
    }

    /// The bundled pair for a wrist type.
    pub fn bundled(wrist: WristType) -> Result<Self> {
        let stem = match wrist {
            WristType::Parallel => "parallel7",
            WristType::Perpendicular => "perpendicular7",
        };
        Self::new(
            RobotArmModel::bundled(&format!("{stem}_left"))?,
            RobotArmModel::bundled(&format!("{stem}_right"))?,
        )
    }

    pub fn arm(&self, side: Side) -> &RobotArmModel {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }
}

/// A value per arm.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Bimanual<T> {
    pub left: T,
    pub right: T,
}

impl<T> Bimanual<T> {
    pub fn new(left: T, right: T) -> Self {
        Self { left, right }
    }

    pub fn get(&self, side: Side) -> &T {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    pub fn get_mut(&mut self, side: Side) -> &mut T {
        match side {
            Side::Left => &mut self.left,
            Side::Right => &mut self.right,
        }
    }

    pub fn map<U>(&self, mut f: impl FnMut(Side, &T) -> U) -> Bimanual<U> {
        Bimanual {
            left: f(Side::Left, &self.left),
            right: f(Side::Right, &self.right),
        }
    }
}

impl ArmPair {
    pub fn fk(&self, q: &Bimanual<JointVector>) -> Bimanual<RobotKeypoints> {
        q.map(|side, q| self.arm(side).fk(q))
    }

    pub fn clamp(&self, q: &Bimanual<JointVector>) -> Bimanual<JointVector> {
        q.map(|side, q| self.arm(side).clamp(q))
    }
}

pub const BUNDLED_MODELS: [&str; 4] = [
    "parallel7_left",
    "parallel7_right",
    "perpendicular7_left",
    "perpendicular7_right",
];

pub fn bundled_source(name: &str) -> Option<&'static str> {
    Some(match name {
        "parallel7_left" => include_str!("../models/parallel7_left.toml"),
        "parallel7_right" => include_str!("../models/parallel7_right.toml"),
        "perpendicular7_left" => include_str!("../models/perpendicular7_left.toml"),
        "perpendicular7_right" => include_str!("../models/perpendicular7_right.toml"),
        _ => return None,
    })
}

// ---------------------------------------------------------------------------
// File schema

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format_version: u32,
    name: String,
    side: Side,
    wrist: WristType,
    r_align: RotationSpec,
    #[serde(default)]
    tool_rotation: Option<RotationSpec>,
    tool_offset: [f64; 3],
    #[serde(default)]
    keypoints: Option<KeypointJoints>,
    capsules: CapsuleFile,
    #[serde(default)]
    reframe: Option<ReframeFile>,
    joints: Vec<JointFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct KeypointJoints {
    shoulder: usize,
    elbow: usize,
    wrist: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CapsuleFile {
    torso: f64,
    upper: f64,
    lower: f64,
    hand: f64,
    torso_endpoints: [[f64; 3]; 2],
    #[serde(default)]
    extra: Vec<ExtraCapsuleFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExtraCapsuleFile {
    name: String,
    p1: [f64; 3],
    p2: [f64; 3],
    radius: f64,
    #[serde(default)]
    exclude: Vec<String>,
}

/// Robot-native shoulder and torso keypoints used to rebuild the base frame.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReframeFile {
    left_shoulder: [f64; 3],
    right_shoulder: [f64; 3],
    torso: [f64; 3],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct JointFile {
    axis: [f64; 3],
    #[serde(default)]
    rotation: Option<RotationSpec>,
    translation: [f64; 3],
    limits: [f64; 2],
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RotationSpec {
    /// Row-major 3x3 matrix.
    Matrix {
        matrix: [f64; 9],
    },
    AxisAngle {
        axis: [f64; 3],
        angle: f64,
    },
}

impl RotationSpec {
    fn to_rot(&self, what: &str) -> Result<Rot3> {
        match self {
            RotationSpec::Matrix { matrix } => {
                let r = Rot3::from_row_slice(matrix);
                let ortho = (r.transpose() * r - Rot3::identity()).norm();
                if ortho > 1e-6 || (r.determinant() - 1.0).abs() > 1e-6 {
                    return Err(Error::Model(format!("{what} is not a rotation matrix")));
                }
                Ok(orthonormalize(&r))
            }
            RotationSpec::AxisAngle { axis, angle } => {
                let axis = normalize(&Vec3::from(*axis))
                    .map_err(|_| Error::Model(format!("{what} has a zero axis")))?;
                Ok(rotation_about(&axis, *angle))
            }
        }
    }
}

fn vec3(a: [f64; 3]) -> Vec3 {
    Vec3::from(a)
}

impl ModelFile {
    fn build(self) -> Result<RobotArmModel> {
        let name = self.name.clone();
        let invariant = |joint: usize, reason: String| Error::ModelInvariant {
            name: name.clone(),
            joint,
            reason,
        };

        if self.format_version != FORMAT_VERSION {
            return Err(Error::Model(format!(
                "unsupported format_version {} (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        if self.joints.len() != NUM_JOINTS {
            return Err(Error::Model(format!(
                "expected {NUM_JOINTS} joints, found {}",
                self.joints.len()
            )));
        }

        let mut joints = [Joint {
            axis: Vec3::x(),
            rotation: Rot3::identity(),
            translation: Vec3::zeros(),
            lower: 0.0,
            upper: 0.0,
        }; NUM_JOINTS];
        for (i, jf) in self.joints.iter().enumerate() {
            let n = i + 1;
            let axis = normalize(&vec3(jf.axis))
                .map_err(|_| invariant(n, "rotation axis is zero".into()))?;
            let rotation = match &jf.rotation {
                Some(spec) => spec.to_rot(&format!("joint {n} rotation"))?,
                None => Rot3::identity(),
            };
            let [lower, upper] = jf.limits;
            if !(lower < upper) {
                return Err(invariant(
                    n,
                    format!("lower limit {lower} is not below upper limit {upper}"),
                ));
            }
            joints[i] = Joint {
                axis,
                rotation,
                translation: vec3(jf.translation),
                lower,
                upper,
            };
        }

        for i in 1..NUM_JOINTS {
            let next = joints[i].rotation * joints[i].axis;
            let dot = joints[i - 1].axis.dot(&next);
            if dot.abs() >= PERPENDICULAR_TOL {
                return Err(invariant(
                    i + 1,
                    format!("axis is not perpendicular to joint {i} (cos = {dot:.3e})"),
                ));
            }
        }

        let keypoint_joints = match &self.keypoints {
            Some(k) => [k.shoulder, k.elbow, k.wrist],
            None => [1, 4, 6],
        };
        if keypoint_joints.iter().any(|&j| j == 0 || j > NUM_JOINTS) {
            return Err(Error::Model(format!(
                "keypoint joints {keypoint_joints:?} out of range"
            )));
        }

        let radii = CapsuleRadii {
            torso: self.capsules.torso,
            upper: self.capsules.upper,
            lower: self.capsules.lower,
            hand: self.capsules.hand,
        };
        if [radii.torso, radii.upper, radii.lower, radii.hand]
            .iter()
            .any(|r| !(*r > 0.0))
        {
            return Err(Error::Model("capsule radii must be positive".into()));
        }
        let mut torso_endpoints = self.capsules.torso_endpoints.map(vec3);
        let mut extra_capsules: Vec<StaticCapsule> = self
            .capsules
            .extra
            .iter()
            .map(|c| StaticCapsule {
                name: c.name.clone(),
                p1: vec3(c.p1),
                p2: vec3(c.p2),
                radius: c.radius,
                exclude: c.exclude.clone(),
            })
            .collect();
        if extra_capsules.iter().any(|c| !(c.radius > 0.0)) {
            return Err(Error::Model("capsule radii must be positive".into()));
        }

        // Re-express everything attached to the native robot frame in the
        // body-centric base frame built from the robot's own keypoints.
        let base = match &self.reframe {
            Some(r) => make_frame(
                &vec3(r.left_shoulder),
                &vec3(r.right_shoulder),
                &vec3(r.torso),
            )?,
            None => Frame::identity(),
        };
        if self.reframe.is_some() {
            let c = base.orientation.transpose();
            joints[0].rotation = c * joints[0].rotation;
            joints[0].translation = base.from_parent(&joints[0].translation);
            for p in torso_endpoints.iter_mut() {
                *p = base.from_parent(p);
            }
            for cap in extra_capsules.iter_mut() {
                cap.p1 = base.from_parent(&cap.p1);
                cap.p2 = base.from_parent(&cap.p2);
            }
        }

        let r_align = self.r_align.to_rot("r_align")?;
        let tool_rotation = match &self.tool_rotation {
            Some(spec) => spec.to_rot("tool_rotation")?,
            None => Rot3::identity(),
        };
        debug_assert!(is_rotation(&r_align) && is_rotation(&tool_rotation));

        let wrist_axes = match self.wrist {
            WristType::Parallel => None,
            WristType::Perpendicular => {
                let a5 = joints[4].axis;
                let a6 = joints[5].rotation * joints[5].axis;
                let a7 = joints[5].rotation * joints[6].rotation * joints[6].axis;
                let mut axes = [SignedAxis {
                    index: 0,
                    sign: 1.0,
                }; 3];
                for (slot, (n, v)) in axes.iter_mut().zip([(5, a5), (6, a6), (7, a7)]) {
                    *slot = SignedAxis::from_vec(&v, PERPENDICULAR_TOL).ok_or_else(|| {
                        invariant(
                            n,
                            "perpendicular wrist axes must map onto coordinate axes of frame 5"
                                .into(),
                        )
                    })?;
                }
                Some(axes)
            }
        };

        Ok(RobotArmModel {
            name: self.name,
            side: self.side,
            wrist_type: self.wrist,
            joints,
            r_align,
            tool_rotation,
            tool_offset: vec3(self.tool_offset),
            keypoint_joints,
            radii,
            torso_endpoints,
            extra_capsules,
            base,
            wrist_axes,
        })
    }
}
