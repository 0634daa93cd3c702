//! Keypoint trajectories stored as JSON lines.
//!
//! Each non-blank line is one bimanual frame:
//!
//! ```json
//! {"t": 0.01, "torso": [0, 0, 1.0],
//!  "left":  {"shoulder": [..], "elbow": [..], "wrist": [..], "hand_quat": [x, y, z, w]},
//!  "right": {"shoulder": [..], "elbow": [..], "wrist": [..], "hand_matrix": [9 row-major]}}
//! ```
//!
//! A hand may instead (or additionally) carry `index` and `pinky` knuckle
//! positions, from which the orientation is built when no explicit one is
//! given. See `docs/trajectory-format.md`.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::{Quaternion, Rotation3, UnitQuaternion};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{is_rotation, orthonormalize, Rot3, Vec3, EPS_DEG};
use crate::retarget::{HumanInput, RawArm};

/// Allowed deviation of a file quaternion's norm from one.
const QUAT_NORM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryFrame {
    /// Seconds.
    pub t: f64,
    pub input: HumanInput,
    /// Some limb is shorter than the degeneracy threshold.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct KeypointTrajectory {
    pub frames: Vec<TrajectoryFrame>,
}

impl KeypointTrajectory {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Builds a trajectory, checking that timestamps strictly increase.
    pub fn from_inputs(items: impl IntoIterator<Item = (f64, HumanInput)>) -> Result<Self> {
        let mut frames: Vec<TrajectoryFrame> = Vec::new();
        for (i, (t, input)) in items.into_iter().enumerate() {
            check_time(frames.last().map(|f| f.t), t, i + 1)?;
            frames.push(TrajectoryFrame {
                t,
                input,
                degenerate: is_degenerate(&input),
            });
        }
        Ok(Self { frames })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(BufReader::new(file)).map_err(|e| match e {
            Error::Io { source, .. } => Error::io(path, source),
            other => other,
        })
    }

    pub fn read(reader: impl BufRead) -> Result<Self> {
        let mut frames: Vec<TrajectoryFrame> = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| Error::io("<trajectory>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let record: FrameRecord =
                serde_json::from_str(&line).map_err(|e| Error::Trajectory {
                    line: line_no,
                    message: e.to_string(),
                })?;
            let frame = record.into_frame().map_err(|message| Error::Trajectory {
                line: line_no,
                message,
            })?;
            check_time(frames.last().map(|f| f.t), frame.t, line_no)?;
            frames.push(frame);
        }
        Ok(Self { frames })
    }

    pub fn write(&self, mut writer: impl Write) -> std::io::Result<()> {
        for f in &self.frames {
            let record = FrameRecord::from_frame(f);
            serde_json::to_writer(&mut writer, &record)?;
            writer.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }
}

fn check_time(prev: Option<f64>, t: f64, line: usize) -> Result<()> {
    if !t.is_finite() {
        return Err(Error::Trajectory {
            line,
            message: format!("timestamp {t} is not finite"),
        });
    }
    if let Some(p) = prev {
        if !(t > p) {
            return Err(Error::Trajectory {
                line,
                message: format!("timestamp {t} does not increase (previous {p})"),
            });
        }
    }
    Ok(())
}

/// Some limb is no longer than the degeneracy threshold.
pub fn is_degenerate(input: &HumanInput) -> bool {
    [&input.left, &input.right]
        .iter()
        .any(|a| (a.elbow - a.shoulder).norm() <= EPS_DEG || (a.wrist - a.elbow).norm() <= EPS_DEG)
}

pub fn quat_to_rot(q: [f64; 4]) -> std::result::Result<Rot3, String> {
    let [x, y, z, w] = q;
    let raw = Quaternion::new(w, x, y, z);
    let n = raw.norm();
    if !((n - 1.0).abs() < QUAT_NORM_TOL) {
        return Err(format!("quaternion norm {n} is not 1"));
    }
    Ok(*UnitQuaternion::from_quaternion(raw)
        .to_rotation_matrix()
        .matrix())
}

/// `[x, y, z, w]` with `w >= 0`.
pub fn rot_to_quat(r: &Rot3) -> [f64; 4] {
    let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*r));
    let c = q.quaternion().coords;
    let s = if c.w < 0.0 { -1.0 } else { 1.0 };
    [s * c.x, s * c.y, s * c.z, s * c.w]
}

fn matrix_to_rot(m: [f64; 9]) -> std::result::Result<Rot3, String> {
    let r = Rot3::from_row_slice(&m);
    let ortho = (r.transpose() * r - Rot3::identity()).norm();
    if ortho > 1e-6 || (r.determinant() - 1.0).abs() > 1e-6 {
        return Err("hand_matrix is not a rotation".into());
    }
    Ok(if is_rotation(&r) {
        r
    } else {
        orthonormalize(&r)
    })
}

/// One arm as written in trajectory files and sandbox updates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmRecord {
    pub shoulder: [f64; 3],
    pub elbow: [f64; 3],
    pub wrist: [f64; 3],
    /// `[x, y, z, w]`, unit norm.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hand_quat: Option<[f64; 4]>,
    /// Row-major rotation matrix.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hand_matrix: Option<[f64; 9]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pinky: Option<[f64; 3]>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameRecord {
    t: f64,
    torso: [f64; 3],
    left: ArmRecord,
    right: ArmRecord,
}

impl ArmRecord {
    /// Validates the record; `side` prefixes error messages.
    pub fn into_arm(self, side: &str) -> std::result::Result<RawArm, String> {
        let hand = match (self.hand_quat, self.hand_matrix) {
            (Some(_), Some(_)) => {
                return Err(format!("{side}: give hand_quat or hand_matrix, not both"))
            }
            (Some(q), None) => Some(quat_to_rot(q).map_err(|e| format!("{side}: {e}"))?),
            (None, Some(m)) => Some(matrix_to_rot(m).map_err(|e| format!("{side}: {e}"))?),
            (None, None) => None,
        };
        if hand.is_none() && (self.index.is_none() || self.pinky.is_none()) {
            return Err(format!(
                "{side}: needs a hand orientation or both index and pinky keypoints"
            ));
        }
        Ok(RawArm {
            shoulder: Vec3::from(self.shoulder),
            elbow: Vec3::from(self.elbow),
            wrist: Vec3::from(self.wrist),
            hand,
            index: self.index.map(Vec3::from),
            pinky: self.pinky.map(Vec3::from),
        })
    }

    pub fn from_arm(a: &RawArm) -> Self {
        let arr = |v: &Vec3| [v.x, v.y, v.z];
        Self {
            shoulder: arr(&a.shoulder),
            elbow: arr(&a.elbow),
            wrist: arr(&a.wrist),
            hand_quat: a.hand.as_ref().map(rot_to_quat),
            hand_matrix: None,
            index: a.index.as_ref().map(arr),
            pinky: a.pinky.as_ref().map(arr),
        }
    }
}

impl FrameRecord {
    fn into_frame(self) -> std::result::Result<TrajectoryFrame, String> {
        let input = HumanInput {
            left: self.left.into_arm("left")?,
            right: self.right.into_arm("right")?,
            torso: Vec3::from(self.torso),
        };
        Ok(TrajectoryFrame {
            t: self.t,
            input,
            degenerate: is_degenerate(&input),
        })
    }

    fn from_frame(f: &TrajectoryFrame) -> Self {
        let t = &f.input.torso;
        Self {
            t: f.t,
            torso: [t.x, t.y, t.z],
            left: ArmRecord::from_arm(&f.input.left),
            right: ArmRecord::from_arm(&f.input.right),
        }
    }
}
