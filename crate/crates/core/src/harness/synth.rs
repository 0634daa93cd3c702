//! Synthetic motions.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{make_frame, normalize, rotation_about, Rot3, Vec3};
use crate::harness::random_unit;
use crate::harness::trajectory::KeypointTrajectory;
use crate::model::{ArmPair, Bimanual, JointVector, Side};
use crate::retarget::{HumanInput, RawArm};

/// Human body used for synthetic motions, in a world frame with `z` up and
/// the person facing `+x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HumanBody {
    /// Midpoint between the shoulders.
    pub chest: Vec3,
    pub shoulder_width: f64,
    /// Torso anchor distance below the chest point.
    pub torso_drop: f64,
    pub upper_arm: f64,
    pub forearm: f64,
}

impl Default for HumanBody {
    fn default() -> Self {
        Self {
            chest: Vec3::new(0.0, 0.0, 1.4),
            shoulder_width: 0.38,
            torso_drop: 0.45,
            upper_arm: 0.29,
            forearm: 0.26,
        }
    }
}

impl HumanBody {
    pub fn shoulder(&self, side: Side) -> Vec3 {
        let y = 0.5 * self.shoulder_width;
        self.chest
            + match side {
                Side::Left => Vec3::new(0.0, y, 0.0),
                Side::Right => Vec3::new(0.0, -y, 0.0),
            }
    }

    pub fn torso(&self) -> Vec3 {
        self.chest - Vec3::new(0.0, 0.0, self.torso_drop)
    }

    /// Elbow placing the wrist at `wrist` with the elbow bent toward
    /// `swivel` (projected off the shoulder-wrist line). Wrists out of reach
    /// are pulled in along the shoulder-wrist line.
    pub fn elbow_for(&self, side: Side, wrist: &Vec3, swivel: &Vec3) -> (Vec3, Vec3) {
        let s = self.shoulder(side);
        let (a, b) = (self.upper_arm, self.forearm);
        let mut to_w = wrist - s;
        let mut dist = to_w.norm();
        let reach = 0.999 * (a + b);
        let min_reach = 1.001 * (a - b).abs();
        if dist > reach || dist < min_reach {
            let target = dist.clamp(min_reach, reach);
            to_w *= target / dist;
            dist = target;
        }
        let axis = to_w / dist;
        let along = (a * a - b * b + dist * dist) / (2.0 * dist);
        let radius = (a * a - along * along).max(0.0).sqrt();
        let perp = swivel - axis * axis.dot(swivel);
        let perp = normalize(&perp).unwrap_or_else(|_| axis.cross(&Vec3::y()).normalize());
        (s + axis * along + perp * radius, s + to_w)
    }
}

/// Both fists circling in front of the chest with opposite phase, the
/// "rolling punch" arm exercise.
///
/// Wrists move on circles in a vertical plane parallel to the chest's
/// sagittal plane. The default geometry draws each wrist past the midline
/// so that the forearms cross.
///
/// Circle points beyond the arm's reach are pulled in along the
/// shoulder-wrist line, so with the defaults the far side of each circle
/// is flattened.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RollingPunch {
    pub duration: f64,
    /// Frames per second.
    pub rate: f64,
    /// Full turns over the whole duration.
    pub rotations: f64,
    /// Circle radius, meters.
    pub radius: f64,
    /// Circle center ahead of the chest.
    pub forward: f64,
    /// Circle center below the chest.
    pub drop: f64,
    /// How far each wrist's circle center sits past the midline.
    pub cross: f64,
    /// Height difference between the left and right circle centers.
    pub stagger: f64,
    /// Peak wrist flexion added to the hand orientation, radians.
    pub wrist_bend: f64,
    pub body: HumanBody,
}

impl Default for RollingPunch {
    fn default() -> Self {
        Self {
            duration: 10.0,
            rate: 100.0,
            rotations: 10.0,
            radius: 0.12,
            forward: 0.5,
            drop: 0.25,
            cross: 0.03,
            stagger: 0.0,
            wrist_bend: 0.3,
            body: HumanBody::default(),
        }
    }
}

impl RollingPunch {
    pub fn frame_count(&self) -> usize {
        (self.duration * self.rate).round() as usize
    }

    /// Capture sample at time `t`.
    pub fn sample(&self, t: f64) -> HumanInput {
        let phase = TAU * self.rotations * t / self.duration;
        let body = &self.body;
        let arm = |side: Side| {
            let (sign, offset, center_dz) = match side {
                Side::Left => (1.0, 0.0, 0.5 * self.stagger),
                Side::Right => (-1.0, PI, -0.5 * self.stagger),
            };
            let angle = phase + offset;
            let center =
                body.chest + Vec3::new(self.forward, -sign * self.cross, -self.drop + center_dz);
            let wrist = center + self.radius * Vec3::new(angle.cos(), 0.0, angle.sin());
            // Elbows bend outward and down.
            let swivel = Vec3::new(0.0, sign, -1.0);
            let (elbow, wrist) = body.elbow_for(side, &wrist, &swivel);
            let hand = fist(&(wrist - elbow), self.wrist_bend * angle.sin());
            RawArm::new(body.shoulder(side), elbow, wrist, hand)
        };
        HumanInput {
            left: arm(Side::Left),
            right: arm(Side::Right),
            torso: body.torso(),
        }
    }

    pub fn generate(&self) -> KeypointTrajectory {
        let n = self.frame_count();
        KeypointTrajectory::from_inputs((0..n).map(|i| {
            let t = i as f64 / self.rate;
            (t, self.sample(t))
        }))
        .expect("timestamps increase")
    }
}

/// Hand orientation continuing the forearm with the palm facing down,
/// flexed about the thumb-side axis by `bend`.
fn fist(forearm: &Vec3, bend: f64) -> Rot3 {
    let x = forearm.normalize();
    let down = -Vec3::z();
    let y = normalize(&(down - x * x.dot(&down))).unwrap_or_else(|_| Vec3::y());
    let z = x.cross(&y);
    let base = Rot3::from_columns(&[x, y, z]);
    base * rotation_about(&Vec3::z(), bend)
}

/// A capture sample built from robot forward kinematics, with the torso
/// anchor chosen so that the synced body frame is the robot base frame.
/// Retargeting it with `pair` from `q` reproduces `q`.
///
/// Fails if the robot's shoulders are not placed symmetrically about the
/// base origin along `y`, since no anchor then yields the base frame.
pub fn input_from_robot(pair: &ArmPair, q: &Bimanual<JointVector>) -> Result<HumanInput> {
    let kp = pair.fk(q);
    let arm = |side: Side| {
        let k = kp.get(side);
        RawArm::new(k.shoulder, k.elbow, k.wrist, k.tool_orientation)
    };
    let left = arm(Side::Left);
    let right = arm(Side::Right);
    let mid = 0.5 * (left.shoulder + right.shoulder);
    let torso = mid - Vec3::z() * 0.5;
    let frame = make_frame(&left.shoulder, &right.shoulder, &torso)?;
    if (frame.orientation - Rot3::identity()).norm() > 1e-12 || frame.origin.norm() > 1e-12 {
        return Err(Error::Model(
            "shoulders are not symmetric about the base origin".into(),
        ));
    }
    Ok(HumanInput { left, right, torso })
}

/// Copy of `traj` with every elbow and wrist displaced by up to `amplitude`
/// meters in a random direction. Frames keep their hand orientations.
pub fn jitter(traj: &KeypointTrajectory, amplitude: f64, seed: u64) -> KeypointTrajectory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = traj.clone();
    for frame in &mut out.frames {
        for arm in [&mut frame.input.left, &mut frame.input.right] {
            arm.elbow += random_unit(&mut rng) * amplitude * rng.random::<f64>();
            arm.wrist += random_unit(&mut rng) * amplitude * rng.random::<f64>();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_frame_count_and_cadence() {
        let p = RollingPunch::default();
        let traj = p.generate();
        assert_eq!(traj.len(), 1000);
        let a = p.sample(0.0);
        let b = p.sample(1.0);
        assert!((a.left.wrist - b.left.wrist).norm() < 1e-12);
    }

    #[test]
    fn zero_rotations_is_static() {
        let p = RollingPunch {
            rotations: 0.0,
            ..Default::default()
        };
        let traj = p.generate();
        let first = traj.frames[0].input;
        assert!(traj.frames.iter().all(|f| f.input == first));
    }

    #[test]
    fn limbs_keep_human_lengths() {
        let p = RollingPunch::default();
        for f in p.generate().frames {
            assert!(!f.degenerate);
            for a in [f.input.left, f.input.right] {
                assert!(((a.elbow - a.shoulder).norm() - p.body.upper_arm).abs() < 1e-9);
                assert!(((a.wrist - a.elbow).norm() - p.body.forearm).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn jitter_is_seeded_and_bounded() {
        let traj = RollingPunch {
            duration: 0.1,
            ..Default::default()
        }
        .generate();
        let a = jitter(&traj, 0.02, 7);
        assert_eq!(a, jitter(&traj, 0.02, 7));
        assert_ne!(a, jitter(&traj, 0.02, 8));
        for (x, y) in traj.frames.iter().zip(&a.frames) {
            assert!((x.input.left.wrist - y.input.left.wrist).norm() <= 0.02);
            assert_eq!(x.input.left.hand, y.input.left.hand);
        }
    }
}
