//! Closed-form human-to-robot arm retargeting.
//!
//! Human shoulder/elbow/wrist keypoints plus a hand orientation are mapped
//! onto a 7-DoF arm by aligning joint axes one pair at a time with closed-form
//! geometric subproblems. A capsule-based XPBD safety filter keeps a
//! bimanual pair out of self-collision, and the [`harness`] module provides
//! trajectory replay, synthetic motions and a numerical optimizer used as an
//! independent optimality oracle.

pub mod error;
pub mod exec;
pub mod geometry;
pub mod harness;
pub mod model;
pub mod retarget;
pub mod safety;
pub mod subproblems;

mod euler;

pub use error::{Error, Result};
pub use exec::Exec;
pub use geometry::{Frame, Rot3, Vec3};
pub use model::{ArmPair, JointVector, RobotArmModel, RobotKeypoints, Side, WristType};
pub use retarget::{sew_mimic, ArmInput, HumanInput, RetargetResult};
pub use safety::{safety_filter, FilterParams, FilterStatus};
