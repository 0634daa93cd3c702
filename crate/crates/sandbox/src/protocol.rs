//! Wire messages. Every message is a JSON object with a `type` field;
//! positions are meters in the capture frame, orientations unit
//! quaternions `[x, y, z, w]`. See `docs/protocol.md`.

use serde::{Deserialize, Serialize};

use sew_core::harness::trajectory::ArmRecord;
use sew_core::model::Bimanual;
use sew_core::retarget::{Costs, RetargetFlags};
use sew_core::{FilterParams, FilterStatus, JointVector};

pub const PROTOCOL_VERSION: u32 = 1;

/// Client to service.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ClientMessage {
    Update(Box<UpdateMsg>),
    Config(ConfigMsg),
}

/// One capture sample.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UpdateMsg {
    #[serde(default)]
    pub version: Option<u32>,
    /// Echoed in the reply.
    #[serde(default)]
    pub seq: Option<u64>,
    pub torso: [f64; 3],
    pub left: ArmRecord,
    pub right: ArmRecord,
}

/// Session settings. Absent fields leave the setting alone.
#[derive(Debug, Clone, PartialEq, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ConfigMsg {
    #[serde(default)]
    pub version: Option<u32>,
    #[serde(default)]
    pub seq: Option<u64>,
    /// Enable or disable the safety filter.
    #[serde(default)]
    pub filter: Option<bool>,
    /// Replacement filter parameters; keys left out take their defaults.
    #[serde(default)]
    pub params: Option<FilterParams>,
    /// Return both arms to the (clamped) zero pose.
    #[serde(default)]
    pub reset: bool,
}

/// Service to client.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ServerMessage {
    State(Box<StateMsg>),
    Error(ErrorMsg),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateMsg {
    pub version: u32,
    pub seq: Option<u64>,
    /// Updates processed by this session so far.
    pub frame: u64,
    pub q: Bimanual<JointVector>,
    pub keypoints: Bimanual<KeypointsMsg>,
    pub capsules: Vec<CapsuleMsg>,
    /// Signed surface distance of every checked capsule pair.
    pub distances: Vec<PairDistance>,
    pub min_distance: f64,
    /// Alignment terms of `q` against the update; absent in config replies.
    pub costs: Option<Bimanual<Costs>>,
    pub flags: Option<Bimanual<RetargetFlags>>,
    pub filter: FilterState,
    pub timing: Timing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KeypointsMsg {
    pub shoulder: [f64; 3],
    pub elbow: [f64; 3],
    pub wrist: [f64; 3],
    pub tool: [f64; 3],
    pub tool_quat: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapsuleMsg {
    pub name: String,
    pub p1: [f64; 3],
    pub p2: [f64; 3],
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairDistance {
    pub a: String,
    pub b: String,
    pub d: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FilterState {
    pub enabled: bool,
    /// Outcome for this update; absent when the filter is off or in config
    /// replies.
    pub status: Option<FilterStatus>,
    /// The filter changed the pose (`status == "adjusted"`).
    pub active: bool,
    pub iterations: usize,
    pub params: FilterParams,
}

/// Seconds spent in the engine for this reply.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub struct Timing {
    pub retarget: f64,
    pub filter: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorMsg {
    pub version: u32,
    pub seq: Option<u64>,
    pub message: String,
}
