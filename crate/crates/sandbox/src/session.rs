//! Per-connection state and the message handlers. No I/O here.

use std::sync::Arc;
use std::time::Instant;

use sew_core::harness::trajectory::rot_to_quat;
use sew_core::model::Bimanual;
use sew_core::retarget::{costs, sync_frames, HumanInput, SyncOptions};
use sew_core::safety::make_capsules;
use sew_core::{
    safety_filter, sew_mimic, ArmPair, FilterParams, JointVector, RobotKeypoints, Vec3,
};

use crate::protocol::{
    CapsuleMsg, ClientMessage, ConfigMsg, ErrorMsg, FilterState, KeypointsMsg, PairDistance,
    ServerMessage, StateMsg, Timing, UpdateMsg, PROTOCOL_VERSION,
};

#[derive(Debug, Clone)]
pub struct Session {
    pair: Arc<ArmPair>,
    q: Bimanual<JointVector>,
    params: FilterParams,
    filter_enabled: bool,
    frame: u64,
}

fn arr(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

fn error(seq: Option<u64>, message: impl Into<String>) -> ServerMessage {
    ServerMessage::Error(ErrorMsg {
        version: PROTOCOL_VERSION,
        seq,
        message: message.into(),
    })
}

fn check_version(v: Option<u32>) -> Result<(), String> {
    match v {
        Some(v) if v != PROTOCOL_VERSION => Err(format!(
            "unsupported protocol version {v} (service speaks {PROTOCOL_VERSION})"
        )),
        _ => Ok(()),
    }
}

impl Session {
    /// Starts at the clamped zero pose with the filter off.
    pub fn new(pair: Arc<ArmPair>) -> Self {
        let q = pair.clamp(&Bimanual::default());
        Self {
            pair,
            q,
            params: FilterParams::default(),
            filter_enabled: false,
            frame: 0,
        }
    }

    pub fn q(&self) -> &Bimanual<JointVector> {
        &self.q
    }

    pub fn params(&self) -> &FilterParams {
        &self.params
    }

    pub fn filter_enabled(&self) -> bool {
        self.filter_enabled
    }

    pub fn frame(&self) -> u64 {
        self.frame
    }

    /// Parses and dispatches one text frame. Malformed input yields an
    /// error reply and leaves the session untouched.
    pub fn handle_text(&mut self, text: &str) -> ServerMessage {
        match serde_json::from_str::<ClientMessage>(text) {
            Ok(ClientMessage::Update(m)) => self.handle_update(*m),
            Ok(ClientMessage::Config(m)) => self.handle_config(m),
            Err(e) => {
                let seq = serde_json::from_str::<serde_json::Value>(text)
                    .ok()
                    .and_then(|v| v.get("seq").and_then(|s| s.as_u64()));
                error(seq, format!("malformed message: {e}"))
            }
        }
    }

    /// Retargets both arms, optionally filters, and chains the result.
    pub fn handle_update(&mut self, msg: UpdateMsg) -> ServerMessage {
        if let Err(e) = check_version(msg.version) {
            return error(msg.seq, e);
        }
        let input = match (msg.left.into_arm("left"), msg.right.into_arm("right")) {
            (Ok(left), Ok(right)) => HumanInput {
                left,
                right,
                torso: Vec3::from(msg.torso),
            },
            (Err(e), _) | (_, Err(e)) => return error(msg.seq, e),
        };
        let synced = match sync_frames(&input, &SyncOptions::default()) {
            Ok(s) => s,
            Err(e) => return error(msg.seq, e.to_string()),
        };

        let pair = &*self.pair;
        let start = Instant::now();
        let solved = self
            .q
            .map(|side, q0| sew_mimic(pair.arm(side), q0, synced.arms.get(side)));
        let retarget = start.elapsed().as_secs_f64();
        let q_des = solved.map(|_, r| r.q);

        let mut filter = FilterState {
            enabled: self.filter_enabled,
            status: None,
            active: false,
            iterations: 0,
            params: self.params,
        };
        let mut filter_time = 0.0;
        let q = if self.filter_enabled {
            let start = Instant::now();
            let out = safety_filter(pair, &self.q, &q_des, &self.params);
            filter_time = start.elapsed().as_secs_f64();
            filter.status = Some(out.status);
            filter.active = out.status == sew_core::FilterStatus::Adjusted;
            filter.iterations = out.iterations;
            out.q
        } else {
            q_des
        };

        self.q = q;
        self.frame += 1;
        let mut state = self.state(msg.seq, filter);
        state.costs = Some(q.map(|side, qs| costs(pair.arm(side), qs, synced.arms.get(side))));
        state.flags = Some(solved.map(|_, r| r.flags));
        state.timing = Timing {
            retarget,
            filter: filter_time,
            total: retarget + filter_time,
        };
        ServerMessage::State(Box::new(state))
    }

    /// Applies settings and replies with the current state.
    pub fn handle_config(&mut self, msg: ConfigMsg) -> ServerMessage {
        if let Err(e) = check_version(msg.version) {
            return error(msg.seq, e);
        }
        if let Some(p) = &msg.params {
            if let Err(e) = p.validate() {
                return error(msg.seq, e.to_string());
            }
        }
        if let Some(on) = msg.filter {
            self.filter_enabled = on;
        }
        if let Some(p) = msg.params {
            self.params = p;
        }
        if msg.reset {
            self.q = self.pair.clamp(&Bimanual::default());
        }
        let filter = FilterState {
            enabled: self.filter_enabled,
            status: None,
            active: false,
            iterations: 0,
            params: self.params,
        };
        ServerMessage::State(Box::new(self.state(msg.seq, filter)))
    }

    fn state(&self, seq: Option<u64>, filter: FilterState) -> StateMsg {
        let kp = self.pair.fk(&self.q);
        let caps = make_capsules(&self.pair, &kp);
        let keypoints = kp.map(|_, k: &RobotKeypoints| KeypointsMsg {
            shoulder: arr(&k.shoulder),
            elbow: arr(&k.elbow),
            wrist: arr(&k.wrist),
            tool: arr(&k.tool),
            tool_quat: rot_to_quat(&k.tool_orientation),
        });
        let capsules = caps
            .capsules()
            .iter()
            .map(|c| CapsuleMsg {
                name: c.tag.name(),
                p1: arr(&c.p1),
                p2: arr(&c.p2),
                radius: c.radius,
            })
            .collect();
        let distances = caps
            .contacts()
            .into_iter()
            .map(|((a, b), c)| PairDistance {
                a: a.name(),
                b: b.name(),
                d: c.d,
            })
            .collect();
        StateMsg {
            version: PROTOCOL_VERSION,
            seq,
            frame: self.frame,
            q: self.q,
            keypoints,
            capsules,
            distances,
            min_distance: caps.min_distance(),
            costs: None,
            flags: None,
            filter,
            timing: Timing::default(),
        }
    }
}
