//! Frame-by-frame replay of a trajectory through the retargeter and
//! (optionally) the safety filter.

use std::time::Instant;

use crate::exec::Exec;
use crate::harness::report::{FrameRow, ReplayReport};
use crate::harness::trajectory::KeypointTrajectory;
use crate::model::{ArmPair, Bimanual, JointVector, Side};
use crate::retarget::{costs, sew_mimic, sync_frames, Costs, SyncOptions};
use crate::safety::{make_capsules, safety_filter, FilterParams, FilterStatus};

/// Frames excluded from timing aggregates.
pub const DEFAULT_WARMUP: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplayOptions {
    pub filter: bool,
    pub params: FilterParams,
    pub sync: SyncOptions,
    pub warmup: usize,
    /// Pose before the first frame.
    pub q_init: Bimanual<JointVector>,
}

impl Default for ReplayOptions {
    fn default() -> Self {
        Self {
            filter: false,
            params: FilterParams::default(),
            sync: SyncOptions::default(),
            warmup: DEFAULT_WARMUP,
            q_init: Bimanual::new(JointVector::zeros(), JointVector::zeros()),
        }
    }
}

/// Replays `traj`, chaining each frame's pose into the next.
///
/// Timing covers the retargeting and filter calls only. A frame whose body
/// frame cannot be built holds the previous pose and is flagged.
pub fn run_replay(
    pair: &ArmPair,
    traj: &KeypointTrajectory,
    options: &ReplayOptions,
) -> ReplayReport {
    let mut q = pair.clamp(&options.q_init);
    let mut rows = Vec::with_capacity(traj.len());
    let mut poses = Vec::with_capacity(traj.len());

    for (i, frame) in traj.frames.iter().enumerate() {
        let mut row = FrameRow {
            frame: i,
            t: frame.t,
            input_degenerate: frame.degenerate,
            status: if options.filter { "clear" } else { "off" }.into(),
            ..FrameRow::default()
        };

        match sync_frames(&frame.input, &options.sync) {
            Ok(synced) => {
                let start = Instant::now();
                let solved = q.map(|side, q0| sew_mimic(pair.arm(side), q0, synced.arms.get(side)));
                let retarget_time = start.elapsed().as_secs_f64();
                let q_des = solved.map(|_, r| r.q);

                let mut filter_time = 0.0;
                let q_new = if options.filter {
                    let start = Instant::now();
                    let out = safety_filter(pair, &q, &q_des, &options.params);
                    filter_time = start.elapsed().as_secs_f64();
                    row.status = match out.status {
                        FilterStatus::Clear => "clear",
                        FilterStatus::Adjusted => "adjusted",
                        FilterStatus::Held => "held",
                    }
                    .into();
                    out.q
                } else {
                    q_des
                };

                let c = q_new.map(|side, qs| costs(pair.arm(side), qs, synced.arms.get(side)));
                set_costs(&mut row, &c.left, &c.right);
                row.time_lt = solved.left.solve_time;
                row.time_rt = solved.right.solve_time;
                row.time_filter = filter_time;
                row.time_total = retarget_time + filter_time;
                row.clamped_lt = solved.left.flags.clamped();
                row.clamped_rt = solved.right.flags.clamped();
                row.degenerate_lt = solved.left.flags.degenerate();
                row.degenerate_rt = solved.right.flags.degenerate();
                q = q_new;
            }
            Err(_) => {
                row.input_degenerate = true;
                row.status = "skipped".into();
            }
        }

        let min_distance = make_capsules(pair, &pair.fk(&q)).min_distance();
        row.min_distance = min_distance;
        row.collision = min_distance < 0.0;
        rows.push(row);
        poses.push(q);
    }
    ReplayReport::new(rows, poses, options.warmup)
}

fn set_costs(row: &mut FrameRow, lt: &Costs, rt: &Costs) {
    row.upper_lt = lt.upper;
    row.lower_lt = lt.lower;
    row.wrist_lt = lt.wrist;
    row.upper_rt = rt.upper;
    row.lower_rt = rt.lower;
    row.wrist_rt = rt.wrist;
    row.error = lt.total() + rt.total();
}

/// Replays several independent trajectories, in parallel when `exec`
/// allows it.
pub fn replay_many(
    pair: &ArmPair,
    trajectories: &[KeypointTrajectory],
    options: &ReplayOptions,
    exec: Exec,
) -> Vec<ReplayReport> {
    exec.map_slice(trajectories, |t| run_replay(pair, t, options))
}

/// Single-arm retargeting latency over a trajectory: one sample per frame
/// per arm, chained as in a replay. Returns seconds.
pub fn arm_latencies(pair: &ArmPair, traj: &KeypointTrajectory, sync: &SyncOptions) -> Vec<f64> {
    let mut q = Bimanual::new(JointVector::zeros(), JointVector::zeros());
    let mut out = Vec::with_capacity(2 * traj.len());
    for frame in &traj.frames {
        let Ok(synced) = sync_frames(&frame.input, sync) else {
            continue;
        };
        for side in [Side::Left, Side::Right] {
            let r = sew_mimic(pair.arm(side), q.get(side), synced.arms.get(side));
            out.push(r.solve_time);
            *q.get_mut(side) = r.q;
        }
    }
    out
}
