//! Replay reports: one row per frame plus aggregates.
//!
//! Column order is fixed by [`COLUMNS`] and documented in
//! `docs/report-format.md`.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Bimanual, JointVector};

/// CSV header, in order.
pub const COLUMNS: [&str; 22] = [
    "frame",
    "t",
    "upper_lt",
    "lower_lt",
    "wrist_lt",
    "upper_rt",
    "lower_rt",
    "wrist_rt",
    "error",
    "time_lt",
    "time_rt",
    "time_filter",
    "time_total",
    "min_distance",
    "collision",
    "status",
    "clamped_lt",
    "degenerate_lt",
    "clamped_rt",
    "degenerate_rt",
    "input_degenerate",
    "version",
];

/// Report schema version written in every row.
pub const REPORT_VERSION: u32 = 1;

/// One replayed frame. Errors are the squared objective terms; times are
/// seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRow {
    pub frame: usize,
    pub t: f64,
    pub upper_lt: f64,
    pub lower_lt: f64,
    pub wrist_lt: f64,
    pub upper_rt: f64,
    pub lower_rt: f64,
    pub wrist_rt: f64,
    /// Sum of all six terms.
    pub error: f64,
    pub time_lt: f64,
    pub time_rt: f64,
    pub time_filter: f64,
    pub time_total: f64,
    /// Smallest capsule distance of the output pose, meters.
    pub min_distance: f64,
    pub collision: bool,
    /// `off`, `clear`, `adjusted`, `held` or `skipped`.
    pub status: String,
    pub clamped_lt: bool,
    pub degenerate_lt: bool,
    pub clamped_rt: bool,
    pub degenerate_rt: bool,
    pub input_degenerate: bool,
    pub version: u32,
}

impl Default for FrameRow {
    fn default() -> Self {
        Self {
            frame: 0,
            t: 0.0,
            upper_lt: 0.0,
            lower_lt: 0.0,
            wrist_lt: 0.0,
            upper_rt: 0.0,
            lower_rt: 0.0,
            wrist_rt: 0.0,
            error: 0.0,
            time_lt: 0.0,
            time_rt: 0.0,
            time_filter: 0.0,
            time_total: 0.0,
            min_distance: 0.0,
            collision: false,
            status: String::new(),
            clamped_lt: false,
            degenerate_lt: false,
            clamped_rt: false,
            degenerate_rt: false,
            input_degenerate: false,
            version: REPORT_VERSION,
        }
    }
}

/// Median, interquartile range and mean of a sample. All NaN when empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub median: f64,
    pub iqr: f64,
    pub mean: f64,
    pub count: usize,
}

impl Stats {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self {
                median: f64::NAN,
                iqr: f64::NAN,
                mean: f64::NAN,
                count: 0,
            };
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Self {
            median: quantile(&v, 0.5),
            iqr: quantile(&v, 0.75) - quantile(&v, 0.25),
            mean: v.iter().sum::<f64>() / v.len() as f64,
            count: v.len(),
        }
    }
}

/// Linear-interpolated quantile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub frames: usize,
    pub warmup: usize,
    /// Per-frame total error over all frames.
    pub error: Stats,
    /// Per-frame solve time after warm-up.
    pub time: Stats,
    /// Single-arm retargeting time after warm-up (both arms pooled).
    pub arm_time: Stats,
    pub filter_time: Stats,
    pub collision_frames: usize,
    pub collision_fraction: f64,
    pub clamped_frames: usize,
    pub degenerate_frames: usize,
    pub adjusted_frames: usize,
    pub held_frames: usize,
}

impl Summary {
    /// Aggregates rows. Timing skips the first `warmup` frames unless that
    /// would leave nothing.
    pub fn from_rows(rows: &[FrameRow], warmup: usize) -> Self {
        let timed = if rows.len() > warmup {
            &rows[warmup..]
        } else {
            rows
        };
        let collect = |f: &dyn Fn(&FrameRow) -> f64, rows: &[FrameRow]| -> Vec<f64> {
            rows.iter().map(f).collect()
        };
        let count = |f: &dyn Fn(&FrameRow) -> bool| rows.iter().filter(|r| f(r)).count();
        let collision_frames = count(&|r| r.collision);
        let arm_times: Vec<f64> = timed.iter().flat_map(|r| [r.time_lt, r.time_rt]).collect();
        Self {
            frames: rows.len(),
            warmup,
            error: Stats::of(&collect(&|r| r.error, rows)),
            time: Stats::of(&collect(&|r| r.time_total, timed)),
            arm_time: Stats::of(&arm_times),
            filter_time: Stats::of(&collect(&|r| r.time_filter, timed)),
            collision_frames,
            collision_fraction: if rows.is_empty() {
                0.0
            } else {
                collision_frames as f64 / rows.len() as f64
            },
            clamped_frames: count(&|r| r.clamped_lt || r.clamped_rt),
            degenerate_frames: count(&|r| r.degenerate_lt || r.degenerate_rt || r.input_degenerate),
            adjusted_frames: count(&|r| r.status == "adjusted"),
            held_frames: count(&|r| r.status == "held"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub rows: Vec<FrameRow>,
    /// Output pose of every frame.
    pub poses: Vec<Bimanual<JointVector>>,
    pub summary: Summary,
}

impl ReplayReport {
    pub fn new(rows: Vec<FrameRow>, poses: Vec<Bimanual<JointVector>>, warmup: usize) -> Self {
        let summary = Summary::from_rows(&rows, warmup);
        Self {
            rows,
            poses,
            summary,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    /// One JSON object per row.
    Jsonl,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "jsonl" => Ok(Self::Jsonl),
            _ => Err(Error::Parse {
                what: "report format".into(),
                message: format!("{s:?} is not csv or jsonl"),
            }),
        }
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse {
        what: "report".into(),
        message: e.to_string(),
    }
}

pub fn write_rows(rows: &[FrameRow], format: ReportFormat, mut out: impl Write) -> Result<()> {
    let io = |e| Error::io("<report>", e);
    match format {
        ReportFormat::Csv => {
            let mut w = csv::WriterBuilder::new()
                .has_headers(false)
                .from_writer(out);
            w.write_record(COLUMNS).map_err(csv_err)?;
            for r in rows {
                w.serialize(r).map_err(csv_err)?;
            }
            w.flush().map_err(io)?;
        }
        ReportFormat::Jsonl => {
            for r in rows {
                serde_json::to_writer(&mut out, r).map_err(|e| io(e.into()))?;
                out.write_all(b"\n").map_err(io)?;
            }
            out.flush().map_err(io)?;
        }
    }
    Ok(())
}

pub fn read_rows(format: ReportFormat, input: impl BufRead) -> Result<Vec<FrameRow>> {
    match format {
        ReportFormat::Csv => {
            let mut r = csv::ReaderBuilder::new()
                .has_headers(true)
                .from_reader(input);
            let header = r.headers().map_err(csv_err)?.clone();
            if !header.iter().eq(COLUMNS.iter().copied()) {
                return Err(Error::Parse {
                    what: "report".into(),
                    message: "unexpected CSV header".into(),
                });
            }
            r.deserialize().map(|row| row.map_err(csv_err)).collect()
        }
        ReportFormat::Jsonl => input
            .lines()
            .enumerate()
            .filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
            .map(|(i, l)| {
                let l = l.map_err(|e| Error::io("<report>", e))?;
                serde_json::from_str(&l).map_err(|e| Error::Parse {
                    what: format!("report line {}", i + 1),
                    message: e.to_string(),
                })
            })
            .collect(),
    }
}

pub fn report_write(
    report: &ReplayReport,
    path: impl AsRef<Path>,
    format: ReportFormat,
) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_rows(&report.rows, format, std::io::BufWriter::new(file))
}

pub fn report_read(path: impl AsRef<Path>, format: ReportFormat) -> Result<Vec<FrameRow>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_rows(format, BufReader::new(file))
}
