//! Building-level preprocessing: collapse sensor-level trajectories onto
//! buildings, merge short same-building hops, and drop degenerate
//! trajectories. Also hosts the JSON-lines interchange format the pipeline
//! stages hand trajectories around in.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DayTrajectory, DayWindow, DeviceId, NodeId, TrajectoryEntry};

/// Consecutive same-building entries merge when the gap between them is
/// under six hours; longer gaps count as a real departure and return.
pub const MERGE_TAKE_THRESHOLD: i64 = 21_600;

/// Trajectories spanning less than five minutes carry no movement signal.
pub const MIN_SPAN: i64 = 300;

/// Stays over sixteen hours are treated as parked or forgotten devices.
pub const MAX_STAY: i64 = 57_600;

/// Rewrite a sensor-level trajectory to building level: rename each node to
/// its building and repeatedly merge consecutive same-building pairs whose
/// gap (`take`) is below `take_threshold`, until no such pair remains. A
/// merged entry absorbs the gap into its stay, so consecutive same-building
/// entries can survive only with gaps at or above the threshold.
pub fn merge_to_building_level(
    trajectory: &DayTrajectory,
    take_threshold: i64,
) -> DayTrajectory {
    let mut entries: Vec<TrajectoryEntry> = trajectory
        .entries
        .iter()
        .map(|e| TrajectoryEntry {
            node: e.node.building().as_node(),
            next: e.next.as_ref().map(|n| n.building().as_node()),
            ..e.clone()
        })
        .collect();

    // One left-to-right pass that re-examines a merged entry against its new
    // neighbour reaches the fixed point, because merging never changes the
    // start of the merged entry or anything before it. The outer loop stays
    // anyway as a cheap structural guarantee.
    loop {
        let mut changed = false;
        let mut i = 0;
        while i + 1 < entries.len() {
            if entries[i].node == entries[i + 1].node && entries[i].take < take_threshold {
                let absorbed = entries.remove(i + 1);
                let e = &mut entries[i];
                e.end = absorbed.end;
                e.stay = e.end - e.start;
                e.take = absorbed.take;
                e.next = absorbed.next;
                changed = true;
            } else {
                i += 1;
            }
        }
        if !changed {
            break;
        }
    }

    DayTrajectory {
        device: trajectory.device.clone(),
        day: trajectory.day,
        entries,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct FilterReport {
    pub input: usize,
    pub kept: usize,
    /// Dropped because the whole trajectory spans under the minimum.
    pub too_short: usize,
    /// Dropped because some single stay exceeds the maximum.
    pub long_stay: usize,
}

/// Keep a trajectory only if it spans at least `min_span` seconds and no
/// single stay exceeds `max_stay` seconds.
pub fn keep_trajectory(
    trajectory: &DayTrajectory,
    min_span: i64,
    max_stay: i64,
    report: &mut FilterReport,
) -> bool {
    report.input += 1;
    if trajectory.span() < min_span {
        report.too_short += 1;
        return false;
    }
    if trajectory.entries.iter().any(|e| e.stay > max_stay) {
        report.long_stay += 1;
        return false;
    }
    report.kept += 1;
    true
}

/// Batch filter over a whole collection, preserving order.
pub fn filter_trajectories(
    trajectories: Vec<DayTrajectory>,
    min_span: i64,
    max_stay: i64,
) -> (Vec<DayTrajectory>, FilterReport) {
    let mut report = FilterReport::default();
    let kept = trajectories
        .into_iter()
        .filter(|t| keep_trajectory(t, min_span, max_stay, &mut report))
        .collect();
    (kept, report)
}

// --- JSON-lines interchange ---

#[derive(Serialize, Deserialize)]
struct EntryRecord {
    node: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    next: Option<String>,
    start: i64,
    end: i64,
    stay: i64,
    take: i64,
}

#[derive(Serialize, Deserialize)]
struct TrajectoryRecord {
    device: String,
    day: i64,
    entries: Vec<EntryRecord>,
}

pub fn trajectory_to_json(t: &DayTrajectory) -> String {
    let record = TrajectoryRecord {
        device: t.device.to_string(),
        day: t.day.index,
        entries: t
            .entries
            .iter()
            .map(|e| EntryRecord {
                node: e.node.to_string(),
                next: e.next.as_ref().map(|n| n.to_string()),
                start: e.start,
                end: e.end,
                stay: e.stay,
                take: e.take,
            })
            .collect(),
    };
    serde_json::to_string(&record).expect("trajectory records always serialize")
}

pub fn trajectory_from_json(line: &str, tz_offset: i64) -> Result<DayTrajectory> {
    let record: TrajectoryRecord = serde_json::from_str(line)
        .map_err(|e| Error::InvalidInput(format!("bad trajectory record: {e}")))?;
    Ok(DayTrajectory {
        device: DeviceId::new(&record.device),
        day: DayWindow::from_index(record.day, tz_offset),
        entries: record
            .entries
            .into_iter()
            .map(|e| TrajectoryEntry {
                node: NodeId::new(&e.node),
                next: e.next.map(NodeId::new),
                start: e.start,
                end: e.end,
                stay: e.stay,
                take: e.take,
            })
            .collect(),
    })
}

/// Write trajectories as one JSON object per line.
pub fn write_trajectories(path: &Path, trajectories: &[DayTrajectory]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for t in trajectories {
        writeln!(w, "{}", trajectory_to_json(t)).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Read a JSON-lines trajectory file fully into memory.
pub fn read_trajectories(path: &Path, tz_offset: i64) -> Result<Vec<DayTrajectory>> {
    let mut out = Vec::new();
    for_each_trajectory(path, tz_offset, |t| {
        out.push(t);
        Ok(())
    })?;
    Ok(out)
}

/// Stream a JSON-lines trajectory file.
pub fn for_each_trajectory(
    path: &Path,
    tz_offset: i64,
    mut f: impl FnMut(DayTrajectory) -> Result<()>,
) -> Result<()> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::with_capacity(1 << 16, file);
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let t = trajectory_from_json(&line, tz_offset)
            .map_err(|e| Error::parse(path, lineno + 1, e.to_string()))?;
        f(t)?;
    }
    Ok(())
}
