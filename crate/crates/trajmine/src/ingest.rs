//! Raw probe-log ingestion: parse `(device, sensor, timestamp)` events,
//! coalesce per-sensor probe runs into detection intervals, and assemble
//! per-device, per-day sensor trajectories.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::{
    day_window_of, DayTrajectory, DetectionInterval, DeviceId, NodeId, ProbeEvent,
    TrajectoryEntry,
};

/// Probes from the same device at the same sensor chain into one detection
/// interval while gaps stay at or below this many seconds.
pub const COALESCE_GAP: i64 = 180;

/// Corrupt-input trip wire: parsing fails once malformed lines are both
/// over 10% of the data lines and at least this many in absolute terms, so
/// a stray bad line in a tiny file is skipped rather than fatal.
pub const MALFORMED_FLOOR: usize = 10;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseReport {
    pub parsed: usize,
    pub skipped: usize,
    /// Events outside the configured dataset span (when one is set).
    pub out_of_span: usize,
}

/// String interner so the millions of repeated device/sensor ids share one
/// allocation each.
#[derive(Default)]
struct Interner {
    map: HashMap<Arc<str>, Arc<str>>,
}

impl Interner {
    fn get(&mut self, s: &str) -> Arc<str> {
        if let Some(a) = self.map.get(s) {
            return a.clone();
        }
        let a: Arc<str> = Arc::from(s);
        self.map.insert(a.clone(), a.clone());
        a
    }
}

fn open_maybe_gz(path: &Path) -> Result<Box<dyn BufRead>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    if path.extension().is_some_and(|e| e == "gz") {
        Ok(Box::new(BufReader::with_capacity(
            1 << 16,
            flate2::read::GzDecoder::new(file),
        )))
    } else {
        Ok(Box::new(BufReader::with_capacity(1 << 16, file)))
    }
}

#[derive(Deserialize)]
struct JsonProbe<'a> {
    device: &'a str,
    sensor: &'a str,
    timestamp: i64,
}

/// Stream a probe log through `sink`. The format is sniffed from the first
/// byte (`{` means JSON lines, anything else the CSV layout with its
/// `device,sensor,timestamp` header); a `.gz` suffix means gzip. Malformed
/// data lines are skipped and counted, and the whole file is rejected when
/// more than 10% (and at least [`MALFORMED_FLOOR`]) of its lines are bad.
pub fn for_each_probe(
    path: &Path,
    span: Option<(i64, i64)>,
    mut sink: impl FnMut(ProbeEvent),
) -> Result<ParseReport> {
    let mut reader = open_maybe_gz(path)?;
    let mut interner = Interner::default();
    let mut report = ParseReport::default();
    let mut line = String::new();

    // Sniff the format from the first line.
    let read_line = |reader: &mut Box<dyn BufRead>, line: &mut String| -> Result<bool> {
        line.clear();
        let n = reader.read_line(line).map_err(|e| Error::io(path, e))?;
        Ok(n > 0)
    };
    if !read_line(&mut reader, &mut line)? {
        return Ok(report); // empty file: zero events
    }
    let json = line.trim_start().starts_with('{');
    if !json {
        if line.trim() != "device,sensor,timestamp" {
            return Err(Error::parse(
                path,
                1,
                "expected a `device,sensor,timestamp` header or JSON lines",
            ));
        }
        if !read_line(&mut reader, &mut line)? {
            return Ok(report); // header only
        }
    }

    loop {
        let trimmed = line.trim();
        if !trimmed.is_empty() {
            let parsed: Option<(Arc<str>, Arc<str>, i64)> = if json {
                serde_json::from_str::<JsonProbe>(trimmed)
                    .ok()
                    .filter(|p| !p.device.is_empty() && !p.sensor.is_empty())
                    .map(|p| (interner.get(p.device), interner.get(p.sensor), p.timestamp))
            } else {
                let mut fields = trimmed.split(',');
                match (fields.next(), fields.next(), fields.next(), fields.next()) {
                    (Some(d), Some(s), Some(t), None) => {
                        let (d, s) = (d.trim(), s.trim());
                        match (d.is_empty() || s.is_empty(), t.trim().parse::<i64>()) {
                            (false, Ok(ts)) => Some((interner.get(d), interner.get(s), ts)),
                            _ => None,
                        }
                    }
                    _ => None,
                }
            };
            match parsed {
                Some((device, sensor, timestamp)) => {
                    if span.is_some_and(|(lo, hi)| timestamp < lo || timestamp >= hi) {
                        report.out_of_span += 1;
                    } else {
                        report.parsed += 1;
                        sink(ProbeEvent {
                            device: DeviceId(device),
                            sensor: NodeId(sensor),
                            timestamp,
                        });
                    }
                }
                None => report.skipped += 1,
            }
        }
        if !read_line(&mut reader, &mut line)? {
            break;
        }
    }

    let data_lines = report.parsed + report.skipped + report.out_of_span;
    if report.skipped >= MALFORMED_FLOOR && report.skipped * 10 > data_lines {
        return Err(Error::CorruptInput {
            path: path.to_path_buf(),
            malformed: report.skipped,
            total: data_lines,
        });
    }
    Ok(report)
}

/// Materialized convenience wrapper around [`for_each_probe`].
pub fn parse_probe_log(path: &Path) -> Result<(Vec<ProbeEvent>, ParseReport)> {
    let mut events = Vec::new();
    let report = for_each_probe(path, None, |e| events.push(e))?;
    Ok((events, report))
}

/// Incremental probe coalescer. Feed it events in any order; `finish` sorts
/// each per-(device, sensor) timestamp list, drops duplicate instants, and
/// chains runs whose gaps are at most `gap` seconds.
#[derive(Default)]
pub struct Coalescer {
    groups: HashMap<(DeviceId, NodeId), Vec<i64>>,
}

impl Coalescer {
    pub fn new() -> Coalescer {
        Coalescer::default()
    }

    pub fn push(&mut self, event: ProbeEvent) {
        self.groups
            .entry((event.device, event.sensor))
            .or_default()
            .push(event.timestamp);
    }

    /// Intervals in canonical `(device, sensor, first_seen)` order.
    pub fn finish(self, gap: i64) -> Vec<DetectionInterval> {
        let mut keys: Vec<(DeviceId, NodeId)> = self.groups.keys().cloned().collect();
        keys.sort();
        let mut groups = self.groups;
        let mut intervals = Vec::new();
        for key in keys {
            let mut times = groups.remove(&key).expect("key from this map");
            times.sort_unstable();
            times.dedup();
            let (device, sensor) = key;
            let mut start = times[0];
            let mut prev = times[0];
            let mut count = 1usize;
            for &t in &times[1..] {
                if t - prev <= gap {
                    prev = t;
                    count += 1;
                } else {
                    intervals.push(DetectionInterval {
                        device: device.clone(),
                        sensor: sensor.clone(),
                        first_seen: start,
                        last_seen: prev,
                        probe_count: count,
                    });
                    start = t;
                    prev = t;
                    count = 1;
                }
            }
            intervals.push(DetectionInterval {
                device,
                sensor,
                first_seen: start,
                last_seen: prev,
                probe_count: count,
            });
        }
        intervals
    }
}

/// One-shot coalescing of a finished event collection.
pub fn coalesce_probes(events: Vec<ProbeEvent>, gap: i64) -> Vec<DetectionInterval> {
    let mut c = Coalescer::new();
    for e in events {
        c.push(e);
    }
    c.finish(gap)
}

/// Load pre-coalesced intervals from a `device,sensor,first_seen,last_seen`
/// CSV (gzip by suffix), for deployments that export intervals directly.
pub fn load_pre_coalesced(path: &Path) -> Result<(Vec<DetectionInterval>, ParseReport)> {
    let mut reader = open_maybe_gz(path)?;
    let mut interner = Interner::default();
    let mut report = ParseReport::default();
    let mut intervals = Vec::new();
    let mut text = String::new();
    reader
        .read_to_string(&mut text)
        .map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == "device,sensor,first_seen,last_seen" => {}
        _ => {
            return Err(Error::parse(
                path,
                1,
                "expected a `device,sensor,first_seen,last_seen` header",
            ))
        }
    }
    for line in lines {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        let parsed = if fields.len() == 4 {
            match (fields[2].trim().parse::<i64>(), fields[3].trim().parse::<i64>()) {
                (Ok(first), Ok(last))
                    if first <= last && !fields[0].is_empty() && !fields[1].is_empty() =>
                {
                    Some((fields[0].trim(), fields[1].trim(), first, last))
                }
                _ => None,
            }
        } else {
            None
        };
        match parsed {
            Some((d, s, first, last)) => {
                report.parsed += 1;
                intervals.push(DetectionInterval {
                    device: DeviceId(interner.get(d)),
                    sensor: NodeId(interner.get(s)),
                    first_seen: first,
                    last_seen: last,
                    probe_count: 1,
                });
            }
            None => report.skipped += 1,
        }
    }
    let data_lines = report.parsed + report.skipped;
    if report.skipped >= MALFORMED_FLOOR && report.skipped * 10 > data_lines {
        return Err(Error::CorruptInput {
            path: path.to_path_buf(),
            malformed: report.skipped,
            total: data_lines,
        });
    }
    Ok((intervals, report))
}

/// Split an interval at day-window boundaries. A piece that reaches a
/// boundary ends exactly on it (the boundary instant itself opens the next
/// day), so `[02:50, 03:10]` becomes `[02:50, 03:00]` plus `[03:00, 03:10]`.
fn split_at_day_boundaries(
    first_seen: i64,
    last_seen: i64,
    tz_offset: i64,
    mut piece: impl FnMut(i64, i64, i64), // (day_index, start, end)
) {
    let mut start = first_seen;
    loop {
        let window = day_window_of(start, tz_offset);
        if last_seen < window.end() {
            piece(window.index, start, last_seen);
            return;
        }
        piece(window.index, start, window.end());
        start = window.end();
        if start == last_seen {
            // The tail lands exactly on the boundary; it already closed the
            // previous piece and also opens the new day as a point visit.
            piece(window.index + 1, start, start);
            return;
        }
    }
}

/// Assemble per-(device, day) sensor-level trajectories from detection
/// intervals. Intervals are split at 03:00 day boundaries, ordered by first
/// appearance, and linked with stay/take values. Overlapping detections at
/// different sensors are repaired by truncating the earlier entry's end to
/// the later entry's start, clamping the gap to zero.
pub fn build_sensor_trajectories(
    intervals: &[DetectionInterval],
    tz_offset: i64,
) -> Vec<DayTrajectory> {
    // (device, day, start, end, sensor) pieces after boundary splitting.
    let mut pieces: Vec<(DeviceId, i64, i64, i64, NodeId)> = Vec::with_capacity(intervals.len());
    for iv in intervals {
        split_at_day_boundaries(iv.first_seen, iv.last_seen, tz_offset, |day, s, e| {
            pieces.push((iv.device.clone(), day, s, e, iv.sensor.clone()));
        });
    }
    pieces.sort_by(|a, b| {
        (&a.0, a.1, a.2, a.3, &a.4).cmp(&(&b.0, b.1, b.2, b.3, &b.4))
    });

    let mut trajectories = Vec::new();
    let mut i = 0;
    while i < pieces.len() {
        let (device, day) = (pieces[i].0.clone(), pieces[i].1);
        let mut j = i;
        while j < pieces.len() && pieces[j].0 == device && pieces[j].1 == day {
            j += 1;
        }
        let window = day_window_of(pieces[i].2, tz_offset);
        debug_assert_eq!(window.index, day);
        let mut entries: Vec<TrajectoryEntry> = pieces[i..j]
            .iter()
            .map(|(_, _, s, e, sensor)| TrajectoryEntry {
                node: sensor.clone(),
                next: None,
                start: *s,
                end: *e,
                stay: 0,
                take: 0,
            })
            .collect();
        link_entries(&mut entries);
        trajectories.push(DayTrajectory {
            device,
            day: window,
            entries,
        });
        i = j;
    }
    trajectories
}

/// Repair overlaps and recompute the stay/take/next chain in place.
/// Entries must already be sorted by start time.
pub fn link_entries(entries: &mut [TrajectoryEntry]) {
    let n = entries.len();
    for i in 0..n {
        if i + 1 < n {
            let next_start = entries[i + 1].start;
            let next_node = entries[i + 1].node.clone();
            let e = &mut entries[i];
            if e.end > next_start {
                e.end = next_start;
            }
            e.take = next_start - e.end;
            e.next = Some(next_node);
        } else {
            entries[i].take = 0;
            entries[i].next = None;
        }
        entries[i].stay = entries[i].end - entries[i].start;
    }
}
