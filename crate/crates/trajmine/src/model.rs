//! Shared domain types: identifiers, day windows, trajectory records, the
//! sensor deployment registry, and the day-label calendar.
//!
//! A "day" here is the operational day used throughout the pipeline: it runs
//! from 03:00 local time to 03:00 the next calendar day, so late-night
//! activity stays attached to the evening it belongs to. Day windows are
//! half-open (`[start, start + 86400)`) and the boundary instant 03:00:00
//! opens the *new* day.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DAY_SECONDS: i64 = 86_400;
/// Local-time offset of the day boundary from midnight (03:00).
pub const DAY_BOUNDARY_OFFSET: i64 = 3 * 3600;

// --- identifiers ---

/// Opaque device identifier (already hashed upstream; never a raw MAC).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DeviceId(pub Arc<str>);

impl DeviceId {
    pub fn new(s: impl AsRef<str>) -> Self {
        DeviceId(Arc::from(s.as_ref()))
    }
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for DeviceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Identifier of a sensor ("H2") or, after building-level merging, of a
/// building ("H"). The first character names the building in either case.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub Arc<str>);

impl NodeId {
    pub fn new(s: impl AsRef<str>) -> Self {
        NodeId(Arc::from(s.as_ref()))
    }
    pub fn as_str(&self) -> &str {
        &self.0
    }
    /// The building a node belongs to: the first character of its id.
    pub fn building(&self) -> BuildingId {
        BuildingId(self.0.chars().next().expect("node id is never empty"))
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Single-character building identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BuildingId(pub char);

impl BuildingId {
    pub fn as_node(&self) -> NodeId {
        NodeId(Arc::from(self.0.to_string().as_str()))
    }
}

impl fmt::Display for BuildingId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The building a sensor id belongs to (first character).
pub fn building_of(sensor: &str) -> Option<BuildingId> {
    sensor.chars().next().map(BuildingId)
}

// --- raw observations ---

/// One probe request heard by one sensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbeEvent {
    pub device: DeviceId,
    pub sensor: NodeId,
    pub timestamp: i64,
}

/// A maximal run of probes from one device at one sensor with inter-probe
/// gaps of at most the coalescing threshold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetectionInterval {
    pub device: DeviceId,
    pub sensor: NodeId,
    pub first_seen: i64,
    pub last_seen: i64,
    /// Number of (deduplicated) probes folded into this interval.
    pub probe_count: usize,
}

// --- day windows ---

/// One operational day: `[start, start + 86400)` in unix seconds, where
/// `start` falls on 03:00 local time. `index` counts whole days since the
/// unix epoch of the local calendar date the window starts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DayWindow {
    pub index: i64,
    pub start: i64,
}

impl DayWindow {
    pub fn end(&self) -> i64 {
        self.start + DAY_SECONDS
    }

    pub fn contains(&self, t: i64) -> bool {
        t >= self.start && t < self.end()
    }

    /// Window for a given day index under a fixed local-time offset.
    pub fn from_index(index: i64, tz_offset: i64) -> DayWindow {
        DayWindow {
            index,
            start: index * DAY_SECONDS + DAY_BOUNDARY_OFFSET - tz_offset,
        }
    }

    /// Local calendar date the window starts on.
    pub fn date(&self) -> chrono::NaiveDate {
        chrono::NaiveDate::from_ymd_opt(1970, 1, 1).unwrap()
            + chrono::Duration::days(self.index)
    }
}

/// The day window containing instant `t` (unix seconds) for a zone
/// `tz_offset` seconds east of UTC. 03:00:00 sharp belongs to the new day.
pub fn day_window_of(t: i64, tz_offset: i64) -> DayWindow {
    let index = (t + tz_offset - DAY_BOUNDARY_OFFSET).div_euclid(DAY_SECONDS);
    DayWindow::from_index(index, tz_offset)
}

/// Day index whose window starts on the given local calendar date.
pub fn day_index_of_date(date: chrono::NaiveDate) -> i64 {
    (date - chrono::NaiveDate::from_ymd_opt(1970, 1, 1).unwrap()).num_days()
}

/// Local calendar date a day index starts on (inverse of
/// [`day_index_of_date`]).
pub fn date_of_day_index(index: i64) -> chrono::NaiveDate {
    chrono::NaiveDate::from_ymd_opt(1970, 1, 1).unwrap() + chrono::Duration::days(index)
}

// --- trajectories ---

/// One stop in a day trajectory. `node` is a sensor id before building-level
/// merging and a building id after. `stay = end - start`; `take` is the gap
/// to the next entry's start (0 for the last entry).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectoryEntry {
    pub node: NodeId,
    pub next: Option<NodeId>,
    pub start: i64,
    pub end: i64,
    pub stay: i64,
    pub take: i64,
}

/// All stops of one device within one day window, in chronological order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DayTrajectory {
    pub device: DeviceId,
    pub day: DayWindow,
    pub entries: Vec<TrajectoryEntry>,
}

impl DayTrajectory {
    /// Seconds between the first arrival and the last departure.
    pub fn span(&self) -> i64 {
        match (self.entries.first(), self.entries.last()) {
            (Some(a), Some(b)) => b.end - a.start,
            _ => 0,
        }
    }

    /// Check the structural invariants: entries sorted and non-overlapping,
    /// timestamps inside the day window, stay/take/next consistent.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| {
            Err(Error::InvalidInput(format!(
                "trajectory {} day {}: {msg}",
                self.device, self.day.index
            )))
        };
        for (i, e) in self.entries.iter().enumerate() {
            if e.start > e.end {
                return fail(format!("entry {i} has start after end"));
            }
            if e.start < self.day.start || e.end > self.day.end() {
                return fail(format!("entry {i} leaves the day window"));
            }
            if e.stay != e.end - e.start {
                return fail(format!("entry {i} stay is not end - start"));
            }
            match self.entries.get(i + 1) {
                Some(n) => {
                    if e.end > n.start {
                        return fail(format!("entries {i} and {} overlap", i + 1));
                    }
                    if e.take != n.start - e.end {
                        return fail(format!("entry {i} take does not match the gap"));
                    }
                    if e.next.as_ref() != Some(&n.node) {
                        return fail(format!("entry {i} next does not name entry {}", i + 1));
                    }
                }
                None => {
                    if e.take != 0 {
                        return fail(format!("last entry has nonzero take"));
                    }
                    if e.next.is_some() {
                        return fail(format!("last entry has a next node"));
                    }
                }
            }
        }
        Ok(())
    }
}

// --- deployment registry ---

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Hospital,
    Mall,
    Institute,
    Residential,
}

impl Category {
    pub fn parse(s: &str) -> Result<Category> {
        match s.to_ascii_lowercase().as_str() {
            "hospital" => Ok(Category::Hospital),
            "mall" => Ok(Category::Mall),
            "institute" => Ok(Category::Institute),
            "residential" => Ok(Category::Residential),
            other => Err(Error::Registry(format!("unknown category `{other}`"))),
        }
    }
    pub fn as_str(&self) -> &'static str {
        match self {
            Category::Hospital => "hospital",
            Category::Mall => "mall",
            Category::Institute => "institute",
            Category::Residential => "residential",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Area {
    Facility,
    Residential,
}

impl Area {
    pub fn parse(s: &str) -> Result<Area> {
        match s.to_ascii_lowercase().as_str() {
            "facility" => Ok(Area::Facility),
            "residential" => Ok(Area::Residential),
            other => Err(Error::Registry(format!("unknown area `{other}`"))),
        }
    }
    pub fn as_str(&self) -> &'static str {
        match self {
            Area::Facility => "facility",
            Area::Residential => "residential",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegistryNode {
    pub building: BuildingId,
    pub category: Category,
    pub area: Area,
}

/// The monitored buildings, in file order. File order is the canonical node
/// order for every matrix the pipeline emits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Deployment {
    pub nodes: Vec<RegistryNode>,
    index: HashMap<BuildingId, usize>,
}

impl Deployment {
    pub fn new(nodes: Vec<RegistryNode>) -> Result<Deployment> {
        if nodes.is_empty() {
            return Err(Error::Registry("registry has no nodes".into()));
        }
        let mut index = HashMap::new();
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.building, i).is_some() {
                return Err(Error::Registry(format!(
                    "duplicate building id `{}`",
                    n.building
                )));
            }
            let residential_area = n.area == Area::Residential;
            let residential_cat = n.category == Category::Residential;
            if residential_area != residential_cat {
                return Err(Error::Registry(format!(
                    "building `{}`: area and category disagree",
                    n.building
                )));
            }
        }
        Ok(Deployment { nodes, index })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn index_of(&self, b: BuildingId) -> Option<usize> {
        self.index.get(&b).copied()
    }

    pub fn category_of(&self, b: BuildingId) -> Option<Category> {
        self.index_of(b).map(|i| self.nodes[i].category)
    }

    pub fn buildings(&self) -> impl Iterator<Item = BuildingId> + '_ {
        self.nodes.iter().map(|n| n.building)
    }

    pub fn facility_buildings(&self) -> Vec<BuildingId> {
        self.nodes
            .iter()
            .filter(|n| n.area == Area::Facility)
            .map(|n| n.building)
            .collect()
    }

    /// Load a `building_id,category,area` CSV (header required).
    pub fn load(path: &Path) -> Result<Deployment> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == "building_id,category,area" => {}
            _ => {
                return Err(Error::Registry(format!(
                    "{}: missing `building_id,category,area` header",
                    path.display()
                )))
            }
        }
        let mut nodes = Vec::new();
        for (lineno, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(Error::parse(path, lineno + 1, "expected 3 fields"));
            }
            let mut chars = fields[0].trim().chars();
            let building = match (chars.next(), chars.next()) {
                (Some(c), None) => BuildingId(c),
                _ => {
                    return Err(Error::parse(
                        path,
                        lineno + 1,
                        "building id must be a single character",
                    ))
                }
            };
            nodes.push(RegistryNode {
                building,
                category: Category::parse(fields[1].trim())?,
                area: Area::parse(fields[2].trim())?,
            });
        }
        Deployment::new(nodes)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::from("building_id,category,area\n");
        for n in &self.nodes {
            out.push_str(&format!(
                "{},{},{}\n",
                n.building,
                n.category.as_str(),
                n.area.as_str()
            ));
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

// --- day labels ---

/// Calendar label of a day. Public holidays (`Ph`) and their eves (`PhEve`)
/// are distinguished from the plain weekday classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DayLabel {
    MonThu,
    Fri,
    PhEve,
    Sat,
    Sun,
    Ph,
}

pub const DAY_LABELS: [DayLabel; 6] = [
    DayLabel::MonThu,
    DayLabel::Fri,
    DayLabel::PhEve,
    DayLabel::Sat,
    DayLabel::Sun,
    DayLabel::Ph,
];

impl DayLabel {
    pub fn parse(s: &str) -> Result<DayLabel> {
        match s.to_ascii_lowercase().as_str() {
            "monthu" => Ok(DayLabel::MonThu),
            "fri" => Ok(DayLabel::Fri),
            "pheve" => Ok(DayLabel::PhEve),
            "sat" => Ok(DayLabel::Sat),
            "sun" => Ok(DayLabel::Sun),
            "ph" => Ok(DayLabel::Ph),
            other => Err(Error::Calendar(format!("unknown day label `{other}`"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            DayLabel::MonThu => "monthu",
            DayLabel::Fri => "fri",
            DayLabel::PhEve => "pheve",
            DayLabel::Sat => "sat",
            DayLabel::Sun => "sun",
            DayLabel::Ph => "ph",
        }
    }

    /// Collapse to the four behavioural groups: holiday eves move with
    /// Fridays and holidays move with Sundays.
    pub fn group(&self) -> DayGroup {
        match self {
            DayLabel::MonThu => DayGroup::MonThu,
            DayLabel::Fri | DayLabel::PhEve => DayGroup::FriPhEve,
            DayLabel::Sat => DayGroup::Sat,
            DayLabel::Sun | DayLabel::Ph => DayGroup::SunPh,
        }
    }
}

/// The four grouped day types used for per-cluster daily curves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DayGroup {
    MonThu,
    FriPhEve,
    Sat,
    SunPh,
}

pub const DAY_GROUPS: [DayGroup; 4] = [
    DayGroup::MonThu,
    DayGroup::FriPhEve,
    DayGroup::Sat,
    DayGroup::SunPh,
];

impl DayGroup {
    pub fn as_str(&self) -> &'static str {
        match self {
            DayGroup::MonThu => "monthu",
            DayGroup::FriPhEve => "fri_pheve",
            DayGroup::Sat => "sat",
            DayGroup::SunPh => "sun_ph",
        }
    }
}

/// Mapping from day index to calendar label, loaded from a `date,day_label`
/// CSV where `date` is the local date the 03:00 window starts on.
#[derive(Debug, Clone, Default)]
pub struct Calendar {
    labels: HashMap<i64, DayLabel>,
}

impl Calendar {
    pub fn new(labels: HashMap<i64, DayLabel>) -> Calendar {
        Calendar { labels }
    }

    pub fn label(&self, day_index: i64) -> Option<DayLabel> {
        self.labels.get(&day_index).copied()
    }

    pub fn set(&mut self, day_index: i64, label: DayLabel) {
        self.labels.insert(day_index, label);
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn load(path: &Path) -> Result<Calendar> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == "date,day_label" => {}
            _ => {
                return Err(Error::Calendar(format!(
                    "{}: missing `date,day_label` header",
                    path.display()
                )))
            }
        }
        let mut labels = HashMap::new();
        for (lineno, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (date_s, label_s) = line.split_once(',').ok_or_else(|| {
                Error::parse(path, lineno + 1, "expected `date,day_label`")
            })?;
            let date = date_s.trim().parse::<chrono::NaiveDate>().map_err(|e| {
                Error::parse(path, lineno + 1, format!("bad date `{}`: {e}", date_s.trim()))
            })?;
            labels.insert(day_index_of_date(date), DayLabel::parse(label_s.trim())?);
        }
        Ok(Calendar { labels })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut days: Vec<_> = self.labels.iter().collect();
        days.sort();
        let mut out = String::from("date,day_label\n");
        for (day, label) in days {
            out.push_str(&format!("{},{}\n", date_of_day_index(*day), label.as_str()));
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

// --- tests ---
