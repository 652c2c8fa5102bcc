//! Seeded synthetic probe-log generator. A scenario plants a population of
//! behavioral archetypes (who goes where, when, for how long, per day-type
//! group) over a fixed building registry and calendar; the generator emits
//! the probe log those people would produce, together with ground-truth
//! labels, so the mining pipeline can be scored against a known answer.

mod gen;

pub use gen::{generate, SynthReport};

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use chrono::{Datelike, NaiveDate};

use crate::error::{Error, Result};
use crate::model::{
    day_index_of_date, BuildingId, Calendar, Category, DayGroup, DayLabel, Deployment, NodeId,
    RegistryNode, DAY_GROUPS, DAY_SECONDS,
};

/// A sampled quantity: truncated normal with mean and sigma, cut at two
/// sigmas so itineraries stay near their plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeSpec {
    pub mean: i64,
    pub jitter: i64,
}

/// Where a stop happens. `Home` is the device's stable residential building;
/// `Category` draws a fresh building of that category every day;
/// `StableCategory` draws one per device and sticks to it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocationKind {
    Home,
    Building(BuildingId),
    Category(Category),
    StableCategory(Category),
}

impl LocationKind {
    fn parse(s: &str) -> Result<LocationKind> {
        if s == "home" {
            return Ok(LocationKind::Home);
        }
        if let Some(id) = s.strip_prefix("building-") {
            let mut chars = id.chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) => return Ok(LocationKind::Building(BuildingId(c))),
                _ => return Err(Error::Scenario(format!("bad building location `{s}`"))),
            }
        }
        if let Some(cat) = s.strip_prefix("stable-") {
            return Ok(LocationKind::StableCategory(Category::parse(cat)?));
        }
        Ok(LocationKind::Category(Category::parse(s)?))
    }

    fn format(&self) -> String {
        match self {
            LocationKind::Home => "home".into(),
            LocationKind::Building(b) => format!("building-{b}"),
            LocationKind::Category(c) => c.as_str().into(),
            LocationKind::StableCategory(c) => format!("stable-{}", c.as_str()),
        }
    }
}

/// One planned stop: a location, a start time (as an offset into the 03:00
/// day window), and a stay duration, each with jitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopSpec {
    pub location: LocationKind,
    pub start: TimeSpec,
    pub stay: TimeSpec,
}

/// What an archetype does on one day-type group: the probability of going
/// out at all, and the itinerary when it does.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DayPlan {
    pub active: f64,
    pub stops: Vec<StopSpec>,
}

/// A behavioral archetype with one plan per day-type group. Holiday eves
/// reuse the Friday plan and public holidays the Sunday plan through the
/// group mapping, which plants the calendar structure the by-time
/// perspective is expected to recover.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchetypeSpec {
    pub name: String,
    pub share: f64,
    /// Plans in [`DAY_GROUPS`] order: MonThu, FriPhEve, Sat, SunPh.
    pub plans: [DayPlan; 4],
}

impl ArchetypeSpec {
    pub fn plan(&self, group: DayGroup) -> &DayPlan {
        let i = DAY_GROUPS.iter().position(|&g| g == group).unwrap();
        &self.plans[i]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub n_devices: usize,
    pub n_days: i64,
    pub start_date: NaiveDate,
    pub public_holidays: Vec<NaiveDate>,
    /// Seconds between probe emission slots within a stay.
    pub probe_grid: i64,
    /// Probability of emitting at a slot; a skipped slot forces the next
    /// one, so inter-probe gaps never exceed twice the grid.
    pub probe_keep: f64,
    /// Multiplier on every plan's activity, for scale runs that want many
    /// devices but few active device-days.
    pub activity_scale: f64,
    pub archetypes: Vec<ArchetypeSpec>,
}

impl Scenario {
    /// Check the structural invariants: shares forming a distribution,
    /// itineraries ordered and inside the day window even at extreme jitter.
    pub fn validate(&self) -> Result<()> {
        if self.n_devices == 0 || self.n_days <= 0 {
            return Err(Error::Scenario("need at least 1 device and 1 day".into()));
        }
        if self.probe_grid <= 0 || 2 * self.probe_grid > 240 {
            return Err(Error::Scenario(format!(
                "probe grid {} s would allow gaps beyond the coalescing budget",
                self.probe_grid
            )));
        }
        if !(self.probe_keep > 0.0 && self.probe_keep <= 1.0) {
            return Err(Error::Scenario("probe_keep must be in (0, 1]".into()));
        }
        if !(self.activity_scale >= 0.0) {
            return Err(Error::Scenario("activity_scale must be non-negative".into()));
        }
        if self.archetypes.is_empty() {
            return Err(Error::Scenario("no archetypes defined".into()));
        }
        let mut names = std::collections::HashSet::new();
        let mut share_sum = 0.0;
        for spec in &self.archetypes {
            if spec.name.is_empty()
                || !spec
                    .name
                    .chars()
                    .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
            {
                return Err(Error::Scenario(format!(
                    "archetype name `{}` must be lowercase [a-z0-9_]",
                    spec.name
                )));
            }
            if !names.insert(spec.name.clone()) {
                return Err(Error::Scenario(format!("duplicate archetype `{}`", spec.name)));
            }
            if !(spec.share >= 0.0) {
                return Err(Error::Scenario(format!("archetype `{}`: bad share", spec.name)));
            }
            share_sum += spec.share;
            for (plan, group) in spec.plans.iter().zip(DAY_GROUPS) {
                if !(0.0..=1.0).contains(&plan.active) {
                    return Err(Error::Scenario(format!(
                        "archetype `{}` {}: active must be in [0, 1]",
                        spec.name,
                        group.as_str()
                    )));
                }
                let mut prev_end = 0i64;
                for stop in &plan.stops {
                    let err = |msg: &str| {
                        Err(Error::Scenario(format!(
                            "archetype `{}` {}: {msg}",
                            spec.name,
                            group.as_str()
                        )))
                    };
                    if stop.start.jitter < 0 || stop.stay.jitter < 0 {
                        return err("negative jitter");
                    }
                    if stop.stay.mean < 300 {
                        return err("stays shorter than 300 s would be filtered out");
                    }
                    if stop.start.mean - 2 * stop.start.jitter < 0 {
                        return err("start jitter escapes the day window");
                    }
                    let latest_end = stop.start.mean
                        + 2 * stop.start.jitter
                        + stop.stay.mean
                        + 2 * stop.stay.jitter;
                    if latest_end > DAY_SECONDS {
                        return err("stay can overrun the day window");
                    }
                    if stop.start.mean < prev_end {
                        return err("overlapping mandatory stays");
                    }
                    prev_end = stop.start.mean + stop.stay.mean;
                }
            }
        }
        if (share_sum - 1.0).abs() > 1e-6 {
            return Err(Error::Scenario(format!(
                "archetype shares sum to {share_sum}, expected 1"
            )));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        parse_scenario(&text).map_err(|e| match e {
            Error::Scenario(msg) => Error::Scenario(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, format_scenario(self)).map_err(|e| Error::io(path, e))
    }
}

// --- clock helpers ---

/// Offset into the 03:00 day window of a local clock time, so 03:00 maps
/// to 0 and 02:59 to the end of the window.
pub fn clock_offset(hour: i64, minute: i64) -> i64 {
    (hour * 3600 + minute * 60 - crate::model::DAY_BOUNDARY_OFFSET).rem_euclid(DAY_SECONDS)
}

fn parse_clock(s: &str) -> Result<i64> {
    let (h, m) = s
        .split_once(':')
        .ok_or_else(|| Error::Scenario(format!("bad clock time `{s}`")))?;
    let (h, m) = (
        h.parse::<i64>()
            .map_err(|_| Error::Scenario(format!("bad clock time `{s}`")))?,
        m.parse::<i64>()
            .map_err(|_| Error::Scenario(format!("bad clock time `{s}`")))?,
    );
    if !(0..24).contains(&h) || !(0..60).contains(&m) {
        return Err(Error::Scenario(format!("clock time `{s}` out of range")));
    }
    Ok(clock_offset(h, m))
}

fn parse_duration(s: &str) -> Result<i64> {
    let (h, m) = s
        .split_once(':')
        .ok_or_else(|| Error::Scenario(format!("bad duration `{s}`")))?;
    let (h, m) = (
        h.parse::<i64>()
            .map_err(|_| Error::Scenario(format!("bad duration `{s}`")))?,
        m.parse::<i64>()
            .map_err(|_| Error::Scenario(format!("bad duration `{s}`")))?,
    );
    if h < 0 || !(0..60).contains(&m) {
        return Err(Error::Scenario(format!("duration `{s}` out of range")));
    }
    Ok(h * 3600 + m * 60)
}

fn format_clock(offset: i64) -> String {
    let clock = (offset + crate::model::DAY_BOUNDARY_OFFSET).rem_euclid(DAY_SECONDS);
    format!("{:02}:{:02}", clock / 3600, (clock % 3600) / 60)
}

fn format_duration(seconds: i64) -> String {
    format!("{}:{:02}", seconds / 3600, (seconds % 3600) / 60)
}

// --- scenario file format ---
//
// Flat `key = value` lines. Stops are written as
// `location@HH:MM~J/H:MM~J` where the first time is the start (clock), the
// second the stay duration, and each `~J` a jitter in minutes.

fn parse_stop(s: &str) -> Result<StopSpec> {
    let bad = || Error::Scenario(format!("bad stop `{s}` (want `loc@HH:MM~J/H:MM~J`)"));
    let (loc, times) = s.split_once('@').ok_or_else(bad)?;
    let (start_s, stay_s) = times.split_once('/').ok_or_else(bad)?;
    let split_jitter = |part: &str| -> Result<(String, i64)> {
        match part.split_once('~') {
            Some((v, j)) => Ok((
                v.to_string(),
                j.parse::<i64>().map_err(|_| bad())?.checked_mul(60).ok_or_else(bad)?,
            )),
            None => Ok((part.to_string(), 0)),
        }
    };
    let (start_v, start_j) = split_jitter(start_s)?;
    let (stay_v, stay_j) = split_jitter(stay_s)?;
    Ok(StopSpec {
        location: LocationKind::parse(loc.trim())?,
        start: TimeSpec {
            mean: parse_clock(&start_v)?,
            jitter: start_j,
        },
        stay: TimeSpec {
            mean: parse_duration(&stay_v)?,
            jitter: stay_j,
        },
    })
}

fn format_stop(stop: &StopSpec) -> String {
    let mut s = format!(
        "{}@{}~{}/{}~{}",
        stop.location.format(),
        format_clock(stop.start.mean),
        stop.start.jitter / 60,
        format_duration(stop.stay.mean),
        stop.stay.jitter / 60,
    );
    // Trim zero jitters for readability.
    if s.ends_with("~0") {
        s.truncate(s.len() - 2);
    }
    s
}

fn parse_scenario(text: &str) -> Result<Scenario> {
    let mut scenario = Scenario {
        n_devices: 0,
        n_days: 0,
        start_date: NaiveDate::from_ymd_opt(2024, 1, 1).unwrap(),
        public_holidays: Vec::new(),
        probe_grid: 60,
        probe_keep: 0.35,
        activity_scale: 1.0,
        archetypes: Vec::new(),
    };
    let mut index: HashMap<String, usize> = HashMap::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Scenario(format!("line {}: expected `key = value`", lineno + 1))
        })?;
        let (key, value) = (key.trim(), value.trim());
        let ctx = |e: Error| match e {
            Error::Scenario(msg) => Error::Scenario(format!("line {}: {msg}", lineno + 1)),
            other => other,
        };
        let num = |v: &str| -> Result<f64> {
            v.parse::<f64>()
                .map_err(|_| Error::Scenario(format!("line {}: bad number `{v}`", lineno + 1)))
        };
        match key {
            "devices" => scenario.n_devices = num(value)? as usize,
            "days" => scenario.n_days = num(value)? as i64,
            "start_date" => {
                scenario.start_date = value.parse().map_err(|e| {
                    Error::Scenario(format!("line {}: bad date `{value}`: {e}", lineno + 1))
                })?
            }
            "public_holidays" => {
                scenario.public_holidays = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| {
                        s.trim().parse().map_err(|e| {
                            Error::Scenario(format!("line {}: bad date `{s}`: {e}", lineno + 1))
                        })
                    })
                    .collect::<Result<_>>()?
            }
            "probe_grid" => scenario.probe_grid = num(value)? as i64,
            "probe_keep" => scenario.probe_keep = num(value)?,
            "activity_scale" => scenario.activity_scale = num(value)?,
            _ => {
                if let Some(rest) = key.strip_prefix("archetype.") {
                    let (name, field) = rest.split_once('.').ok_or_else(|| {
                        Error::Scenario(format!("line {}: bad archetype key `{key}`", lineno + 1))
                    })?;
                    let idx = *index.entry(name.to_string()).or_insert_with(|| {
                        scenario.archetypes.push(ArchetypeSpec {
                            name: name.to_string(),
                            share: 0.0,
                            plans: Default::default(),
                        });
                        scenario.archetypes.len() - 1
                    });
                    let spec = &mut scenario.archetypes[idx];
                    if field == "share" {
                        spec.share = num(value)?;
                    } else {
                        let group_idx = DAY_GROUPS
                            .iter()
                            .position(|g| g.as_str() == field)
                            .ok_or_else(|| {
                                Error::Scenario(format!(
                                    "line {}: unknown day group `{field}`",
                                    lineno + 1
                                ))
                            })?;
                        let (active_s, stops_s) = value.split_once('|').ok_or_else(|| {
                            Error::Scenario(format!(
                                "line {}: expected `active | stops`",
                                lineno + 1
                            ))
                        })?;
                        let stops = stops_s
                            .split(',')
                            .map(str::trim)
                            .filter(|s| !s.is_empty())
                            .map(|s| parse_stop(s).map_err(ctx))
                            .collect::<Result<_>>()?;
                        spec.plans[group_idx] = DayPlan {
                            active: num(active_s.trim())?,
                            stops,
                        };
                    }
                } else {
                    return Err(Error::Scenario(format!(
                        "line {}: unknown key `{key}`",
                        lineno + 1
                    )));
                }
            }
        }
    }
    scenario.validate()?;
    Ok(scenario)
}

fn format_scenario(scenario: &Scenario) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "devices = {}", scenario.n_devices);
    let _ = writeln!(out, "days = {}", scenario.n_days);
    let _ = writeln!(out, "start_date = {}", scenario.start_date);
    if !scenario.public_holidays.is_empty() {
        let dates: Vec<String> = scenario
            .public_holidays
            .iter()
            .map(|d| d.to_string())
            .collect();
        let _ = writeln!(out, "public_holidays = {}", dates.join(","));
    }
    let _ = writeln!(out, "probe_grid = {}", scenario.probe_grid);
    let _ = writeln!(out, "probe_keep = {}", scenario.probe_keep);
    let _ = writeln!(out, "activity_scale = {}", scenario.activity_scale);
    for spec in &scenario.archetypes {
        let _ = writeln!(out);
        let _ = writeln!(out, "archetype.{}.share = {}", spec.name, spec.share);
        for (plan, group) in spec.plans.iter().zip(DAY_GROUPS) {
            let stops: Vec<String> = plan.stops.iter().map(format_stop).collect();
            let _ = writeln!(
                out,
                "archetype.{}.{} = {} | {}",
                spec.name,
                group.as_str(),
                plan.active,
                stops.join(", ")
            );
        }
    }
    out
}

// --- built-in registry and calendar ---

/// The default 20-building deployment: one hospital, one institute, four
/// malls, fourteen residential buildings. Facility buildings carry two
/// sensors, residential buildings one.
pub fn default_registry() -> Deployment {
    let mut nodes = Vec::new();
    let mut push = |c: char, category: Category| {
        let area = if category == Category::Residential {
            crate::model::Area::Residential
        } else {
            crate::model::Area::Facility
        };
        nodes.push(RegistryNode {
            building: BuildingId(c),
            category,
            area,
        });
    };
    push('H', Category::Hospital);
    push('I', Category::Institute);
    for c in ['M', 'N', 'P', 'Q'] {
        push(c, Category::Mall);
    }
    for c in ['A', 'B', 'C', 'D', 'E', 'F', 'G', 'J', 'K', 'L', 'O', 'R', 'S', 'T'] {
        push(c, Category::Residential);
    }
    Deployment::new(nodes).expect("default registry is well-formed")
}

/// Sensor ids per building: facility buildings have two so the generator
/// exercises sensor-to-building merging, residential ones have a single
/// sensor.
pub fn sensors_of(deployment: &Deployment) -> HashMap<BuildingId, Vec<NodeId>> {
    deployment
        .nodes
        .iter()
        .map(|n| {
            let b = n.building;
            let count = if n.area == crate::model::Area::Facility { 2 } else { 1 };
            let sensors = (1..=count).map(|i| NodeId::new(format!("{}{i}", b.0))).collect();
            (b, sensors)
        })
        .collect()
}

/// Calendar over the scenario's day span: weekday labels from the date,
/// public holidays overriding theirs, and the day before a holiday marked
/// as its eve.
pub fn build_calendar(scenario: &Scenario) -> Calendar {
    let first = day_index_of_date(scenario.start_date);
    let ph: std::collections::HashSet<i64> = scenario
        .public_holidays
        .iter()
        .map(|&d| day_index_of_date(d))
        .collect();
    let mut calendar = Calendar::default();
    for day in first..first + scenario.n_days {
        let label = if ph.contains(&day) {
            DayLabel::Ph
        } else if ph.contains(&(day + 1)) {
            DayLabel::PhEve
        } else {
            let date = scenario.start_date + chrono::Duration::days(day - first);
            match date.weekday() {
                chrono::Weekday::Fri => DayLabel::Fri,
                chrono::Weekday::Sat => DayLabel::Sat,
                chrono::Weekday::Sun => DayLabel::Sun,
                _ => DayLabel::MonThu,
            }
        };
        calendar.set(day, label);
    }
    calendar
}

// --- built-in scenarios ---

fn stop(location: LocationKind, start: (i64, i64), start_jit_min: i64, stay: &str, stay_jit_min: i64) -> StopSpec {
    let (h, m) = start;
    StopSpec {
        location,
        start: TimeSpec {
            mean: clock_offset(h, m),
            jitter: start_jit_min * 60,
        },
        stay: TimeSpec {
            mean: parse_duration(stay).expect("built-in durations parse"),
            jitter: stay_jit_min * 60,
        },
    }
}

/// The default population: eight archetypes mirroring the by-person cluster
/// semantics (long and short mall visitors, full-day and part-day institute
/// goers, a mixed mall-plus-home pattern, hospital staff and visitors, and
/// stay-home residents). Category stay durations are constant across
/// day-type groups, so each archetype is one compact blob in stay-time
/// space, while start times and turnout shift per group to give every
/// facility building four distinct daily shapes.
pub fn default_scenario() -> Scenario {
    use Category::{Hospital, Institute, Mall};
    use LocationKind::{Category as Cat, Home};

    let plan = |active: f64, stops: Vec<StopSpec>| DayPlan { active, stops };
    let archetypes = vec![
        ArchetypeSpec {
            name: "mall_full".into(),
            share: 0.10,
            plans: [
                plan(0.55, vec![stop(Cat(Mall), (11, 0), 25, "7:00", 25)]),
                plan(0.60, vec![stop(Cat(Mall), (13, 0), 25, "7:00", 25)]),
                plan(0.75, vec![stop(Cat(Mall), (10, 0), 25, "7:00", 25)]),
                plan(0.60, vec![stop(Cat(Mall), (12, 0), 25, "7:00", 25)]),
            ],
        },
        ArchetypeSpec {
            name: "mall_short".into(),
            share: 0.14,
            plans: [
                plan(0.50, vec![stop(Cat(Mall), (12, 10), 20, "2:30", 15)]),
                plan(0.65, vec![stop(Cat(Mall), (17, 10), 20, "2:30", 15)]),
                plan(0.75, vec![stop(Cat(Mall), (14, 0), 30, "2:30", 15)]),
                plan(0.65, vec![stop(Cat(Mall), (9, 40), 20, "2:30", 15)]),
            ],
        },
        ArchetypeSpec {
            name: "institute_full".into(),
            share: 0.12,
            plans: [
                plan(0.90, vec![stop(Cat(Institute), (8, 5), 10, "9:00", 15)]),
                plan(0.85, vec![stop(Cat(Institute), (8, 5), 10, "9:00", 15)]),
                plan(0.08, vec![stop(Cat(Institute), (9, 5), 15, "9:00", 15)]),
                plan(0.03, vec![stop(Cat(Institute), (9, 5), 15, "9:00", 15)]),
            ],
        },
        ArchetypeSpec {
            name: "institute_part".into(),
            share: 0.10,
            plans: [
                plan(0.80, vec![stop(Cat(Institute), (9, 5), 15, "3:30", 15)]),
                plan(0.80, vec![stop(Cat(Institute), (13, 35), 15, "3:30", 15)]),
                plan(0.50, vec![stop(Cat(Institute), (10, 5), 20, "3:30", 15)]),
                plan(0.40, vec![stop(Cat(Institute), (13, 5), 20, "3:30", 15)]),
            ],
        },
        ArchetypeSpec {
            name: "mall_resident".into(),
            share: 0.12,
            plans: [
                plan(
                    0.60,
                    vec![
                        stop(Home, (3, 0), 0, "4:00", 10),
                        stop(Cat(Mall), (9, 30), 20, "5:00", 20),
                        stop(Home, (19, 0), 10, "7:40", 0),
                    ],
                ),
                plan(
                    0.60,
                    vec![
                        stop(Home, (3, 0), 0, "4:00", 10),
                        stop(Cat(Mall), (12, 0), 20, "5:00", 20),
                        stop(Home, (19, 0), 10, "7:40", 0),
                    ],
                ),
                plan(
                    0.70,
                    vec![
                        stop(Home, (3, 0), 0, "4:00", 10),
                        stop(Cat(Mall), (10, 30), 20, "5:00", 20),
                        stop(Home, (19, 0), 10, "7:40", 0),
                    ],
                ),
                plan(
                    0.60,
                    vec![
                        stop(Home, (3, 0), 0, "4:00", 10),
                        stop(Cat(Mall), (13, 30), 20, "5:00", 20),
                        stop(Home, (19, 0), 10, "7:40", 0),
                    ],
                ),
            ],
        },
        ArchetypeSpec {
            name: "hospital_worker".into(),
            share: 0.12,
            plans: {
                let workday = vec![
                    stop(Cat(Mall), (8, 5), 2, "0:07", 2),
                    stop(Cat(Hospital), (8, 20), 6, "9:20", 8),
                    stop(Cat(Mall), (17, 45), 2, "0:10", 2),
                ];
                [
                    plan(0.95, workday.clone()),
                    plan(0.95, workday.clone()),
                    plan(0.55, workday.clone()),
                    plan(0.45, workday),
                ]
            },
        },
        ArchetypeSpec {
            name: "hospital_visitor".into(),
            share: 0.12,
            plans: [
                plan(0.50, vec![stop(Cat(Hospital), (10, 15), 20, "2:30", 15)]),
                plan(0.50, vec![stop(Cat(Hospital), (15, 45), 20, "2:30", 15)]),
                plan(0.70, vec![stop(Cat(Hospital), (12, 45), 25, "2:30", 15)]),
                plan(0.65, vec![stop(Cat(Hospital), (18, 15), 20, "2:30", 15)]),
            ],
        },
        ArchetypeSpec {
            name: "resident".into(),
            share: 0.18,
            plans: {
                let home_day = vec![
                    stop(Home, (3, 0), 0, "4:45", 8),
                    stop(Home, (19, 30), 12, "5:00", 10),
                ];
                [
                    plan(0.90, home_day.clone()),
                    plan(0.90, home_day.clone()),
                    plan(0.92, home_day.clone()),
                    plan(0.92, home_day),
                ]
            },
        },
    ];

    let scenario = Scenario {
        n_devices: 5000,
        n_days: 28,
        start_date: NaiveDate::from_ymd_opt(2024, 1, 1).unwrap(),
        public_holidays: vec![NaiveDate::from_ymd_opt(2024, 1, 9).unwrap()],
        probe_grid: 60,
        probe_keep: 0.35,
        activity_scale: 1.0,
        archetypes,
    };
    scenario.validate().expect("default scenario is valid");
    scenario
}

/// A commuting population for flow analysis: every device holds a stable
/// home and a stable workplace (one archetype per facility building), leaves
/// home during the morning window and leaves work during the evening one,
/// planting a full set of reversing home-work flow pairs.
pub fn flow_scenario() -> Scenario {
    let facilities = ['H', 'I', 'M', 'N', 'P', 'Q'];
    let archetypes = facilities
        .iter()
        .map(|&f| {
            let commute = vec![
                stop(LocationKind::Home, (3, 0), 0, "4:20", 5),
                stop(LocationKind::Building(BuildingId(f)), (8, 0), 10, "10:30", 10),
                stop(LocationKind::Home, (19, 30), 10, "6:30", 10),
            ];
            ArchetypeSpec {
                name: format!("commuter_{}", f.to_ascii_lowercase()),
                share: 1.0 / facilities.len() as f64,
                plans: [
                    DayPlan { active: 1.0, stops: commute.clone() },
                    DayPlan { active: 1.0, stops: commute.clone() },
                    DayPlan { active: 1.0, stops: commute.clone() },
                    DayPlan { active: 1.0, stops: commute },
                ],
            }
        })
        .collect();
    let scenario = Scenario {
        n_devices: 800,
        n_days: 7,
        start_date: NaiveDate::from_ymd_opt(2024, 1, 1).unwrap(),
        public_holidays: Vec::new(),
        probe_grid: 60,
        probe_keep: 0.35,
        activity_scale: 1.0,
        archetypes,
    };
    scenario.validate().expect("flow scenario is valid");
    scenario
}
