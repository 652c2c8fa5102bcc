//! Pipeline configuration: one flat `key = value` file whose defaults are
//! the constants the whole method is calibrated around (3-minute coalescing,
//! 6-hour merging, 5-minute/16-hour filters, k=4 day clusters, k=8 person
//! clusters, 0.55 dominance, the three flow windows).

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::perspective::location::{HacInput, TimeWindowDef};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Raw probe log (CSV or JSONL, `.gz` transparent).
    pub input: PathBuf,
    /// Building registry CSV.
    pub registry: PathBuf,
    /// Day-type calendar CSV.
    pub calendar: PathBuf,
    /// Directory all stage artifacts are written into.
    pub output_dir: PathBuf,
    /// Master seed for everything randomized; clustering stages refuse to
    /// run without one.
    pub seed: Option<u64>,
    /// Worker thread cap; 0 means one per core.
    pub threads: usize,
    /// Local-time offset of the deployment in seconds.
    pub tz_offset: i64,
    /// Probes on one sensor closer than this chain into one interval.
    pub coalesce_gap: i64,
    /// Treat the input as already-coalesced `device,sensor,first_seen,last_seen`
    /// intervals and skip the coalescing pass.
    pub pre_coalesced: bool,
    /// Consecutive same-building entries with a gap below this merge.
    pub merge_threshold: i64,
    /// Trajectories spanning less than this are dropped.
    pub min_span: i64,
    /// Trajectories with any single stay above this are dropped.
    pub max_stay: i64,
    /// Day-shape clusters per building.
    pub k_time: usize,
    /// Person-day clusters.
    pub k_person: usize,
    /// Independent k-means starts; the best survives.
    pub restarts: usize,
    /// Sample cap for the silhouette score.
    pub silhouette_cap: usize,
    /// Strict lower bound for a dominant transition direction.
    pub dominant_threshold: f64,
    /// Flow windows as local clock intervals.
    pub windows: Vec<TimeWindowDef>,
    /// Location-clustering feature space switch.
    pub hac_input: HacInput,
    /// Dendrogram cut as a fraction of the tallest merge.
    pub cut_fraction: f64,
    /// Buildings the by-time perspective clusters: `facility`, `all`, or a
    /// comma list of building ids.
    pub time_buildings: String,
    /// Category whose buildings feed the per-cluster day-group count curves.
    pub person_curve_category: String,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            input: PathBuf::from("probes.csv"),
            registry: PathBuf::from("registry.csv"),
            calendar: PathBuf::from("calendar.csv"),
            output_dir: PathBuf::from("out"),
            seed: None,
            threads: 0,
            tz_offset: 0,
            coalesce_gap: 180,
            pre_coalesced: false,
            merge_threshold: 21_600,
            min_span: 300,
            max_stay: 57_600,
            k_time: 4,
            k_person: 8,
            restarts: 20,
            silhouette_cap: 2000,
            dominant_threshold: 0.55,
            windows: crate::perspective::location::default_windows(),
            hac_input: HacInput::Dissimilarity,
            cut_fraction: 0.75,
            time_buildings: "facility".into(),
            person_curve_category: "mall".into(),
        }
    }
}

fn parse_local_clock(s: &str) -> Result<i64> {
    let (h, m) = s
        .split_once(':')
        .ok_or_else(|| Error::Config(format!("bad clock time `{s}`")))?;
    let h: i64 = h.parse().map_err(|_| Error::Config(format!("bad clock time `{s}`")))?;
    let m: i64 = m.parse().map_err(|_| Error::Config(format!("bad clock time `{s}`")))?;
    if !(0..=24).contains(&h) || !(0..60).contains(&m) || (h == 24 && m != 0) {
        return Err(Error::Config(format!("clock time `{s}` out of range")));
    }
    Ok(h * 3600 + m * 60)
}

/// Parse `name:HH:MM-HH:MM` triples separated by commas.
pub fn parse_windows(s: &str) -> Result<Vec<TimeWindowDef>> {
    let mut windows = Vec::new();
    let mut names = HashSet::new();
    for part in s.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (name, span) = part
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("bad window `{part}`")))?;
        let (start, end) = span
            .split_once('-')
            .ok_or_else(|| Error::Config(format!("bad window `{part}`")))?;
        let (start, end) = (parse_local_clock(start)?, parse_local_clock(end)?);
        if start >= end {
            return Err(Error::Config(format!("window `{name}` is empty")));
        }
        if !names.insert(name.to_string()) {
            return Err(Error::Config(format!("duplicate window `{name}`")));
        }
        windows.push(TimeWindowDef {
            name: name.to_string(),
            start,
            end,
        });
    }
    if windows.is_empty() {
        return Err(Error::Config("no flow windows defined".into()));
    }
    Ok(windows)
}

pub fn format_windows(windows: &[TimeWindowDef]) -> String {
    let clock = |t: i64| format!("{:02}:{:02}", t / 3600, (t % 3600) / 60);
    windows
        .iter()
        .map(|w| format!("{}:{}-{}", w.name, clock(w.start), clock(w.end)))
        .collect::<Vec<_>>()
        .join(",")
}

impl PipelineConfig {
    /// Apply one `key = value` pair; unknown keys are rejected so typos
    /// surface instead of silently running on defaults.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::Config(format!("bad value `{value}` for `{key}` ({what})"));
        let int = |v: &str| v.parse::<i64>().map_err(|_| bad("integer"));
        let uint = |v: &str| v.parse::<usize>().map_err(|_| bad("non-negative integer"));
        let float = |v: &str| v.parse::<f64>().map_err(|_| bad("number"));
        match key {
            "input" => self.input = PathBuf::from(value),
            "registry" => self.registry = PathBuf::from(value),
            "calendar" => self.calendar = PathBuf::from(value),
            "output_dir" => self.output_dir = PathBuf::from(value),
            "seed" => self.seed = Some(value.parse().map_err(|_| bad("u64"))?),
            "threads" => self.threads = uint(value)?,
            "tz_offset" => self.tz_offset = int(value)?,
            "coalesce_gap" => self.coalesce_gap = int(value)?,
            "pre_coalesced" => {
                self.pre_coalesced = value.parse::<bool>().map_err(|_| bad("true or false"))?
            }
            "merge_threshold" => self.merge_threshold = int(value)?,
            "min_span" => self.min_span = int(value)?,
            "max_stay" => self.max_stay = int(value)?,
            "k_time" => self.k_time = uint(value)?,
            "k_person" => self.k_person = uint(value)?,
            "restarts" => self.restarts = uint(value)?,
            "silhouette_cap" => self.silhouette_cap = uint(value)?,
            "dominant_threshold" => self.dominant_threshold = float(value)?,
            "windows" => self.windows = parse_windows(value)?,
            "hac_input" => self.hac_input = HacInput::parse(value)?,
            "cut_fraction" => self.cut_fraction = float(value)?,
            "time_buildings" => self.time_buildings = value.to_string(),
            "person_curve_category" => self.person_curve_category = value.to_string(),
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("coalesce_gap", self.coalesce_gap),
            ("merge_threshold", self.merge_threshold),
            ("min_span", self.min_span),
            ("max_stay", self.max_stay),
        ];
        for (name, v) in positive {
            if v <= 0 {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.k_time < 1 || self.k_person < 1 {
            return Err(Error::Config("k values must be at least 1".into()));
        }
        if self.restarts < 1 {
            return Err(Error::Config("restarts must be at least 1".into()));
        }
        if !(self.dominant_threshold > 0.0 && self.dominant_threshold < 1.0) {
            return Err(Error::Config("dominant_threshold must be in (0, 1)".into()));
        }
        if !(self.cut_fraction > 0.0 && self.cut_fraction <= 1.0) {
            return Err(Error::Config("cut_fraction must be in (0, 1]".into()));
        }
        if self.windows.is_empty() {
            return Err(Error::Config("no flow windows defined".into()));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<PipelineConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = PipelineConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "{}:{}: expected `key = value`",
                    path.display(),
                    lineno + 1
                ))
            })?;
            config.set(key.trim(), value.trim()).map_err(|e| match e {
                Error::Config(msg) => {
                    Error::Config(format!("{}:{}: {msg}", path.display(), lineno + 1))
                }
                other => other,
            })?;
        }
        Ok(config)
    }

    /// Canonical textual form; hashing this pins a run's configuration.
    pub fn format(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("input", self.input.display().to_string());
        kv("registry", self.registry.display().to_string());
        kv("calendar", self.calendar.display().to_string());
        kv("output_dir", self.output_dir.display().to_string());
        if let Some(seed) = self.seed {
            kv("seed", seed.to_string());
        }
        kv("threads", self.threads.to_string());
        kv("tz_offset", self.tz_offset.to_string());
        kv("coalesce_gap", self.coalesce_gap.to_string());
        kv("pre_coalesced", self.pre_coalesced.to_string());
        kv("merge_threshold", self.merge_threshold.to_string());
        kv("min_span", self.min_span.to_string());
        kv("max_stay", self.max_stay.to_string());
        kv("k_time", self.k_time.to_string());
        kv("k_person", self.k_person.to_string());
        kv("restarts", self.restarts.to_string());
        kv("silhouette_cap", self.silhouette_cap.to_string());
        kv("dominant_threshold", self.dominant_threshold.to_string());
        kv("windows", format_windows(&self.windows));
        kv("hac_input", self.hac_input.as_str().to_string());
        kv("cut_fraction", self.cut_fraction.to_string());
        kv("time_buildings", self.time_buildings.clone());
        kv("person_curve_category", self.person_curve_category.clone());
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.format()).map_err(|e| Error::io(path, e))
    }
}
