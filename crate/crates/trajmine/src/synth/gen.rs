//! Probe-log emission. Every (device, day) pair gets its own seeded RNG, so
//! output does not depend on iteration or thread order; per-day batches are
//! sorted by timestamp before writing.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{
    day_index_of_date, date_of_day_index, BuildingId, Category, DayWindow, Deployment, NodeId,
    DAY_GROUPS, DAY_SECONDS,
};
use crate::perspective::location::{default_windows, TimeWindowDef};
use crate::seeds;

use super::{build_calendar, default_registry, sensors_of, LocationKind, Scenario, TimeSpec};

/// Seed lane for per-device stable choices; day indices stay far below it.
const STABLE_LANE: u64 = u64::MAX;
/// Probability that a stay at a multi-sensor building hops to the other
/// sensor partway through, exercising sensor-to-building merging.
const SENSOR_SWITCH_PROB: f64 = 0.15;

#[derive(Debug)]
pub struct SynthReport {
    pub devices: usize,
    pub device_days: u64,
    pub probes: u64,
    pub probes_path: PathBuf,
    pub ground_truth_path: PathBuf,
    pub transitions_path: PathBuf,
    pub registry_path: PathBuf,
    pub calendar_path: PathBuf,
    pub scenario_path: PathBuf,
}

/// Largest-remainder apportionment of `n` devices over archetype shares.
fn apportion(shares: &[f64], n: usize) -> Vec<usize> {
    let mut counts: Vec<usize> = shares.iter().map(|s| (s * n as f64).floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = shares[a] * n as f64 - counts[a] as f64;
        let fb = shares[b] * n as f64 - counts[b] as f64;
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().take(n - assigned) {
        counts[i] += 1;
    }
    counts
}

/// Standard normal via Box-Muller; consumes exactly two draws.
fn std_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Truncated-normal sample around a time spec, cut at two sigmas.
fn jittered(rng: &mut ChaCha8Rng, spec: TimeSpec) -> i64 {
    if spec.jitter == 0 {
        return spec.mean;
    }
    let z = std_normal(rng).clamp(-2.0, 2.0);
    spec.mean + (z * spec.jitter as f64).round() as i64
}

/// Per-device stable choices, drawn once from the device's stable lane.
struct StableChoice {
    home: BuildingId,
    by_category: [BuildingId; 4],
}

const CATEGORY_ORDER: [Category; 4] = [
    Category::Hospital,
    Category::Mall,
    Category::Institute,
    Category::Residential,
];

fn stable_choice(seed: u64, device: u64, by_cat: &HashMap<Category, Vec<BuildingId>>) -> StableChoice {
    let mut rng = ChaCha8Rng::seed_from_u64(seeds::mix(&[seed, device, STABLE_LANE]));
    let residential = &by_cat[&Category::Residential];
    let home = residential[(rng.gen::<u64>() % residential.len() as u64) as usize];
    let by_category = CATEGORY_ORDER.map(|c| {
        let list = &by_cat[&c];
        list[(rng.gen::<u64>() % list.len() as u64) as usize]
    });
    StableChoice { home, by_category }
}

fn resolve_location(
    kind: LocationKind,
    rng: &mut ChaCha8Rng,
    stable: &StableChoice,
    by_cat: &HashMap<Category, Vec<BuildingId>>,
) -> BuildingId {
    match kind {
        LocationKind::Home => stable.home,
        LocationKind::Building(b) => b,
        LocationKind::Category(c) => {
            let list = &by_cat[&c];
            list[(rng.gen::<u64>() % list.len() as u64) as usize]
        }
        LocationKind::StableCategory(c) => {
            let i = CATEGORY_ORDER.iter().position(|&x| x == c).unwrap();
            stable.by_category[i]
        }
    }
}

/// Emit probe offsets for one stay: one at the start, grid slots thinned by
/// `keep` with a forced emission after every skip (so gaps never exceed two
/// grid steps), and one at the end.
fn emit_probes(
    rng: &mut ChaCha8Rng,
    start: i64,
    end: i64,
    grid: i64,
    keep: f64,
    mut sink: impl FnMut(i64),
) {
    sink(start);
    let mut last = start;
    let mut t = start + grid;
    while t < end {
        if t - last >= 2 * grid || rng.gen::<f64>() < keep {
            sink(t);
            last = t;
        }
        t += grid;
    }
    if end > start {
        sink(end);
    }
}

/// A realized stop: where the device actually was, ending at a window
/// offset (transition ground truth only needs departures).
struct PlannedStop {
    building: BuildingId,
    end: i64,
}

struct DeviceDay {
    /// (timestamp, sensor id bytes), sensor ids being two ASCII chars.
    probes: Vec<(i64, [u8; 2])>,
    stops: Vec<PlannedStop>,
}

#[allow(clippy::too_many_arguments)]
fn device_day(
    scenario: &Scenario,
    seed: u64,
    archetype: usize,
    group_idx: usize,
    device: u64,
    day: i64,
    window: &DayWindow,
    stable: &StableChoice,
    by_cat: &HashMap<Category, Vec<BuildingId>>,
    sensors: &HashMap<BuildingId, Vec<NodeId>>,
) -> Option<DeviceDay> {
    let plan = &scenario.archetypes[archetype].plans[group_idx];
    if plan.stops.is_empty() {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seeds::mix(&[seed, device, day as u64]));
    let turnout = (plan.active * scenario.activity_scale).min(1.0);
    if rng.gen::<f64>() >= turnout {
        return None;
    }

    let mut stops = Vec::with_capacity(plan.stops.len());
    let mut probes = Vec::new();
    let mut prev_end = i64::MIN;
    for spec in &plan.stops {
        let building = resolve_location(spec.location, &mut rng, stable, by_cat);
        let mut start = jittered(&mut rng, spec.start);
        let stay = jittered(&mut rng, spec.stay).max(300);
        if prev_end >= 0 {
            start = start.max(prev_end + 60);
        }
        // Jitter pushed the stop out of the day window; drop it.
        if start + 300 > DAY_SECONDS {
            continue;
        }
        let end = (start + stay).min(DAY_SECONDS - 1);

        let building_sensors = &sensors[&building];
        let pick = (rng.gen::<u64>() % building_sensors.len() as u64) as usize;
        let mut sensor = &building_sensors[pick];
        let other = &building_sensors[(pick + 1) % building_sensors.len()];
        let mut switch_at = i64::MAX;
        if building_sensors.len() > 1 && rng.gen::<f64>() < SENSOR_SWITCH_PROB && end - start > 2 {
            switch_at = start + 1 + (rng.gen::<u64>() % (end - start - 1) as u64) as i64;
        }
        let sensor_bytes = |s: &NodeId| -> [u8; 2] {
            let b = s.as_str().as_bytes();
            debug_assert_eq!(b.len(), 2);
            [b[0], b[1]]
        };
        emit_probes(&mut rng, start, end, scenario.probe_grid, scenario.probe_keep, |off| {
            if off >= switch_at {
                sensor = other;
            }
            probes.push((window.start + off, sensor_bytes(sensor)));
        });
        stops.push(PlannedStop { building, end });
        prev_end = end;
    }
    if probes.is_empty() {
        return None;
    }
    Some(DeviceDay { probes, stops })
}

/// Run a scenario: write `probes.csv.gz`, `ground_truth.csv`,
/// `gt_transitions.csv`, `registry.csv`, `calendar.csv`, and a copy of the
/// scenario itself into `out_dir`.
pub fn generate(scenario: &Scenario, seed: u64, out_dir: &Path) -> Result<SynthReport> {
    scenario.validate()?;
    let deployment = default_registry();
    for spec in &scenario.archetypes {
        for plan in &spec.plans {
            for stop in &plan.stops {
                if let LocationKind::Building(b) = stop.location {
                    if deployment.index_of(b).is_none() {
                        return Err(Error::Scenario(format!(
                            "archetype `{}` references unknown building `{b}`",
                            spec.name
                        )));
                    }
                }
            }
        }
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let registry_path = out_dir.join("registry.csv");
    deployment.save(&registry_path)?;
    let calendar = build_calendar(scenario);
    let calendar_path = out_dir.join("calendar.csv");
    calendar.save(&calendar_path)?;
    let scenario_path = out_dir.join("scenario.conf");
    scenario.save(&scenario_path)?;

    let sensors = sensors_of(&deployment);
    let mut by_cat: HashMap<Category, Vec<BuildingId>> = HashMap::new();
    for node in &deployment.nodes {
        by_cat.entry(node.category).or_default().push(node.building);
    }

    let shares: Vec<f64> = scenario.archetypes.iter().map(|a| a.share).collect();
    let counts = apportion(&shares, scenario.n_devices);
    let mut archetype_of = Vec::with_capacity(scenario.n_devices);
    for (idx, &count) in counts.iter().enumerate() {
        archetype_of.extend(std::iter::repeat(idx).take(count));
    }
    let device_ids: Vec<String> = (0..scenario.n_devices as u64)
        .map(|i| format!("{:08x}{:06x}", seeds::mix(&[seed, i]) as u32, i))
        .collect();
    let stable: Vec<StableChoice> = (0..scenario.n_devices as u64)
        .into_par_iter()
        .map(|i| stable_choice(seed, i, &by_cat))
        .collect();

    let probes_path = out_dir.join("probes.csv.gz");
    let gz = flate2::write::GzEncoder::new(
        File::create(&probes_path).map_err(|e| Error::io(&probes_path, e))?,
        flate2::Compression::fast(),
    );
    let mut probes_w = BufWriter::with_capacity(1 << 20, gz);
    probes_w
        .write_all(b"device,sensor,timestamp\n")
        .map_err(|e| Error::io(&probes_path, e))?;

    let ground_truth_path = out_dir.join("ground_truth.csv");
    let mut gt_w = BufWriter::new(
        File::create(&ground_truth_path).map_err(|e| Error::io(&ground_truth_path, e))?,
    );
    writeln!(gt_w, "device,date,archetype").map_err(|e| Error::io(&ground_truth_path, e))?;

    let windows = default_windows();
    let n = deployment.len();
    let mut transition_counts: Vec<Vec<Vec<u64>>> =
        windows.iter().map(|_| vec![vec![0u64; n]; n]).collect();

    let first_day = day_index_of_date(scenario.start_date);
    let mut device_days = 0u64;
    let mut probe_count = 0u64;
    for day in first_day..first_day + scenario.n_days {
        let window = DayWindow::from_index(day, 0);
        let label = calendar.label(day).expect("generated calendar covers the span");
        let group_idx = DAY_GROUPS.iter().position(|&g| g == label.group()).unwrap();

        let results: Vec<Option<DeviceDay>> = (0..scenario.n_devices as u64)
            .into_par_iter()
            .map(|dev| {
                device_day(
                    scenario,
                    seed,
                    archetype_of[dev as usize],
                    group_idx,
                    dev,
                    day,
                    &window,
                    &stable[dev as usize],
                    &by_cat,
                    &sensors,
                )
            })
            .collect();

        let date = date_of_day_index(day);
        let mut day_probes: Vec<(i64, u32, [u8; 2])> = Vec::new();
        for (dev, result) in results.into_iter().enumerate() {
            let Some(dd) = result else { continue };
            device_days += 1;
            writeln!(
                gt_w,
                "{},{},{}",
                device_ids[dev],
                date,
                scenario.archetypes[archetype_of[dev]].name
            )
            .map_err(|e| Error::io(&ground_truth_path, e))?;
            record_transitions(&dd.stops, &window, &windows, &deployment, &mut transition_counts);
            day_probes.extend(dd.probes.into_iter().map(|(ts, s)| (ts, dev as u32, s)));
        }
        day_probes.sort_unstable();
        probe_count += day_probes.len() as u64;
        for (ts, dev, sensor) in day_probes {
            probes_w
                .write_fmt(format_args!(
                    "{},{}{},{ts}\n",
                    device_ids[dev as usize], sensor[0] as char, sensor[1] as char
                ))
                .map_err(|e| Error::io(&probes_path, e))?;
        }
    }
    probes_w
        .into_inner()
        .map_err(|e| Error::io(&probes_path, e.into_error()))?
        .finish()
        .map_err(|e| Error::io(&probes_path, e))?;
    gt_w.flush().map_err(|e| Error::io(&ground_truth_path, e))?;

    let transitions_path = out_dir.join("gt_transitions.csv");
    let mut tw = BufWriter::new(
        File::create(&transitions_path).map_err(|e| Error::io(&transitions_path, e))?,
    );
    writeln!(tw, "window,from,to,count").map_err(|e| Error::io(&transitions_path, e))?;
    for (w, counts) in windows.iter().zip(&transition_counts) {
        for (i, row) in counts.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                if c > 0 {
                    writeln!(
                        tw,
                        "{},{},{},{c}",
                        w.name, deployment.nodes[i].building, deployment.nodes[j].building
                    )
                    .map_err(|e| Error::io(&transitions_path, e))?;
                }
            }
        }
    }
    tw.flush().map_err(|e| Error::io(&transitions_path, e))?;

    Ok(SynthReport {
        devices: scenario.n_devices,
        device_days,
        probes: probe_count,
        probes_path,
        ground_truth_path,
        transitions_path,
        registry_path,
        calendar_path,
        scenario_path,
    })
}

/// Tally planted transitions: consecutive stops at distinct buildings,
/// attributed to the window containing the departure (the source stop's
/// end).
fn record_transitions(
    stops: &[PlannedStop],
    day: &DayWindow,
    windows: &[TimeWindowDef],
    deployment: &Deployment,
    counts: &mut [Vec<Vec<u64>>],
) {
    for pair in stops.windows(2) {
        if pair[0].building == pair[1].building {
            continue;
        }
        let departure = day.start + pair[0].end;
        let from = deployment.index_of(pair[0].building).unwrap();
        let to = deployment.index_of(pair[1].building).unwrap();
        for (w, matrix) in windows.iter().zip(counts.iter_mut()) {
            if w.contains(departure, day.start) {
                matrix[from][to] += 1;
            }
        }
    }
}
