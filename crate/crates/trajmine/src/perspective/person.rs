//! Person perspective: summarize each day trajectory as five accumulated
//! stay durations (hospital, mall, institute, residential day, residential
//! night), cluster the vectors, and describe each cluster of people with
//! transition graphs, visit histograms, start/end time distributions, and
//! day-type presence curves.

use std::collections::{HashMap, HashSet};
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cluster::{kmeans, silhouette, FeatureVector};
use crate::error::{Error, Result};
use crate::model::{
    date_of_day_index, BuildingId, Calendar, Category, DayGroup, DayTrajectory, Deployment,
    DeviceId, DAY_BOUNDARY_OFFSET, DAY_GROUPS, DAY_SECONDS,
};
use crate::perspective::overlap;
use crate::perspective::time::{hour_bucket_range, HOURS_PER_DAY};
use crate::seeds;

pub const FEATURE_COUNT: usize = 5;
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "hospital",
    "mall",
    "institute",
    "residential_day",
    "residential_night",
];

/// Residential stays are split at these local clock times: seconds within
/// [07:00, 19:00) count as day time, the rest as night time.
const RESIDENTIAL_DAY_FROM: i64 = 7 * 3600;
const RESIDENTIAL_DAY_TO: i64 = 19 * 3600;

/// Accumulated stay seconds of one device on one day, by category.
#[derive(Debug, Clone, PartialEq)]
pub struct PersonFeature {
    pub device: DeviceId,
    pub day: i64,
    /// Seconds in feature order: hospital, mall, institute, residential
    /// (day), residential (night).
    pub seconds: [f64; FEATURE_COUNT],
}

/// Attribute every stay of a building-level trajectory to its category,
/// splitting residential stays at the 07:00 and 19:00 local boundaries.
pub fn person_features(traj: &DayTrajectory, deployment: &Deployment) -> Result<PersonFeature> {
    let mut seconds = [0.0; FEATURE_COUNT];
    // The window opens at 03:00 local, so the day-time period [07:00, 19:00)
    // sits at a fixed offset inside it.
    let day_from = traj.day.start + RESIDENTIAL_DAY_FROM - DAY_BOUNDARY_OFFSET;
    let day_to = traj.day.start + RESIDENTIAL_DAY_TO - DAY_BOUNDARY_OFFSET;
    for entry in &traj.entries {
        let building = entry.node.building();
        let category = deployment.category_of(building).ok_or_else(|| {
            Error::Registry(format!("building `{building}` is not in the registry"))
        })?;
        match category {
            Category::Hospital => seconds[0] += entry.stay as f64,
            Category::Mall => seconds[1] += entry.stay as f64,
            Category::Institute => seconds[2] += entry.stay as f64,
            Category::Residential => {
                let day_part = overlap(entry.start, entry.end, day_from, day_to);
                seconds[3] += day_part as f64;
                seconds[4] += (entry.stay - day_part) as f64;
            }
        }
    }
    Ok(PersonFeature {
        device: traj.device.clone(),
        day: traj.day.index,
        seconds,
    })
}

/// Extract features for every trajectory, preserving order.
pub fn extract_features(
    trajectories: &[DayTrajectory],
    deployment: &Deployment,
) -> Result<Vec<PersonFeature>> {
    trajectories
        .par_iter()
        .map(|t| person_features(t, deployment))
        .collect()
}

/// Clusters of people. Labels are canonical 1-based CP numbers ordered by
/// descending mean mall stay, then hospital, institute, residential day,
/// residential night, so the same population always gets the same numbering.
#[derive(Debug, Clone)]
pub struct PersonClusters {
    pub k: usize,
    /// Canonical CP label per trajectory, aligned with the feature slice.
    pub labels: Vec<usize>,
    /// Cluster sizes in CP order.
    pub sizes: Vec<usize>,
    /// Mean stay seconds per CP, in CP order.
    pub centroids: Vec<[f64; FEATURE_COUNT]>,
    pub sse: f64,
    pub silhouette: f64,
    /// Number of trajectories the silhouette was scored on.
    pub silhouette_points: usize,
}

/// K-means over the raw second counts (durations share a unit, so they are
/// left unnormalized and the centroids stay interpretable). The silhouette
/// is scored on a seeded subsample of at most `silhouette_cap` points, since
/// the exact score is quadratic in the population.
pub fn cluster_persons(
    features: &[PersonFeature],
    k: usize,
    seed: u64,
    restarts: usize,
    silhouette_cap: usize,
) -> Result<PersonClusters> {
    let points: Vec<FeatureVector> = features
        .iter()
        .map(|f| FeatureVector::new(f.seconds.to_vec()))
        .collect::<Result<_>>()?;
    let result = kmeans(&points, k, seed, restarts)?;

    // Canonical CP order from the raw-space centroids: mall, hospital,
    // institute, residential day, residential night, all descending.
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        let key = |c: usize| {
            let m = &result.centroids[c];
            [m[1], m[0], m[2], m[3], m[4]]
        };
        key(b)
            .partial_cmp(&key(a))
            .expect("centroids are finite")
            .then(a.cmp(&b))
    });
    let mut label_of = vec![0usize; k];
    for (rank, &c) in order.iter().enumerate() {
        label_of[c] = rank + 1;
    }
    let labels: Vec<usize> = result.assignments.iter().map(|&a| label_of[a]).collect();
    let mut sizes = vec![0usize; k];
    for &l in &labels {
        sizes[l - 1] += 1;
    }
    let centroids: Vec<[f64; FEATURE_COUNT]> = order
        .iter()
        .map(|&c| {
            let mut m = [0.0; FEATURE_COUNT];
            m.copy_from_slice(&result.centroids[c]);
            m
        })
        .collect();

    let (silhouette, silhouette_points) = if points.len() <= silhouette_cap {
        (silhouette(&points, &result.assignments, k)?, points.len())
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seeds::mix(&[seed, 0x73696c]));
        let mut idx: Vec<usize> = (0..points.len()).collect();
        idx.shuffle(&mut rng);
        idx.truncate(silhouette_cap);
        idx.sort_unstable();
        let sub_points: Vec<FeatureVector> = idx.iter().map(|&i| points[i].clone()).collect();
        let sub_assign: Vec<usize> = idx.iter().map(|&i| result.assignments[i]).collect();
        (silhouette(&sub_points, &sub_assign, k)?, silhouette_cap)
    };

    Ok(PersonClusters {
        k,
        labels,
        sizes,
        centroids,
        sse: result.sse,
        silhouette,
        silhouette_points,
    })
}

/// Undirected transition edge: counts of consecutive-entry moves between the
/// two buildings, both directions summed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionEdge {
    pub a: BuildingId,
    pub b: BuildingId,
    pub weight: u64,
}

/// Edge weights over the building pairs touched by the given trajectories,
/// sorted by weight descending (ties by pair) so the heaviest flows lead.
pub fn cluster_transition_graph<'a>(
    trajectories: impl IntoIterator<Item = &'a DayTrajectory>,
) -> Vec<TransitionEdge> {
    let mut counts: HashMap<(BuildingId, BuildingId), u64> = HashMap::new();
    for traj in trajectories {
        for pair in traj.entries.windows(2) {
            let x = pair[0].node.building();
            let y = pair[1].node.building();
            let key = if x <= y { (x, y) } else { (y, x) };
            *counts.entry(key).or_insert(0) += 1;
        }
    }
    let mut edges: Vec<TransitionEdge> = counts
        .into_iter()
        .map(|((a, b), weight)| TransitionEdge { a, b, weight })
        .collect();
    edges.sort_by(|l, r| r.weight.cmp(&l.weight).then((l.a, l.b).cmp(&(r.a, r.b))));
    edges
}

/// Fraction of trajectories visiting exactly `u` distinct buildings, for
/// `u` in `1..=n_buildings`. Index 0 holds `u = 1`.
pub fn unique_location_histogram<'a>(
    trajectories: impl IntoIterator<Item = &'a DayTrajectory>,
    n_buildings: usize,
) -> Vec<f64> {
    let mut bins = vec![0u64; n_buildings];
    let mut total = 0u64;
    for traj in trajectories {
        let uniques: HashSet<BuildingId> =
            traj.entries.iter().map(|e| e.node.building()).collect();
        if uniques.is_empty() {
            continue;
        }
        bins[uniques.len().min(n_buildings) - 1] += 1;
        total += 1;
    }
    if total == 0 {
        return vec![0.0; n_buildings];
    }
    bins.iter().map(|&c| c as f64 / total as f64).collect()
}

/// Local clock hour (0..24) of an instant inside a trajectory's day. The
/// window starts at 03:00 local, which pins the local clock without needing
/// the zone offset again.
pub fn clock_hour(t: i64, day_start: i64) -> usize {
    (((t - day_start + DAY_BOUNDARY_OFFSET).rem_euclid(DAY_SECONDS)) / 3600) as usize
}

/// Probability distributions of trajectory start and end clock hours: bin h
/// is the fraction of trajectories whose first entry starts (respectively
/// last entry ends) within clock hour h.
pub fn start_end_distributions<'a>(
    trajectories: impl IntoIterator<Item = &'a DayTrajectory>,
) -> ([f64; HOURS_PER_DAY], [f64; HOURS_PER_DAY]) {
    let mut starts = [0u64; HOURS_PER_DAY];
    let mut ends = [0u64; HOURS_PER_DAY];
    let mut total = 0u64;
    for traj in trajectories {
        let (Some(first), Some(last)) = (traj.entries.first(), traj.entries.last()) else {
            continue;
        };
        starts[clock_hour(first.start, traj.day.start)] += 1;
        ends[clock_hour(last.end, traj.day.start)] += 1;
        total += 1;
    }
    let mut start_probs = [0.0; HOURS_PER_DAY];
    let mut end_probs = [0.0; HOURS_PER_DAY];
    if total > 0 {
        for h in 0..HOURS_PER_DAY {
            start_probs[h] = starts[h] as f64 / total as f64;
            end_probs[h] = ends[h] as f64 / total as f64;
        }
    }
    (start_probs, end_probs)
}

/// Pointwise hourly presence statistics for one day-type group.
#[derive(Debug, Clone)]
pub struct GroupCurves {
    pub group: DayGroup,
    /// Number of days the statistics are taken over.
    pub days: usize,
    pub avg: [f64; HOURS_PER_DAY],
    pub min: [f64; HOURS_PER_DAY],
    pub max: [f64; HOURS_PER_DAY],
}

/// Hourly unique-device counts over the given trajectories (a cluster's
/// members), restricted to stays at `buildings`, aggregated per day-type
/// group as pointwise mean/min/max across that group's days. Returns the
/// curves plus the list of groups with no days in the span, which are
/// omitted.
pub fn daytype_count_curves<'a>(
    trajectories: impl IntoIterator<Item = &'a DayTrajectory>,
    buildings: &HashSet<BuildingId>,
    calendar: &Calendar,
    span: (i64, i64),
) -> Result<(Vec<GroupCurves>, Vec<DayGroup>)> {
    let (first_day, last_day) = span;
    let n_days = (last_day - first_day + 1).max(0) as usize;
    let mut present: Vec<Vec<HashSet<DeviceId>>> = (0..n_days)
        .map(|_| vec![HashSet::new(); HOURS_PER_DAY])
        .collect();
    for traj in trajectories {
        if traj.day.index < first_day || traj.day.index > last_day {
            continue;
        }
        let row = (traj.day.index - first_day) as usize;
        for entry in &traj.entries {
            if !buildings.contains(&entry.node.building()) {
                continue;
            }
            let (lo, hi) = hour_bucket_range(entry.start, entry.end, &traj.day);
            for bucket in lo..=hi {
                present[row][bucket].insert(traj.device.clone());
            }
        }
    }

    let mut days_of: HashMap<DayGroup, Vec<usize>> = HashMap::new();
    for day in first_day..=last_day {
        let label = calendar.label(day).ok_or_else(|| {
            Error::Calendar(format!("no day label for day index {day} in the calendar"))
        })?;
        days_of
            .entry(label.group())
            .or_default()
            .push((day - first_day) as usize);
    }

    let mut curves = Vec::new();
    let mut empty = Vec::new();
    for group in DAY_GROUPS {
        let Some(rows) = days_of.get(&group) else {
            empty.push(group);
            continue;
        };
        let mut avg = [0.0f64; HOURS_PER_DAY];
        let mut min = [f64::INFINITY; HOURS_PER_DAY];
        let mut max = [0.0f64; HOURS_PER_DAY];
        for &row in rows {
            for h in 0..HOURS_PER_DAY {
                let c = present[row][h].len() as f64;
                avg[h] += c;
                min[h] = min[h].min(c);
                max[h] = max[h].max(c);
            }
        }
        for h in 0..HOURS_PER_DAY {
            avg[h] /= rows.len() as f64;
        }
        curves.push(GroupCurves {
            group,
            days: rows.len(),
            avg,
            min,
            max,
        });
    }
    Ok((curves, empty))
}

// --- artifact writers ---

pub fn write_features(features: &[PersonFeature], path: &Path) -> Result<()> {
    let mut out = Vec::new();
    writeln!(out, "device,date,{}", FEATURE_NAMES.join(",")).unwrap();
    for f in features {
        let cells: Vec<String> = f.seconds.iter().map(|s| format!("{s:.0}")).collect();
        writeln!(
            out,
            "{},{},{}",
            f.device,
            date_of_day_index(f.day),
            cells.join(",")
        )
        .unwrap();
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_assignments(
    features: &[PersonFeature],
    clusters: &PersonClusters,
    path: &Path,
) -> Result<()> {
    let mut out = Vec::new();
    writeln!(out, "device,date,cluster").unwrap();
    for (f, &label) in features.iter().zip(&clusters.labels) {
        writeln!(out, "{},{},{}", f.device, date_of_day_index(f.day), label).unwrap();
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_edges(edges: &[TransitionEdge], path: &Path) -> Result<()> {
    let mut out = Vec::new();
    writeln!(out, "building_a,building_b,weight").unwrap();
    for e in edges {
        writeln!(out, "{},{},{}", e.a, e.b, e.weight).unwrap();
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_uniques(histogram: &[f64], path: &Path) -> Result<()> {
    let mut out = Vec::new();
    writeln!(out, "uniques,probability").unwrap();
    for (i, p) in histogram.iter().enumerate() {
        writeln!(out, "{},{p:.6}", i + 1).unwrap();
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_startend(
    start: &[f64; HOURS_PER_DAY],
    end: &[f64; HOURS_PER_DAY],
    path: &Path,
) -> Result<()> {
    let mut out = Vec::new();
    writeln!(out, "hour,start_probability,end_probability").unwrap();
    for h in 0..HOURS_PER_DAY {
        writeln!(out, "{h},{:.6},{:.6}", start[h], end[h]).unwrap();
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_group_curves(curves: &GroupCurves, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    writeln!(out, "hour,avg,min,max").unwrap();
    for h in 0..HOURS_PER_DAY {
        writeln!(
            out,
            "{h},{:.6},{:.0},{:.0}",
            curves.avg[h], curves.min[h], curves.max[h]
        )
        .unwrap();
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Area, DayLabel, DayWindow, NodeId, RegistryNode, TrajectoryEntry};

    const H: i64 = 3600;

    fn deployment() -> Deployment {
        let node = |c: char, category: Category| RegistryNode {
            building: BuildingId(c),
            category,
            area: if category == Category::Residential {
                Area::Residential
            } else {
                Area::Facility
            },
        };
        Deployment::new(vec![
            node('H', Category::Hospital),
            node('M', Category::Mall),
            node('I', Category::Institute),
            node('A', Category::Residential),
            node('B', Category::Residential),
        ])
        .unwrap()
    }

    /// Build a trajectory from (node, local clock start hour-seconds, end)
    /// offsets relative to the 03:00 window start.
    fn traj(device: &str, index: i64, stays: &[(&str, i64, i64)]) -> DayTrajectory {
        let w = DayWindow::from_index(index, 0);
        let entries = stays
            .iter()
            .map(|&(node, start, end)| TrajectoryEntry {
                node: NodeId::new(node),
                next: None,
                start: w.start + start,
                end: w.start + end,
                stay: end - start,
                take: 0,
            })
            .collect();
        DayTrajectory {
            device: DeviceId::new(device),
            day: w,
            entries,
        }
    }

    /// Offset into the day window of a local clock time.
    fn clock(h: i64, m: i64) -> i64 {
        (h * 3600 + m * 60 - DAY_BOUNDARY_OFFSET).rem_euclid(DAY_SECONDS)
    }

    #[test]
    fn stays_accrue_to_their_category() {
        let d = deployment();
        let t = traj("d1", 0, &[("H", clock(9, 0), clock(12, 0))]);
        let f = person_features(&t, &d).unwrap();
        assert_eq!(f.seconds, [10800.0, 0.0, 0.0, 0.0, 0.0]);

        let t = traj(
            "d1",
            0,
            &[("M", clock(10, 0), clock(11, 0)), ("H", clock(11, 30), clock(12, 0))],
        );
        let f = person_features(&t, &d).unwrap();
        assert_eq!(f.seconds, [1800.0, 3600.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn residential_stays_split_at_seven_and_nineteen() {
        let d = deployment();
        // 18:00-20:00 straddles the 19:00 boundary: one hour each side.
        let t = traj("d1", 0, &[("A", clock(18, 0), clock(20, 0))]);
        let f = person_features(&t, &d).unwrap();
        assert_eq!(f.seconds[3], 3600.0);
        assert_eq!(f.seconds[4], 3600.0);

        // 05:00-08:00 straddles 07:00: two night hours, one day hour.
        let t = traj("d1", 0, &[("A", clock(5, 0), clock(8, 0))]);
        let f = person_features(&t, &d).unwrap();
        assert_eq!(f.seconds[3], 3600.0);
        assert_eq!(f.seconds[4], 7200.0);

        // Late evening wrapping past midnight stays night time.
        let t = traj("d1", 0, &[("A", clock(19, 0), clock(2, 0))]);
        let f = person_features(&t, &d).unwrap();
        assert_eq!(f.seconds[3], 0.0);
        assert_eq!(f.seconds[4], 7.0 * H as f64);
    }

    #[test]
    fn residential_split_matches_a_per_second_scan() {
        let d = deployment();
        let w = DayWindow::from_index(3, 0);
        let cases = [
            (0i64, 86_400i64),
            (clock(6, 59), clock(7, 1)),
            (clock(18, 59), clock(19, 1)),
            (clock(7, 0), clock(19, 0)),
            (clock(23, 0), 86_400),
            (12_345, 67_890),
        ];
        for &(s, e) in &cases {
            let t = DayTrajectory {
                device: DeviceId::new("d"),
                day: w,
                entries: vec![TrajectoryEntry {
                    node: NodeId::new("A"),
                    next: None,
                    start: w.start + s,
                    end: w.start + e,
                    stay: e - s,
                    take: 0,
                }],
            };
            let f = person_features(&t, &d).unwrap();
            let mut day = 0.0;
            let mut night = 0.0;
            for sec in s..e {
                let local = (sec + DAY_BOUNDARY_OFFSET).rem_euclid(DAY_SECONDS);
                if (RESIDENTIAL_DAY_FROM..RESIDENTIAL_DAY_TO).contains(&local) {
                    day += 1.0;
                } else {
                    night += 1.0;
                }
            }
            assert_eq!(f.seconds[3], day, "day seconds for [{s}, {e})");
            assert_eq!(f.seconds[4], night, "night seconds for [{s}, {e})");
        }
    }

    #[test]
    fn feature_sum_conserves_total_stay_time() {
        let d = deployment();
        let t = traj(
            "d1",
            0,
            &[
                ("A", clock(4, 0), clock(8, 0)),
                ("M", clock(9, 0), clock(10, 30)),
                ("H", clock(11, 0), clock(16, 0)),
                ("B", clock(17, 0), clock(23, 30)),
            ],
        );
        let f = person_features(&t, &d).unwrap();
        let total: f64 = f.seconds.iter().sum();
        let stays: i64 = t.entries.iter().map(|e| e.stay).sum();
        assert_eq!(total, stays as f64);
    }

    #[test]
    fn unknown_building_is_a_registry_error() {
        let d = deployment();
        let t = traj("d1", 0, &[("Z", clock(9, 0), clock(10, 0))]);
        assert!(matches!(person_features(&t, &d), Err(Error::Registry(_))));
    }

    #[test]
    fn planted_point_masses_are_recovered_and_ordered() {
        let d = deployment();
        // Three archetypes: mall-heavy, hospital-heavy, residential-night.
        let mut trajs = Vec::new();
        for i in 0..10 {
            trajs.push(traj(&format!("m{i}"), 0, &[("M", clock(10, 0), clock(20, 0))]));
            trajs.push(traj(&format!("h{i}"), 0, &[("H", clock(9, 0), clock(17, 0))]));
            trajs.push(traj(&format!("r{i}"), 0, &[("A", clock(20, 0), clock(26, 0))]));
        }
        let features = extract_features(&trajs, &d).unwrap();
        let clusters = cluster_persons(&features, 3, 11, 8, 1000).unwrap();
        assert_eq!(clusters.sizes, vec![10, 10, 10]);
        // CP1 is the mall archetype, CP2 hospital, CP3 residential night.
        assert!(clusters.centroids[0][1] > 0.0);
        assert!(clusters.centroids[1][0] > 0.0);
        assert!(clusters.centroids[2][4] > 0.0);
        for (i, t) in trajs.iter().enumerate() {
            let expect = match t.device.as_str().chars().next().unwrap() {
                'm' => 1,
                'h' => 2,
                _ => 3,
            };
            assert_eq!(clusters.labels[i], expect, "trajectory {i}");
        }
        // Point-mass clusters give a near-perfect silhouette.
        assert!(clusters.silhouette > 0.99);
        assert_eq!(clusters.silhouette_points, 30);
    }

    #[test]
    fn silhouette_subsample_is_capped_and_deterministic() {
        let d = deployment();
        let mut trajs = Vec::new();
        for i in 0..60 {
            let (node, s, e) = if i % 2 == 0 {
                ("M", clock(10, 0), clock(20, 0))
            } else {
                ("H", clock(9, 0), clock(17, 0))
            };
            trajs.push(traj(&format!("d{i}"), 0, &[(node, s, e)]));
        }
        let features = extract_features(&trajs, &d).unwrap();
        let a = cluster_persons(&features, 2, 5, 4, 20).unwrap();
        let b = cluster_persons(&features, 2, 5, 4, 20).unwrap();
        assert_eq!(a.silhouette_points, 20);
        assert_eq!(a.silhouette, b.silhouette);
        assert!(a.silhouette > 0.9);
    }

    #[test]
    fn transition_edges_sum_both_directions() {
        let trajs = vec![
            traj(
                "d1",
                0,
                &[
                    ("A", clock(4, 0), clock(7, 0)),
                    ("M", clock(8, 0), clock(12, 0)),
                    ("A", clock(13, 0), clock(20, 0)),
                ],
            ),
            traj("d2", 0, &[("A", clock(4, 0), clock(7, 0)), ("H", clock(8, 0), clock(12, 0))]),
            traj("d3", 0, &[("M", clock(9, 0), clock(10, 0))]),
        ];
        let edges = cluster_transition_graph(&trajs);
        assert_eq!(
            edges,
            vec![
                TransitionEdge { a: BuildingId('A'), b: BuildingId('M'), weight: 2 },
                TransitionEdge { a: BuildingId('A'), b: BuildingId('H'), weight: 1 },
            ]
        );
        // Order of trajectories does not matter.
        let mut rev = trajs.clone();
        rev.reverse();
        assert_eq!(cluster_transition_graph(&rev), edges);
    }

    #[test]
    fn unique_histogram_counts_distinct_buildings() {
        let trajs = vec![
            traj("d1", 0, &[("A", 3600, 7200)]),
            traj("d2", 0, &[("A", 3600, 7200)]),
            // A -> B -> A visits two distinct buildings.
            traj("d3", 0, &[("A", 0, 3600), ("B", 7200, 10800), ("A", 14400, 18000)]),
            traj("d4", 0, &[("A", 0, 3600), ("B", 7200, 10800), ("M", 14400, 18000)]),
        ];
        let hist = unique_location_histogram(&trajs, 5);
        assert_eq!(hist, vec![0.5, 0.25, 0.25, 0.0, 0.0]);
        let sum: f64 = hist.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn start_end_bins_use_local_clock_hours() {
        let trajs = vec![
            traj("d1", 0, &[("M", clock(8, 15), clock(17, 5))]),
            traj("d2", 0, &[("M", clock(8, 59), clock(17, 59))]),
            // Ends at 01:30, past local midnight.
            traj("d3", 0, &[("M", clock(8, 0), clock(12, 0)), ("A", clock(20, 0), clock(1, 30))]),
        ];
        let (start, end) = start_end_distributions(&trajs);
        assert_eq!(start[8], 1.0);
        assert!((end[17] - 2.0 / 3.0).abs() < 1e-9);
        assert!((end[1] - 1.0 / 3.0).abs() < 1e-9);
        assert!((start.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!((end.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn daytype_curves_bound_the_average_and_flag_empty_groups() {
        let mut calendar = Calendar::default();
        calendar.set(0, DayLabel::MonThu);
        calendar.set(1, DayLabel::MonThu);
        calendar.set(2, DayLabel::Sat);
        let trajs = vec![
            traj("d1", 0, &[("M", clock(9, 0), clock(11, 0))]),
            traj("d2", 0, &[("M", clock(9, 0), clock(10, 0))]),
            traj("d1", 1, &[("M", clock(9, 0), clock(10, 0))]),
            // Residential stay is outside the building set.
            traj("d1", 2, &[("A", clock(9, 0), clock(10, 0))]),
        ];
        let buildings: HashSet<BuildingId> = [BuildingId('M')].into();
        let (curves, empty) =
            daytype_count_curves(&trajs, &buildings, &calendar, (0, 2)).unwrap();
        assert_eq!(empty, vec![DayGroup::FriPhEve, DayGroup::SunPh]);
        assert_eq!(curves.len(), 2);
        let monthu = &curves[0];
        assert_eq!(monthu.group, DayGroup::MonThu);
        assert_eq!(monthu.days, 2);
        // Hour bucket 6 is clock hour 09:00. Day 0 has 2 devices, day 1 has 1.
        assert_eq!(monthu.min[6], 1.0);
        assert_eq!(monthu.max[6], 2.0);
        assert_eq!(monthu.avg[6], 1.5);
        for h in 0..HOURS_PER_DAY {
            assert!(monthu.min[h] <= monthu.avg[h] && monthu.avg[h] <= monthu.max[h]);
        }
        // The Sat group's curve is all zero: its only stay is filtered out.
        assert_eq!(curves[1].group, DayGroup::Sat);
        assert_eq!(curves[1].max, [0.0; HOURS_PER_DAY]);
    }

    #[test]
    fn curves_for_one_day_groups_collapse_to_that_day() {
        let mut calendar = Calendar::default();
        calendar.set(0, DayLabel::Sun);
        let trajs = vec![traj("d1", 0, &[("M", clock(9, 0), clock(11, 0))])];
        let buildings: HashSet<BuildingId> = [BuildingId('M')].into();
        let (curves, _) = daytype_count_curves(&trajs, &buildings, &calendar, (0, 0)).unwrap();
        let sun = &curves[0];
        assert_eq!(sun.days, 1);
        assert_eq!(sun.min, sun.max);
        assert_eq!(sun.min, sun.avg);
    }
}
