//! Time perspective: for each building, count how many distinct devices are
//! present in each of the 24 hourly buckets of a day (days start at 03:00
//! local), cluster the resulting per-day curves, and cross-tabulate the
//! clusters against calendar day types.

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use crate::cluster::{kmeans, minmax_normalize, FeatureVector, KMeansResult};
use crate::error::{Error, Result};
use crate::model::{
    date_of_day_index, BuildingId, Calendar, DayLabel, DayTrajectory, DayWindow, Deployment,
    DeviceId, DAY_LABELS,
};
use crate::perspective::relabel_by_size;
use crate::seeds;

pub const HOURS_PER_DAY: usize = 24;

/// Hourly presence curves for one building, one row per day in the span.
/// Days with no visits keep an all-zero row so every building is described
/// over the same day axis.
#[derive(Debug, Clone)]
pub struct TimeFeatures {
    pub building: BuildingId,
    pub days: Vec<i64>,
    /// Raw distinct-device counts, one `[u32; 24]` row per day.
    pub counts: Vec<[u32; HOURS_PER_DAY]>,
    /// Per-day min-max normalized curves, the clustering input.
    pub normalized: Vec<FeatureVector>,
}

/// Inclusive range of hourly buckets a stay `[start, end]` touches within
/// its day window. Bucket `i` covers `[day.start + 3600 i, day.start +
/// 3600 (i + 1))`; a stay counts toward every bucket whose window it
/// intersects, including a bucket it only touches at a single instant.
pub fn hour_bucket_range(start: i64, end: i64, day: &DayWindow) -> (usize, usize) {
    debug_assert!(start >= day.start && end <= day.end() && start <= end);
    let first = ((start - day.start) / 3600) as usize;
    let last = (((end - day.start) / 3600) as usize).min(HOURS_PER_DAY - 1);
    (first, last)
}

/// Smallest and largest day index seen across a trajectory set.
pub fn day_span(trajectories: &[DayTrajectory]) -> Option<(i64, i64)> {
    let min = trajectories.iter().map(|t| t.day.index).min()?;
    let max = trajectories.iter().map(|t| t.day.index).max()?;
    Some((min, max))
}

/// Build the per-day hourly presence curves for one building over the given
/// day range (inclusive). A device is present in a bucket if any of its
/// stays at the building overlaps that bucket; each device counts once per
/// bucket no matter how many stays fall in it.
pub fn hourly_count_features(
    trajectories: &[DayTrajectory],
    building: BuildingId,
    day_range: (i64, i64),
) -> TimeFeatures {
    let (first_day, last_day) = day_range;
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
            if entry.node.building() != building {
                continue;
            }
            let (lo, hi) = hour_bucket_range(entry.start, entry.end, &traj.day);
            for bucket in lo..=hi {
                present[row][bucket].insert(traj.device.clone());
            }
        }
    }

    let days: Vec<i64> = (first_day..=last_day).collect();
    let counts: Vec<[u32; HOURS_PER_DAY]> = present
        .iter()
        .map(|buckets| {
            let mut row = [0u32; HOURS_PER_DAY];
            for (h, set) in buckets.iter().enumerate() {
                row[h] = set.len() as u32;
            }
            row
        })
        .collect();
    let normalized = counts
        .iter()
        .map(|row| {
            let raw: Vec<f64> = row.iter().map(|&c| c as f64).collect();
            FeatureVector::new(minmax_normalize(&raw)).expect("normalized curve is finite")
        })
        .collect();

    TimeFeatures {
        building,
        days,
        counts,
        normalized,
    }
}

/// Day clusters for one building. Labels are 1-based and canonical: label 1
/// is the largest cluster, so repeated runs over the same data name the
/// clusters identically.
#[derive(Debug, Clone)]
pub struct DayClusters {
    pub building: BuildingId,
    pub days: Vec<i64>,
    pub k: usize,
    /// Canonical 1-based label per day, aligned with `days`.
    pub labels: Vec<usize>,
    /// Cluster sizes in label order (descending).
    pub sizes: Vec<usize>,
    pub sse: f64,
}

pub fn cluster_days(
    features: &TimeFeatures,
    k: usize,
    seed: u64,
    restarts: usize,
) -> Result<DayClusters> {
    let result: KMeansResult = kmeans(&features.normalized, k, seed, restarts)?;
    let (labels, sizes) = relabel_by_size(&result.assignments, k);
    Ok(DayClusters {
        building: features.building,
        days: features.days.clone(),
        k,
        labels,
        sizes,
        sse: result.sse,
    })
}

/// Day-type composition of the clusters: one row per day type, one column
/// per cluster label, each cell the percentage of that type's days assigned
/// to that cluster. Rows of a type with zero days in the span are all zero
/// and the type is listed in `empty_types`.
#[derive(Debug, Clone)]
pub struct Confusion {
    pub k: usize,
    /// `(day type, row of k percentages)` in fixed day-type order.
    pub rows: Vec<(DayLabel, Vec<f64>)>,
    pub empty_types: Vec<DayLabel>,
}

pub fn day_type_confusion(clusters: &DayClusters, calendar: &Calendar) -> Result<Confusion> {
    let k = clusters.k;
    let mut counts: Vec<Vec<u64>> = vec![vec![0; k]; DAY_LABELS.len()];
    for (&day, &label) in clusters.days.iter().zip(&clusters.labels) {
        let day_type = calendar.label(day).ok_or_else(|| {
            Error::Calendar(format!("no day label for day index {day} in the calendar"))
        })?;
        let row = DAY_LABELS
            .iter()
            .position(|&l| l == day_type)
            .expect("calendar labels are drawn from the fixed set");
        counts[row][label - 1] += 1;
    }

    let mut rows = Vec::with_capacity(DAY_LABELS.len());
    let mut empty_types = Vec::new();
    for (row, &day_type) in DAY_LABELS.iter().enumerate() {
        let total: u64 = counts[row].iter().sum();
        if total == 0 {
            empty_types.push(day_type);
            rows.push((day_type, vec![0.0; k]));
        } else {
            let pct = counts[row]
                .iter()
                .map(|&c| c as f64 / total as f64 * 100.0)
                .collect();
            rows.push((day_type, pct));
        }
    }
    Ok(Confusion {
        k,
        rows,
        empty_types,
    })
}

/// Full time-perspective result for one building.
#[derive(Debug, Clone)]
pub struct BuildingTimeResult {
    pub features: TimeFeatures,
    pub clusters: DayClusters,
    pub confusion: Confusion,
}

/// Run the time perspective for every requested building over the shared
/// day span of the trajectory set. Each building's k-means run draws its
/// seed from the master seed and the building id, so adding a building does
/// not disturb the others.
pub fn analyze_buildings(
    trajectories: &[DayTrajectory],
    buildings: &[BuildingId],
    deployment: &Deployment,
    calendar: &Calendar,
    k: usize,
    seed: u64,
    restarts: usize,
) -> Result<Vec<BuildingTimeResult>> {
    let span = day_span(trajectories)
        .ok_or_else(|| Error::InvalidInput("no trajectories to analyze".into()))?;
    let mut results = Vec::with_capacity(buildings.len());
    for &building in buildings {
        if deployment.index_of(building).is_none() {
            return Err(Error::Registry(format!(
                "building `{building}` is not in the registry"
            )));
        }
        let features = hourly_count_features(trajectories, building, span);
        let building_seed = seeds::mix(&[seed, building.0 as u64]);
        let clusters = cluster_days(&features, k, building_seed, restarts)?;
        let confusion = day_type_confusion(&clusters, calendar)?;
        results.push(BuildingTimeResult {
            features,
            clusters,
            confusion,
        });
    }
    Ok(results)
}

/// Write `calendar_assignments.csv`: one row per (building, day) with the
/// day's date, calendar type, and canonical cluster label.
pub fn write_assignments(
    results: &[BuildingTimeResult],
    calendar: &Calendar,
    path: &Path,
) -> Result<()> {
    let mut out = Vec::new();
    writeln!(out, "building,date,day_label,cluster").unwrap();
    for result in results {
        let clusters = &result.clusters;
        for (&day, &label) in clusters.days.iter().zip(&clusters.labels) {
            let date = date_of_day_index(day);
            let day_type = calendar
                .label(day)
                .expect("confusion building already checked the calendar");
            writeln!(
                out,
                "{},{},{},{}",
                clusters.building.0,
                date,
                day_type.as_str(),
                label
            )
            .unwrap();
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Write one confusion table as CSV with `%.1f` percentage cells.
pub fn write_confusion(confusion: &Confusion, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    let header: Vec<String> = (1..=confusion.k).map(|c| format!("c{c}")).collect();
    writeln!(out, "day_label,{}", header.join(",")).unwrap();
    for (day_type, row) in &confusion.rows {
        let cells: Vec<String> = row.iter().map(|p| format!("{p:.1}")).collect();
        writeln!(out, "{},{}", day_type.as_str(), cells.join(",")).unwrap();
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Write the normalized per-day curves with their cluster labels.
pub fn write_curves(result: &BuildingTimeResult, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    let hours: Vec<String> = (0..HOURS_PER_DAY).map(|h| format!("h{h}")).collect();
    writeln!(out, "date,cluster,{}", hours.join(",")).unwrap();
    for (i, &day) in result.features.days.iter().enumerate() {
        let cells: Vec<String> = result.features.normalized[i]
            .as_slice()
            .iter()
            .map(|v| format!("{v:.6}"))
            .collect();
        writeln!(
            out,
            "{},{},{}",
            date_of_day_index(day),
            result.clusters.labels[i],
            cells.join(",")
        )
        .unwrap();
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Area, Category, DayTrajectory, NodeId, RegistryNode, TrajectoryEntry};

    fn day(index: i64) -> DayWindow {
        DayWindow::from_index(index, 0)
    }

    fn traj(device: &str, index: i64, stays: &[(&str, i64, i64)]) -> DayTrajectory {
        let w = day(index);
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

    const H: i64 = 3600;

    #[test]
    fn stay_touches_every_bucket_it_overlaps() {
        // Day starts 03:00, so local 10:15 is 7.25 h into the window and
        // local 12:30 is 9.5 h in: buckets 7, 8, 9 (clock hours 10, 11, 12).
        let w = day(0);
        let (lo, hi) = hour_bucket_range(w.start + 7 * H + 900, w.start + 9 * H + 1800, &w);
        assert_eq!((lo, hi), (7, 9));

        // Touching a bucket boundary at a single instant still counts.
        let (lo, hi) = hour_bucket_range(w.start + 2 * H, w.start + 3 * H, &w);
        assert_eq!((lo, hi), (2, 3));

        // A stay running to the end of the day stops at the last bucket.
        let (lo, hi) = hour_bucket_range(w.start + 23 * H + 10, w.start + 24 * H, &w);
        assert_eq!((lo, hi), (23, 23));
    }

    #[test]
    fn bucket_range_matches_a_per_second_scan() {
        let w = day(5);
        let cases = [
            (0, 0),
            (0, 1),
            (59, 3_600),
            (3_600, 3_600),
            (10_000, 50_000),
            (86_399, 86_400),
            (43_200, 86_400),
        ];
        for &(s, e) in &cases {
            let (lo, hi) = hour_bucket_range(w.start + s, w.start + e, &w);
            let mut expected = vec![false; HOURS_PER_DAY];
            for t in s..=e {
                let bucket = ((t / 3600) as usize).min(HOURS_PER_DAY - 1);
                expected[bucket] = true;
            }
            for (bucket, &hit) in expected.iter().enumerate() {
                assert_eq!(
                    hit,
                    bucket >= lo && bucket <= hi,
                    "stay [{s}, {e}] bucket {bucket}"
                );
            }
        }
    }

    #[test]
    fn devices_count_once_per_bucket_and_quiet_days_are_zero() {
        let b = BuildingId('A');
        let trajs = vec![
            // Two stays by the same device in the same hour: one count.
            traj("d1", 0, &[("A", 7 * H, 7 * H + 600), ("A", 7 * H + 1200, 7 * H + 1800)]),
            traj("d2", 0, &[("A", 7 * H, 9 * H)]),
            // Other building, ignored.
            traj("d3", 0, &[("B", 7 * H, 8 * H)]),
            // Day 2 has traffic elsewhere only, so day 1 and 2 rows for A
            // stay all zero.
            traj("d1", 2, &[("B", 7 * H, 8 * H)]),
        ];
        let features = hourly_count_features(&trajs, b, (0, 2));
        assert_eq!(features.days, vec![0, 1, 2]);
        assert_eq!(features.counts[0][7], 2);
        assert_eq!(features.counts[0][8], 1); // d2 only, plus d2's end instant at 9h
        assert_eq!(features.counts[0][9], 1); // closed end touches bucket 9
        assert_eq!(features.counts[1], [0; HOURS_PER_DAY]);
        assert_eq!(features.counts[2], [0; HOURS_PER_DAY]);
        // All-zero rows normalize to all zeros rather than NaN.
        assert!(features.normalized[1].as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn confusion_rows_sum_to_one_hundred_and_empty_types_are_flagged() {
        let mut calendar = Calendar::default();
        // Days 0..6: three monthu, two fri, one sat, one sun.
        for (i, label) in [
            DayLabel::MonThu,
            DayLabel::MonThu,
            DayLabel::MonThu,
            DayLabel::Fri,
            DayLabel::Fri,
            DayLabel::Sat,
            DayLabel::Sun,
        ]
        .iter()
        .enumerate()
        {
            calendar.set(i as i64, *label);
        }
        let clusters = DayClusters {
            building: BuildingId('A'),
            days: (0..7).collect(),
            k: 2,
            labels: vec![1, 1, 2, 1, 2, 2, 2],
            sizes: vec![3, 4],
            sse: 0.0,
        };
        let confusion = day_type_confusion(&clusters, &calendar).unwrap();
        for (day_type, row) in &confusion.rows {
            let sum: f64 = row.iter().sum();
            if confusion.empty_types.contains(day_type) {
                assert_eq!(sum, 0.0);
            } else {
                assert!((sum - 100.0).abs() < 1e-9, "{day_type:?} sums to {sum}");
            }
        }
        assert_eq!(
            confusion.empty_types,
            vec![DayLabel::PhEve, DayLabel::Ph],
            "types absent from the span are flagged"
        );
        // monthu: 2 of 3 in cluster 1.
        let monthu = &confusion.rows[0].1;
        assert!((monthu[0] - 200.0 / 3.0).abs() < 1e-9);
        // Missing calendar entry is a hard error.
        let mut bare = Calendar::default();
        bare.set(0, DayLabel::MonThu);
        assert!(day_type_confusion(&clusters, &bare).is_err());
    }

    #[test]
    fn analysis_recovers_planted_day_shapes() {
        // Plant two day shapes for building A over 12 days: "morning" days
        // with crowd in buckets 4..6 and "evening" days in buckets 14..16.
        let mut trajs = Vec::new();
        let mut calendar = Calendar::default();
        for d in 0..12i64 {
            calendar.set(d, if d % 2 == 0 { DayLabel::MonThu } else { DayLabel::Sat });
            let (lo, n) = if d % 2 == 0 { (4 * H, 5) } else { (14 * H, 5) };
            for i in 0..n {
                trajs.push(traj(&format!("d{d}_{i}"), d, &[("A", lo, lo + 2 * H)]));
            }
        }
        let deployment = Deployment::new(vec![RegistryNode {
            building: BuildingId('A'),
            category: Category::Mall,
            area: Area::Facility,
        }])
        .unwrap();
        let results =
            analyze_buildings(&trajs, &[BuildingId('A')], &deployment, &calendar, 2, 7, 8)
                .unwrap();
        // Asking for a building outside the registry is a hard error.
        assert!(analyze_buildings(
            &trajs,
            &[BuildingId('Z')],
            &deployment,
            &calendar,
            2,
            7,
            8
        )
        .is_err());
        let clusters = &results[0].clusters;
        // Even and odd days must land in different clusters, consistently.
        let even = clusters.labels[0];
        let odd = clusters.labels[1];
        assert_ne!(even, odd);
        for (i, &label) in clusters.labels.iter().enumerate() {
            assert_eq!(label, if i % 2 == 0 { even } else { odd });
        }
        // With a clean split the confusion rows are pure.
        let confusion = &results[0].confusion;
        let monthu = &confusion.rows[0].1;
        assert_eq!(monthu[even - 1], 100.0);
        let sat = &confusion.rows[3].1;
        assert_eq!(sat[odd - 1], 100.0);
    }
}
