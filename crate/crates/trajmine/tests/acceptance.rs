//! Acceptance suite: one test per release criterion, each printing a single
//! `criterion N (...): PASS/FAIL` line before asserting. Oracle-style
//! criteria check the optimized code against independent naive references;
//! recovery criteria replay the synthetic scenarios and score the planted
//! structure; the heavier criteria drive the compiled binary end to end.

mod common;

use std::collections::HashMap;
use std::fs;
use std::fs::File;
use std::path::Path;
use std::process::{Command, Stdio};
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::{Duration, Instant};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

use trajmine::cluster::{hac_ward, kmeans, FeatureVector};
use trajmine::config::PipelineConfig;
use trajmine::ingest::{build_sensor_trajectories, for_each_probe, Coalescer};
use trajmine::model::{
    day_index_of_date, BuildingId, Calendar, DayGroup, DayLabel, DayTrajectory, DayWindow,
    Deployment, DeviceId, NodeId, TrajectoryEntry,
};
use trajmine::perspective::location::{
    dominant_directions, transition_counts, transition_probability, DominantEdge,
};
use trajmine::perspective::person::{clock_hour, cluster_persons, extract_features};
use trajmine::perspective::time::analyze_buildings;
use trajmine::preprocess::{keep_trajectory, merge_to_building_level, FilterReport};
use trajmine::synth::{default_scenario, flow_scenario, generate};

/// Serializes the tests that replay full pipeline runs so their wall-clock
/// budgets are not distorted by each other.
static GATE: Mutex<()> = Mutex::new(());

fn gate() -> MutexGuard<'static, ()> {
    GATE.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

fn scratch(prefix: &str) -> TempDir {
    tempfile::Builder::new()
        .prefix(prefix)
        .tempdir_in(env!("CARGO_TARGET_TMPDIR"))
        .expect("create scratch directory")
}

fn report(n: usize, name: &str, pass: bool, detail: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    println!("criterion {n} ({name}): {status} [{detail}]");
}

// ---------------------------------------------------------------------------
// Shared planted-scenario fixture for criteria 4, 5 and 6.

const FIXTURE_SEED: u64 = 20240115;

struct Fixture {
    _dir: TempDir,
    deployment: Deployment,
    calendar: Calendar,
    trajectories: Vec<DayTrajectory>,
    /// `(device, day index) -> archetype name` for active device-days.
    truth: HashMap<(String, i64), String>,
    archetype_names: Vec<String>,
    build_seconds: f64,
}

fn fixture() -> &'static Fixture {
    static FIXTURE: OnceLock<Fixture> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let started = Instant::now();
        let dir = scratch("acceptance-fixture");
        let mut scenario = default_scenario();
        scenario.n_devices = 5000;
        scenario.n_days = 28;
        let outcome = generate(&scenario, FIXTURE_SEED, dir.path()).expect("generate fixture");
        let deployment = Deployment::load(&outcome.registry_path).expect("load registry");
        let calendar = Calendar::load(&outcome.calendar_path).expect("load calendar");
        let trajectories = ingest_and_preprocess(&outcome.probes_path);
        let truth = load_truth(&outcome.ground_truth_path);
        let archetype_names = scenario.archetypes.iter().map(|a| a.name.clone()).collect();
        Fixture {
            _dir: dir,
            deployment,
            calendar,
            trajectories,
            truth,
            archetype_names,
            build_seconds: started.elapsed().as_secs_f64(),
        }
    })
}

/// Raw probe log to filtered building-level trajectories, with the default
/// pipeline parameters.
fn ingest_and_preprocess(probes: &Path) -> Vec<DayTrajectory> {
    let defaults = PipelineConfig::default();
    let mut coalescer = Coalescer::new();
    for_each_probe(probes, None, |e| coalescer.push(e)).expect("parse probe log");
    let intervals = coalescer.finish(defaults.coalesce_gap);
    let sensor_level = build_sensor_trajectories(&intervals, defaults.tz_offset);
    let mut filter = FilterReport::default();
    sensor_level
        .iter()
        .map(|t| merge_to_building_level(t, defaults.merge_threshold))
        .filter(|t| keep_trajectory(t, defaults.min_span, defaults.max_stay, &mut filter))
        .collect()
}

fn load_truth(path: &Path) -> HashMap<(String, i64), String> {
    let text = fs::read_to_string(path).expect("read ground truth");
    let mut map = HashMap::new();
    for line in text.lines().skip(1) {
        let mut parts = line.splitn(3, ',');
        let device = parts.next().expect("device column").to_string();
        let date: chrono::NaiveDate = parts
            .next()
            .expect("date column")
            .parse()
            .expect("ISO date");
        let archetype = parts.next().expect("archetype column").to_string();
        map.insert((device, day_index_of_date(date)), archetype);
    }
    map
}

fn group_index(label: DayLabel) -> usize {
    match label.group() {
        DayGroup::MonThu => 0,
        DayGroup::FriPhEve => 1,
        DayGroup::Sat => 2,
        DayGroup::SunPh => 3,
    }
}

// ---------------------------------------------------------------------------
// Criterion 1: building-level merging matches a fixed-point oracle.

fn random_sensor_trajectory(rng: &mut ChaCha8Rng, case: usize) -> DayTrajectory {
    let day = DayWindow::from_index(0, 0);
    let buildings = ['A', 'B', 'H', 'M'];
    let target_len = rng.gen_range(1..=12);
    let mut spans: Vec<(NodeId, i64, i64)> = Vec::new();
    let mut t = day.start + rng.gen_range(0..1800);
    for _ in 0..target_len {
        let stay = if rng.gen_range(0..5) == 0 { 0 } else { rng.gen_range(1..6000) };
        let end = t + stay;
        if end > day.end() {
            break;
        }
        let building = buildings[rng.gen_range(0..buildings.len())];
        let sensor = NodeId::new(format!("{building}{}", rng.gen_range(1..=3)));
        spans.push((sensor, t, end));
        // Gaps hug the merge threshold from both sides so the boundary is
        // exercised, with plenty of clearly-mergeable and clearly-separate
        // cases mixed in.
        let gap = match rng.gen_range(0..6) {
            0 => 21_600,
            1 => 21_599,
            2 => 21_601,
            3 => rng.gen_range(1..21_600),
            4 => rng.gen_range(21_601..30_000),
            _ => rng.gen_range(0..400),
        };
        t = end + gap;
        if t >= day.end() {
            break;
        }
    }
    if spans.is_empty() {
        spans.push((NodeId::new("A1"), day.start, day.start + 60));
    }
    let entries = spans
        .iter()
        .enumerate()
        .map(|(i, (node, start, end))| TrajectoryEntry {
            node: node.clone(),
            next: spans.get(i + 1).map(|(n, _, _)| n.clone()),
            start: *start,
            end: *end,
            stay: end - start,
            take: spans.get(i + 1).map_or(0, |(_, s, _)| s - end),
        })
        .collect();
    DayTrajectory {
        device: DeviceId::new(format!("dev{case:04}")),
        day,
        entries,
    }
}

/// Flatten a trajectory into comparable tuples.
fn describe(t: &DayTrajectory) -> Vec<(String, Option<String>, i64, i64, i64, i64)> {
    t.entries
        .iter()
        .map(|e| {
            (
                e.node.as_str().to_string(),
                e.next.as_ref().map(|n| n.as_str().to_string()),
                e.start,
                e.end,
                e.stay,
                e.take,
            )
        })
        .collect()
}

#[test]
fn criterion_1_building_merge_matches_fixed_point_oracle() {
    let started = Instant::now();
    let threshold = PipelineConfig::default().merge_threshold;
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut problems = Vec::new();
    let cases = 1000;
    for case in 0..cases {
        let traj = random_sensor_trajectory(&mut rng, case);
        let merged = merge_to_building_level(&traj, threshold);
        let oracle = common::naive_building_merge(&traj, threshold);
        if describe(&merged) != describe(&oracle) {
            problems.push(format!(
                "case {case}: merged {:?} but the oracle says {:?} (input {:?})",
                describe(&merged),
                describe(&oracle),
                describe(&traj)
            ));
            continue;
        }
        let again = merge_to_building_level(&merged, threshold);
        if describe(&again) != describe(&merged) {
            problems.push(format!("case {case}: merging is not idempotent"));
        }
        if merged.span() != traj.span()
            || merged.entries.first().map(|e| e.start) != traj.entries.first().map(|e| e.start)
            || merged.entries.last().map(|e| e.end) != traj.entries.last().map(|e| e.end)
        {
            problems.push(format!("case {case}: merging changed the covered span"));
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    if elapsed >= 5.0 {
        problems.push(format!("oracle comparison took {elapsed:.2}s, budget is 5s"));
    }
    report(
        1,
        "building merge oracle",
        problems.is_empty(),
        &format!("{cases} random trajectories agree, idempotent, span kept, {elapsed:.2}s"),
    );
    assert!(problems.is_empty(), "{}", problems.join("\n"));
}

// ---------------------------------------------------------------------------
// Criterion 2: k-means behaves.

fn plant_centers(rng: &mut ChaCha8Rng, k: usize, d: usize, min_sep: f64) -> Vec<Vec<f64>> {
    let side = 20.0 * min_sep;
    'resample: loop {
        let centers: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..d).map(|_| rng.gen_range(0.0..side)).collect())
            .collect();
        for i in 0..k {
            for j in (i + 1)..k {
                let dist: f64 = centers[i]
                    .iter()
                    .zip(&centers[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                if dist < min_sep {
                    continue 'resample;
                }
            }
        }
        return centers;
    }
}

#[test]
fn criterion_2_kmeans_monotone_recovering_and_exact() {
    let mut problems = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(202);

    // (a) SSE never increases across update cycles.
    for case in 0..100 {
        let n = rng.gen_range(2..=200);
        let d = rng.gen_range(1..=24);
        let k = rng.gen_range(1..=n.min(6));
        let points: Vec<FeatureVector> = (0..n)
            .map(|_| {
                FeatureVector::new((0..d).map(|_| rng.gen_range(-10.0..10.0)).collect()).unwrap()
            })
            .collect();
        let result = kmeans(&points, k, rng.gen(), 1).expect("kmeans on random instance");
        for w in result.sse_history.windows(2) {
            if w[1] > w[0] + 1e-9 * w[0].max(1.0) {
                problems.push(format!("case {case}: SSE rose from {} to {}", w[0], w[1]));
            }
        }
    }

    // (b) Well-separated planted clusters are recovered exactly. Points are
    // uniform within +-1 of their center per axis, so the within-cluster
    // spread is at most sqrt(d), and centers at least 8 sqrt(d) apart keep
    // the clusters more than 4 spreads from each other.
    let mut recovered = 0;
    for _ in 0..100 {
        let k = rng.gen_range(2..=6);
        let d = rng.gen_range(2..=24);
        let min_sep = 8.0 * (d as f64).sqrt();
        let centers = plant_centers(&mut rng, k, d, min_sep);
        let n = rng.gen_range(k * 3..=200);
        let mut points = Vec::with_capacity(n);
        let mut planted = Vec::with_capacity(n);
        for i in 0..n {
            let c = i % k;
            let point: Vec<f64> =
                centers[c].iter().map(|&x| x + rng.gen_range(-1.0..=1.0)).collect();
            points.push(FeatureVector::new(point).unwrap());
            planted.push(c);
        }
        let result = kmeans(&points, k, rng.gen(), 20).expect("kmeans on planted instance");
        if common::same_partition(&result.assignments, &planted) {
            recovered += 1;
        }
    }
    if recovered < 95 {
        problems.push(format!("only {recovered}/100 planted partitions recovered exactly"));
    }

    // (c) The textbook 1-D instance has a known optimum.
    let line: Vec<FeatureVector> = [0.0, 1.0, 10.0, 11.0]
        .iter()
        .map(|&v| FeatureVector::new(vec![v]).unwrap())
        .collect();
    let exact = kmeans(&line, 2, 7, 20).expect("kmeans on 1-D instance");
    if exact.sse != 1.0 {
        problems.push(format!("1-D {{0,1,10,11}} instance gave SSE {} instead of 1", exact.sse));
    }

    report(
        2,
        "k-means correctness",
        problems.is_empty(),
        &format!(
            "SSE monotone on 100 instances, planted recovery {recovered}/100, 1-D SSE {}",
            exact.sse
        ),
    );
    assert!(problems.is_empty(), "{}", problems.join("\n"));
}

// ---------------------------------------------------------------------------
// Criterion 3: Ward agglomeration matches a naive reference.

#[test]
fn criterion_3_ward_merges_match_naive_reference() {
    let mut problems = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let cases = 200;
    for case in 0..cases {
        let n = rng.gen_range(2..=8);
        let mut matrix = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = rng.gen_range(0.1..10.0);
                matrix[i][j] = v;
                matrix[j][i] = v;
            }
        }
        let dendrogram = hac_ward(&matrix).expect("hac on random matrix");
        let expected = common::naive_ward(&matrix);
        if dendrogram.merges.len() != expected.len() {
            problems.push(format!("case {case}: {} merges, naive has {}", dendrogram.merges.len(), expected.len()));
            continue;
        }
        for (step, (merge, exp)) in dendrogram.merges.iter().zip(&expected).enumerate() {
            if (merge.a, merge.b) != (exp.0, exp.1) || merge.height != exp.2 {
                problems.push(format!(
                    "case {case} step {step}: merge ({}, {}) at {} but naive says ({}, {}) at {}",
                    merge.a, merge.b, merge.height, exp.0, exp.1, exp.2
                ));
                break;
            }
        }
        let mut prev = f64::NEG_INFINITY;
        for merge in &dendrogram.merges {
            if merge.height < prev - 1e-9 * prev.abs().max(1.0) {
                problems.push(format!(
                    "case {case}: height dropped from {prev} to {}",
                    merge.height
                ));
                break;
            }
            prev = merge.height;
        }
    }
    report(
        3,
        "Ward linkage oracle",
        problems.is_empty(),
        &format!("{cases} random matrices: identical merge sequences, heights non-decreasing"),
    );
    assert!(problems.is_empty(), "{}", problems.join("\n"));
}

// ---------------------------------------------------------------------------
// Criterion 4: the by-time perspective recovers the planted day types.

#[test]
fn criterion_4_by_time_recovers_planted_day_types() {
    let _gate = gate();
    let fx = fixture();
    let started = Instant::now();
    let defaults = PipelineConfig::default();
    let buildings = fx.deployment.facility_buildings();
    let results = analyze_buildings(
        &fx.trajectories,
        &buildings,
        &fx.deployment,
        &fx.calendar,
        defaults.k_time,
        FIXTURE_SEED,
        defaults.restarts,
    )
    .expect("by-time analysis");

    let mut problems = Vec::new();
    let mut min_ari = f64::INFINITY;
    let mut ph_total = 0usize;
    let mut ph_with_sunday = 0usize;
    for result in &results {
        let clusters = &result.clusters;
        let planted: Vec<usize> = clusters
            .days
            .iter()
            .map(|&day| group_index(fx.calendar.label(day).expect("calendar covers day")))
            .collect();
        let score = common::ari(&clusters.labels, &planted);
        min_ari = min_ari.min(score);
        if score < 0.8 {
            problems.push(format!("building {}: ARI {score:.3} < 0.8", clusters.building));
        }

        // Every public holiday must land in the cluster where the Sundays are.
        let mut sunday_votes: HashMap<usize, usize> = HashMap::new();
        for (&day, &label) in clusters.days.iter().zip(&clusters.labels) {
            if fx.calendar.label(day) == Some(DayLabel::Sun) {
                *sunday_votes.entry(label).or_default() += 1;
            }
        }
        let sunday_cluster = sunday_votes
            .iter()
            .max_by_key(|(&label, &count)| (count, std::cmp::Reverse(label)))
            .map(|(&label, _)| label);
        for (&day, &label) in clusters.days.iter().zip(&clusters.labels) {
            if fx.calendar.label(day) == Some(DayLabel::Ph) {
                ph_total += 1;
                if Some(label) == sunday_cluster {
                    ph_with_sunday += 1;
                }
            }
        }
    }
    if ph_total == 0 {
        problems.push("the fixture calendar has no public holiday".into());
    } else if ph_with_sunday != ph_total {
        problems.push(format!(
            "only {ph_with_sunday}/{ph_total} holidays share the Sunday cluster"
        ));
    }
    let total = fx.build_seconds + started.elapsed().as_secs_f64();
    if total >= 120.0 {
        problems.push(format!("end-to-end took {total:.1}s, budget is 120s"));
    }
    report(
        4,
        "by-time planted recovery",
        problems.is_empty(),
        &format!(
            "min ARI {min_ari:.3} over {} buildings, holidays with Sundays {ph_with_sunday}/{ph_total}, {total:.1}s",
            results.len()
        ),
    );
    assert!(problems.is_empty(), "{}", problems.join("\n"));
}

// ---------------------------------------------------------------------------
// Criterion 5: the by-person perspective recovers the planted archetypes.

#[test]
fn criterion_5_by_person_recovers_planted_archetypes() {
    let _gate = gate();
    let fx = fixture();
    let started = Instant::now();
    let defaults = PipelineConfig::default();
    let features = extract_features(&fx.trajectories, &fx.deployment).expect("person features");
    let clusters = cluster_persons(
        &features,
        defaults.k_person,
        FIXTURE_SEED,
        defaults.restarts,
        defaults.silhouette_cap,
    )
    .expect("person clustering");

    let mut problems = Vec::new();
    let archetype_index: HashMap<&str, usize> = fx
        .archetype_names
        .iter()
        .enumerate()
        .map(|(i, name)| (name.as_str(), i))
        .collect();
    let mut planted = Vec::with_capacity(features.len());
    let mut missing = 0usize;
    for feature in &features {
        match fx.truth.get(&(feature.device.as_str().to_string(), feature.day)) {
            Some(name) => planted.push(archetype_index[name.as_str()]),
            None => {
                missing += 1;
                planted.push(usize::MAX);
            }
        }
    }
    if missing > 0 {
        problems.push(format!("{missing} trajectories have no ground-truth archetype"));
    }
    let score = common::ari(&clusters.labels, &planted);
    if score < 0.8 {
        problems.push(format!("ARI {score:.3} < 0.8"));
    }

    // The cluster holding the hospital workers starts around 8 and ends
    // around 17-18 local time.
    let hw = archetype_index["hospital_worker"];
    let mut cp_votes: HashMap<usize, usize> = HashMap::new();
    for (&label, &p) in clusters.labels.iter().zip(&planted) {
        if p == hw {
            *cp_votes.entry(label).or_default() += 1;
        }
    }
    let hw_cp = cp_votes
        .iter()
        .max_by_key(|(&label, &count)| (count, std::cmp::Reverse(label)))
        .map(|(&label, _)| label)
        .expect("hospital workers present");
    let mut start_hours = [0usize; 24];
    let mut end_hours = [0usize; 24];
    let mut members = 0usize;
    for (i, &label) in clusters.labels.iter().enumerate() {
        if label != hw_cp {
            continue;
        }
        members += 1;
        let traj = &fx.trajectories[i];
        let first = traj.entries.first().expect("non-empty trajectory");
        let last = traj.entries.last().expect("non-empty trajectory");
        start_hours[clock_hour(first.start, traj.day.start)] += 1;
        end_hours[clock_hour(last.end, traj.day.start)] += 1;
    }
    let argmax = |hist: &[usize; 24]| {
        hist.iter().enumerate().max_by_key(|&(h, &c)| (c, std::cmp::Reverse(h))).unwrap().0
    };
    let start_mode = argmax(&start_hours);
    let end_mode = argmax(&end_hours);
    if start_mode != 8 {
        problems.push(format!("hospital-worker cluster starts peak at hour {start_mode}, not 8"));
    }
    if !(17..=18).contains(&end_mode) {
        problems.push(format!("hospital-worker cluster ends peak at hour {end_mode}, not 17-18"));
    }
    let total = fx.build_seconds + started.elapsed().as_secs_f64();
    if total >= 120.0 {
        problems.push(format!("end-to-end took {total:.1}s, budget is 120s"));
    }
    report(
        5,
        "by-person planted recovery",
        problems.is_empty(),
        &format!(
            "ARI {score:.3} on {} day trajectories, worker cluster ({members} days) start mode {start_mode}, end mode {end_mode}, {total:.1}s",
            features.len()
        ),
    );
    assert!(problems.is_empty(), "{}", problems.join("\n"));
}

// ---------------------------------------------------------------------------
// Criterion 6: transition-matrix invariants.

fn edges_equal(a: &[DominantEdge], b: &[DominantEdge]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| {
            x.from == y.from && x.to == y.to && x.probability == y.probability
        })
}

#[test]
fn criterion_6_transition_matrix_invariants() {
    let _gate = gate();
    let fx = fixture();
    let defaults = PipelineConfig::default();
    let mut problems = Vec::new();
    let mut matrices = 0usize;
    let mut active_rows = 0usize;
    for window in &defaults.windows {
        let counts =
            transition_counts(&fx.trajectories, &fx.deployment, window).expect("counts");
        let t = transition_probability(&counts);
        let n = t.len();
        for i in 0..n {
            if t[i][i] != 1.0 {
                problems.push(format!("{}: diagonal [{i}] is {}", window.name, t[i][i]));
            }
            let off: f64 = (0..n).filter(|&j| j != i).map(|j| t[i][j]).sum();
            if off.abs() > 1e-9 && (off - 1.0).abs() > 1e-9 {
                problems.push(format!("{}: row {i} off-diagonal sum {off}", window.name));
            }
            if (off - 1.0).abs() <= 1e-9 {
                active_rows += 1;
            }
        }

        // Scaling every count by the same factor changes nothing downstream.
        let scaled: Vec<Vec<u64>> =
            counts.iter().map(|row| row.iter().map(|&v| v * 7).collect()).collect();
        let t7 = transition_probability(&scaled);
        if t != t7 {
            problems.push(format!("{}: T changes when N is scaled by 7", window.name));
        }
        let base = trajmine::perspective::location::cluster_locations(
            &t,
            defaults.hac_input,
            defaults.cut_fraction,
        )
        .expect("location clustering");
        let scaled_clusters = trajmine::perspective::location::cluster_locations(
            &t7,
            defaults.hac_input,
            defaults.cut_fraction,
        )
        .expect("location clustering");
        if base.dendrogram != scaled_clusters.dendrogram
            || base.assignments != scaled_clusters.assignments
        {
            problems.push(format!("{}: dendrogram changes when N is scaled by 7", window.name));
        }
        if !edges_equal(
            &dominant_directions(&counts, defaults.dominant_threshold),
            &dominant_directions(&scaled, defaults.dominant_threshold),
        ) {
            problems.push(format!("{}: dominant set changes when N is scaled by 7", window.name));
        }
        matrices += 1;
    }
    if active_rows == 0 {
        problems.push("every row of every matrix was empty".into());
    }

    // The boundary share is excluded: 11 of 20 is exactly 0.55 and must not
    // count as dominant, one more transition must.
    let boundary = vec![vec![0u64, 11], vec![9, 0]];
    let at_boundary = dominant_directions(&boundary, defaults.dominant_threshold);
    if !at_boundary.is_empty() {
        problems.push(format!(
            "11-vs-9 pair sits exactly on the threshold but produced {} edges",
            at_boundary.len()
        ));
    }
    let above = vec![vec![0u64, 12], vec![8, 0]];
    let over_boundary = dominant_directions(&above, defaults.dominant_threshold);
    if over_boundary.len() != 1 || over_boundary[0].from != 0 || over_boundary[0].to != 1 {
        problems.push("12-vs-8 pair should yield exactly the 0 -> 1 edge".into());
    }

    report(
        6,
        "transition matrix invariants",
        problems.is_empty(),
        &format!(
            "{matrices} windows checked, {active_rows} active rows, scaling invariant, 0.55 boundary excluded"
        ),
    );
    assert!(problems.is_empty(), "{}", problems.join("\n"));
}

// ---------------------------------------------------------------------------
// Criterion 7: a planted commuter population reverses between the windows.

#[test]
fn criterion_7_planted_flows_reverse_between_morning_and_evening() {
    let _gate = gate();
    let dir = scratch("acceptance-flow");
    let scenario = flow_scenario();
    let outcome = generate(&scenario, 424242, dir.path()).expect("generate commuter scenario");
    let deployment = Deployment::load(&outcome.registry_path).expect("load registry");
    let trajectories = ingest_and_preprocess(&outcome.probes_path);

    let defaults = PipelineConfig::default();
    let window = |name: &str| {
        defaults.windows.iter().find(|w| w.name == name).expect("window configured")
    };
    let morning =
        transition_counts(&trajectories, &deployment, window("morning")).expect("counts");
    let evening =
        transition_counts(&trajectories, &deployment, window("evening")).expect("counts");
    let morning_dominant = dominant_directions(&morning, defaults.dominant_threshold);
    let evening_dominant = dominant_directions(&evening, defaults.dominant_threshold);

    // The generator logged which home -> work movements it planted in the
    // morning window; each should dominate there and dominate reversed in
    // the evening.
    let text = fs::read_to_string(&outcome.transitions_path).expect("read planted transitions");
    let mut planted: Vec<(usize, usize)> = Vec::new();
    for line in text.lines().skip(1) {
        let parts: Vec<&str> = line.split(',').collect();
        if parts[0] != "morning" {
            continue;
        }
        let index = |s: &str| {
            deployment
                .index_of(BuildingId(s.chars().next().expect("building id")))
                .expect("planted building registered")
        };
        planted.push((index(parts[1]), index(parts[2])));
    }
    let mut reversed = 0usize;
    for &(from, to) in &planted {
        let forward = morning_dominant.iter().any(|e| e.from == from && e.to == to);
        let backward = evening_dominant.iter().any(|e| e.from == to && e.to == from);
        if forward && backward {
            reversed += 1;
        }
    }
    let fraction = reversed as f64 / planted.len().max(1) as f64;
    let pass = !planted.is_empty() && fraction >= 0.9;
    report(
        7,
        "planted flow reversal",
        pass,
        &format!(
            "{reversed}/{} planted pairs dominate forward in the morning and backward in the evening",
            planted.len()
        ),
    );
    assert!(pass, "only {reversed}/{} planted pairs reversed", planted.len());
}

// ---------------------------------------------------------------------------
// Criterion 8: the pipeline is deterministic.

fn run_cli(args: &[&str]) {
    let output = Command::new(env!("CARGO_BIN_EXE_trajmine"))
        .args(args)
        .output()
        .expect("spawn pipeline binary");
    assert!(
        output.status.success(),
        "pipeline command {:?} failed:\n{}",
        args,
        String::from_utf8_lossy(&output.stderr)
    );
}

/// Byte-compare two artifact directories, ignoring the manifest (it records
/// wall-clock times). Returns human-readable differences.
fn diff_artifacts(a: &Path, b: &Path) -> Vec<String> {
    let names = |dir: &Path| -> Vec<String> {
        let mut names: Vec<String> = fs::read_dir(dir)
            .expect("read artifact directory")
            .map(|e| e.expect("directory entry").file_name().into_string().unwrap())
            .filter(|n| n != "manifest.json")
            .collect();
        names.sort();
        names
    };
    let (names_a, names_b) = (names(a), names(b));
    if names_a != names_b {
        return vec![format!(
            "{} holds {:?} but {} holds {:?}",
            a.display(),
            names_a,
            b.display(),
            names_b
        )];
    }
    let mut diffs = Vec::new();
    for name in &names_a {
        let bytes_a = fs::read(a.join(name)).expect("read artifact");
        let bytes_b = fs::read(b.join(name)).expect("read artifact");
        if bytes_a != bytes_b {
            diffs.push(format!("{name} differs between {} and {}", a.display(), b.display()));
        }
    }
    diffs
}

/// Compare manifests with the per-stage wall-clock seconds zeroed out.
fn diff_manifests(a: &Path, b: &Path) -> Vec<String> {
    let normalized = |path: &Path| -> serde_json::Value {
        let mut value: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(path).expect("read manifest"))
                .expect("manifest is JSON");
        if let Some(stages) = value.get_mut("stages").and_then(|s| s.as_object_mut()) {
            for stage in stages.values_mut() {
                if let Some(seconds) = stage.get_mut("seconds") {
                    *seconds = serde_json::json!(0.0);
                }
            }
        }
        value
    };
    if normalized(a) != normalized(b) {
        vec![format!("manifests {} and {} differ beyond timings", a.display(), b.display())]
    } else {
        Vec::new()
    }
}

#[test]
fn criterion_8_pipeline_is_deterministic() {
    let _gate = gate();
    let base = scratch("acceptance-determinism");
    let data = base.path().join("data");
    let data_again = base.path().join("data-again");
    let synth = |dir: &Path| {
        run_cli(&[
            "synth",
            "--devices",
            "1200",
            "--days",
            "10",
            "--seed",
            "7",
            "--output-dir",
            dir.to_str().unwrap(),
        ]);
    };
    synth(&data);
    synth(&data_again);

    let mut problems = Vec::new();
    for name in ["probes.csv.gz", "ground_truth.csv", "gt_transitions.csv"] {
        let first = fs::read(data.join("synth").join(name)).expect("read synth output");
        let second = fs::read(data_again.join("synth").join(name)).expect("read synth output");
        if first != second {
            problems.push(format!("synth output {name} differs between identical runs"));
        }
    }

    let probes = data.join("synth/probes.csv.gz");
    let registry = data.join("synth/registry.csv");
    let calendar = data.join("synth/calendar.csv");
    let run_all = |out: &Path, threads: &str, seed: &str| {
        run_cli(&[
            "all",
            "--input",
            probes.to_str().unwrap(),
            "--registry",
            registry.to_str().unwrap(),
            "--calendar",
            calendar.to_str().unwrap(),
            "--output-dir",
            out.to_str().unwrap(),
            "--threads",
            threads,
            "--seed",
            seed,
        ]);
    };
    let single = base.path().join("threads-1");
    let parallel = base.path().join("threads-8");
    let snapshot = base.path().join("snapshot");
    let reseeded = base.path().join("reseeded");
    run_all(&single, "1", "11");
    run_all(&parallel, "8", "11");
    // Repeat the exact same invocation over its own output and compare
    // against a snapshot of the first pass.
    fs::create_dir_all(&snapshot).expect("create snapshot directory");
    for entry in fs::read_dir(&parallel).expect("read artifacts") {
        let entry = entry.expect("directory entry");
        fs::copy(entry.path(), snapshot.join(entry.file_name())).expect("snapshot artifact");
    }
    run_all(&parallel, "8", "11");
    run_all(&reseeded, "8", "12");

    let thread_diffs = diff_artifacts(&single, &parallel);
    let rerun_diffs = diff_artifacts(&parallel, &snapshot);
    let manifest_diffs =
        diff_manifests(&parallel.join("manifest.json"), &snapshot.join("manifest.json"));
    let reseed_diffs = diff_artifacts(&parallel, &reseeded);
    let artifacts = fs::read_dir(&parallel).expect("read artifacts").count();
    problems.extend(thread_diffs);
    problems.extend(rerun_diffs);
    problems.extend(manifest_diffs);
    problems.extend(reseed_diffs);
    report(
        8,
        "determinism",
        problems.is_empty(),
        &format!(
            "{artifacts} artifacts byte-identical across 1 vs 8 threads, reruns, and a reseeded clustering"
        ),
    );
    assert!(problems.is_empty(), "{}", problems.join("\n"));
}

// ---------------------------------------------------------------------------
// Criterion 9: the full pipeline stays inside the scale budget.

fn vm_hwm_kb(status: &str) -> Option<u64> {
    status
        .lines()
        .find(|l| l.starts_with("VmHWM:"))?
        .split_whitespace()
        .nth(1)?
        .parse()
        .ok()
}

/// Run the binary while polling its peak resident set. Returns peak kB.
fn run_cli_tracked(args: &[&str], log: &Path) -> u64 {
    let out = File::create(log).expect("create log file");
    let err = out.try_clone().expect("clone log handle");
    let mut child = Command::new(env!("CARGO_BIN_EXE_trajmine"))
        .args(args)
        .stdin(Stdio::null())
        .stdout(Stdio::from(out))
        .stderr(Stdio::from(err))
        .spawn()
        .expect("spawn pipeline binary");
    let status_path = format!("/proc/{}/status", child.id());
    let mut peak_kb = 0u64;
    let status = loop {
        if let Ok(text) = fs::read_to_string(&status_path) {
            if let Some(kb) = vm_hwm_kb(&text) {
                peak_kb = peak_kb.max(kb);
            }
        }
        match child.try_wait().expect("poll pipeline binary") {
            Some(status) => break status,
            None => std::thread::sleep(Duration::from_millis(100)),
        }
    };
    assert!(
        status.success(),
        "pipeline command {:?} failed, log tail:\n{}",
        args,
        fs::read_to_string(log)
            .map(|t| t.lines().rev().take(15).collect::<Vec<_>>().join("\n"))
            .unwrap_or_default()
    );
    peak_kb
}

#[test]
fn criterion_9_scale_run_stays_in_budget() {
    let _gate = gate();
    let base = scratch("acceptance-scale");
    let data = base.path().join("data");
    let out = base.path().join("run");
    let started = Instant::now();
    let synth_peak = run_cli_tracked(
        &[
            "synth",
            "--devices",
            "50000",
            "--days",
            "28",
            "--activity-scale",
            "0.3",
            "--seed",
            "9",
            "--output-dir",
            data.to_str().unwrap(),
        ],
        &base.path().join("synth.log"),
    );
    let probes = data.join("synth/probes.csv.gz");
    let all_peak = run_cli_tracked(
        &[
            "all",
            "--input",
            probes.to_str().unwrap(),
            "--registry",
            data.join("synth/registry.csv").to_str().unwrap(),
            "--calendar",
            data.join("synth/calendar.csv").to_str().unwrap(),
            "--output-dir",
            out.to_str().unwrap(),
            "--seed",
            "9",
        ],
        &base.path().join("all.log"),
    );
    let elapsed = started.elapsed().as_secs_f64();
    let peak_gb = synth_peak.max(all_peak) as f64 / (1024.0 * 1024.0);
    let probes_gb = fs::metadata(&probes).map(|m| m.len()).unwrap_or(0) as f64 / 1e9;
    let pass = elapsed < 600.0 && peak_gb < 4.0;
    report(
        9,
        "scale smoke test",
        pass,
        &format!(
            "50000 devices x 28 days ({probes_gb:.2} GB compressed log): {elapsed:.0}s total, {peak_gb:.2} GB peak"
        ),
    );
    assert!(pass, "scale run took {elapsed:.0}s with {peak_gb:.2} GB peak");
}
