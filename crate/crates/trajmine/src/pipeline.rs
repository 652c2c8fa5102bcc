//! Stage orchestration. Stages communicate only through files under the
//! configured output directory, so each one is independently re-runnable;
//! a manifest records the config hash, seed, external-input checksums, and
//! per-stage timings of the most recent runs.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::ingest;
use crate::model::{building_of, BuildingId, Calendar, Category, DayTrajectory, Deployment};
use crate::perspective::{location, person, time as bytime};
use crate::preprocess;
use crate::synth::{self, Scenario};

pub const SENSOR_TRAJECTORIES: &str = "sensor_trajectories.jsonl";
pub const TRAJECTORIES: &str = "trajectories.jsonl";
pub const MANIFEST: &str = "manifest.json";

pub fn artifact(config: &PipelineConfig, name: &str) -> PathBuf {
    config.output_dir.join(name)
}

fn require(config: &PipelineConfig, stage: &str, name: &str) -> Result<PathBuf> {
    let path = artifact(config, name);
    if !path.is_file() {
        return Err(Error::MissingArtifact {
            stage: stage.into(),
            path,
        });
    }
    Ok(path)
}

fn require_external(stage: &str, path: &Path) -> Result<()> {
    if !path.is_file() {
        return Err(Error::MissingArtifact {
            stage: stage.into(),
            path: path.to_path_buf(),
        });
    }
    Ok(())
}

fn require_seed(config: &PipelineConfig, stage: &str) -> Result<u64> {
    config.seed.ok_or_else(|| {
        Error::Config(format!(
            "stage `{stage}` needs a seed; pass --seed or set `seed` in the config"
        ))
    })
}

// --- manifest ---

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub config_sha256: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// External input path -> sha256 of its bytes.
    #[serde(default)]
    pub inputs: BTreeMap<String, String>,
    #[serde(default)]
    pub stages: BTreeMap<String, StageRecord>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct StageRecord {
    pub seconds: f64,
    #[serde(default)]
    pub info: BTreeMap<String, Value>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Manifest> {
        if !path.is_file() {
            return Ok(Manifest::default());
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::InvalidInput(format!("{}: bad manifest: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 20];
    loop {
        let n = file.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

fn sha256_str(s: &str) -> String {
    hex::encode(Sha256::digest(s.as_bytes()))
}

fn record_stage(
    config: &PipelineConfig,
    name: &str,
    seconds: f64,
    info: BTreeMap<String, Value>,
    checksummed_inputs: &[&Path],
) -> Result<()> {
    let path = artifact(config, MANIFEST);
    let mut manifest = Manifest::load(&path).unwrap_or_default();
    manifest.config_sha256 = sha256_str(&config.format());
    manifest.seed = config.seed;
    for input in checksummed_inputs {
        manifest
            .inputs
            .insert(input.display().to_string(), sha256_file(input)?);
    }
    manifest.stages.insert(
        name.into(),
        StageRecord {
            seconds,
            info,
        },
    );
    manifest.save(&path)
}

/// Run one stage body with progress logging and manifest upkeep. The body
/// returns its info map; external inputs are checksummed after success.
fn run_stage<F>(config: &PipelineConfig, name: &str, inputs: &[&Path], body: F) -> Result<()>
where
    F: FnOnce() -> Result<BTreeMap<String, Value>>,
{
    std::fs::create_dir_all(&config.output_dir).map_err(|e| Error::io(&config.output_dir, e))?;
    eprintln!("[{name}] starting");
    let t0 = Instant::now();
    let info = body()?;
    let seconds = t0.elapsed().as_secs_f64();
    eprintln!("[{name}] done in {seconds:.1}s");
    record_stage(config, name, seconds, info, inputs)
}

// --- stages ---

/// Generate a synthetic dataset into `<output_dir>/synth/`. Point the
/// config's `input`, `registry`, and `calendar` at the emitted files to
/// feed the rest of the pipeline.
pub fn run_synth(config: &PipelineConfig, scenario: &Scenario) -> Result<()> {
    let seed = require_seed(config, "synth")?;
    run_stage(config, "synth", &[], || {
        let dir = config.output_dir.join("synth");
        let report = synth::generate(scenario, seed, &dir)?;
        eprintln!(
            "[synth] {} devices, {} device-days, {} probes -> {}",
            report.devices,
            report.device_days,
            report.probes,
            dir.display()
        );
        Ok(BTreeMap::from([
            ("devices".into(), json!(report.devices)),
            ("device_days".into(), json!(report.device_days)),
            ("probes".into(), json!(report.probes)),
        ]))
    })
}

/// Parse the probe log, coalesce per-sensor detections, and split them into
/// per-day sensor-level trajectories.
pub fn run_ingest(config: &PipelineConfig) -> Result<()> {
    require_external("ingest", &config.input)?;
    run_stage(config, "ingest", &[&config.input], || {
        let (intervals, report) = if config.pre_coalesced {
            ingest::load_pre_coalesced(&config.input)?
        } else {
            let mut coalescer = ingest::Coalescer::new();
            let report = ingest::for_each_probe(&config.input, None, |e| coalescer.push(e))?;
            (coalescer.finish(config.coalesce_gap), report)
        };
        let n_intervals = intervals.len();
        let trajectories = ingest::build_sensor_trajectories(&intervals, config.tz_offset);
        drop(intervals);
        eprintln!(
            "[ingest] {} probes ({} malformed skipped), {} intervals, {} device-days",
            report.parsed,
            report.skipped,
            n_intervals,
            trajectories.len()
        );
        preprocess::write_trajectories(&artifact(config, SENSOR_TRAJECTORIES), &trajectories)?;
        Ok(BTreeMap::from([
            ("probes".into(), json!(report.parsed)),
            ("malformed".into(), json!(report.skipped)),
            ("intervals".into(), json!(n_intervals)),
            ("trajectories".into(), json!(trajectories.len())),
        ]))
    })
}

/// Merge sensor-level trajectories to building level and apply the span and
/// stay filters, streaming record by record.
pub fn run_preprocess(config: &PipelineConfig) -> Result<()> {
    let input = require(config, "preprocess", SENSOR_TRAJECTORIES)?;
    run_stage(config, "preprocess", &[], || {
        let out_path = artifact(config, TRAJECTORIES);
        let file = std::fs::File::create(&out_path).map_err(|e| Error::io(&out_path, e))?;
        let mut out = BufWriter::new(file);
        let mut report = preprocess::FilterReport::default();
        preprocess::for_each_trajectory(&input, config.tz_offset, |traj| {
            let merged = preprocess::merge_to_building_level(&traj, config.merge_threshold);
            if preprocess::keep_trajectory(&merged, config.min_span, config.max_stay, &mut report) {
                out.write_all(preprocess::trajectory_to_json(&merged).as_bytes())
                    .and_then(|_| out.write_all(b"\n"))
                    .map_err(|e| Error::io(&out_path, e))?;
            }
            Ok(())
        })?;
        out.flush().map_err(|e| Error::io(&out_path, e))?;
        eprintln!(
            "[preprocess] kept {} of {} ({} too short, {} with an over-long stay)",
            report.kept, report.input, report.too_short, report.long_stay
        );
        Ok(BTreeMap::from([
            ("input".into(), json!(report.input)),
            ("kept".into(), json!(report.kept)),
            ("dropped_short_span".into(), json!(report.too_short)),
            ("dropped_long_stay".into(), json!(report.long_stay)),
        ]))
    })
}

fn load_inputs(
    config: &PipelineConfig,
    stage: &str,
) -> Result<(Vec<DayTrajectory>, Deployment)> {
    let path = require(config, stage, TRAJECTORIES)?;
    require_external(stage, &config.registry)?;
    let trajectories = preprocess::read_trajectories(&path, config.tz_offset)?;
    let deployment = Deployment::load(&config.registry)?;
    Ok((trajectories, deployment))
}

/// Resolve the `time_buildings` config key against the registry.
fn resolve_buildings(spec: &str, deployment: &Deployment) -> Result<Vec<BuildingId>> {
    match spec {
        "facility" => Ok(deployment.facility_buildings()),
        "all" => Ok(deployment.buildings().collect()),
        list => list
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                let b = building_of(s)
                    .ok_or_else(|| Error::Config(format!("bad building id `{s}`")))?;
                if deployment.index_of(b).is_none() {
                    return Err(Error::Config(format!("building `{s}` is not in the registry")));
                }
                Ok(b)
            })
            .collect(),
    }
}

/// Cluster every selected building's days by hourly visit shape and write
/// the assignments, per-building confusion tables, and normalized curves.
pub fn run_cluster_time(config: &PipelineConfig) -> Result<()> {
    let seed = require_seed(config, "cluster-time")?;
    require_external("cluster-time", &config.calendar)?;
    run_stage(
        config,
        "cluster-time",
        &[&config.registry, &config.calendar],
        || {
            let (trajectories, deployment) = load_inputs(config, "cluster-time")?;
            let calendar = Calendar::load(&config.calendar)?;
            let buildings = resolve_buildings(&config.time_buildings, &deployment)?;
            let results = bytime::analyze_buildings(
                &trajectories,
                &buildings,
                &deployment,
                &calendar,
                config.k_time,
                seed,
                config.restarts,
            )?;
            bytime::write_assignments(&results, &calendar, &artifact(config, "calendar_assignments.csv"))?;
            for result in &results {
                let b = result.features.building.0;
                bytime::write_confusion(&result.confusion, &artifact(config, &format!("confusion_{b}.csv")))?;
                bytime::write_curves(result, &artifact(config, &format!("curves_{b}.csv")))?;
                for missing in &result.confusion.empty_types {
                    eprintln!(
                        "[cluster-time] building {b}: no `{}` days in the span",
                        missing.as_str()
                    );
                }
            }
            let days = results.first().map_or(0, |r| r.clusters.days.len());
            eprintln!(
                "[cluster-time] clustered {} days at {} buildings into k={}",
                days,
                results.len(),
                config.k_time
            );
            Ok(BTreeMap::from([
                ("buildings".into(), json!(results.len())),
                ("days".into(), json!(days)),
                ("k".into(), json!(config.k_time)),
            ]))
        },
    )
}

/// Cluster person-days by stay-time features and write the features,
/// assignments, and per-cluster transit/uniques/start-end/day-group
/// artifacts.
pub fn run_cluster_person(config: &PipelineConfig) -> Result<()> {
    let seed = require_seed(config, "cluster-person")?;
    require_external("cluster-person", &config.calendar)?;
    run_stage(
        config,
        "cluster-person",
        &[&config.registry, &config.calendar],
        || {
            let (trajectories, deployment) = load_inputs(config, "cluster-person")?;
            let calendar = Calendar::load(&config.calendar)?;
            let features = person::extract_features(&trajectories, &deployment)?;
            let clusters = person::cluster_persons(
                &features,
                config.k_person,
                seed,
                config.restarts,
                config.silhouette_cap,
            )?;
            person::write_features(&features, &artifact(config, "person_features.csv"))?;
            person::write_assignments(&features, &clusters, &artifact(config, "person_assignments.csv"))?;
            eprintln!(
                "[cluster-person] {} person-days into k={} (sizes {:?}, silhouette {:.3} on {} points)",
                features.len(),
                clusters.k,
                clusters.sizes,
                clusters.silhouette,
                clusters.silhouette_points
            );

            let curve_category = Category::parse(&config.person_curve_category)?;
            let curve_buildings: HashSet<BuildingId> = deployment
                .nodes
                .iter()
                .filter(|n| n.category == curve_category)
                .map(|n| n.building)
                .collect();
            let span = bytime::day_span(&trajectories)
                .ok_or_else(|| Error::InvalidInput("no trajectories to analyze".into()))?;

            for cp in 1..=clusters.k {
                let members: Vec<&DayTrajectory> = trajectories
                    .iter()
                    .zip(&clusters.labels)
                    .filter(|(_, &label)| label == cp)
                    .map(|(t, _)| t)
                    .collect();
                let edges = person::cluster_transition_graph(members.iter().copied());
                person::write_edges(&edges, &artifact(config, &format!("cp_{cp}_edges.csv")))?;
                let histogram =
                    person::unique_location_histogram(members.iter().copied(), deployment.len());
                person::write_uniques(&histogram, &artifact(config, &format!("cp_{cp}_uniques.csv")))?;
                let (starts, ends) = person::start_end_distributions(members.iter().copied());
                person::write_startend(&starts, &ends, &artifact(config, &format!("cp_{cp}_startend.csv")))?;
                let (curves, empty) = person::daytype_count_curves(
                    members.iter().copied(),
                    &curve_buildings,
                    &calendar,
                    span,
                )?;
                for missing in empty {
                    eprintln!(
                        "[cluster-person] cp {cp}: no `{}` days in the span, curve omitted",
                        missing.as_str()
                    );
                }
                for group in &curves {
                    person::write_group_curves(
                        group,
                        &artifact(config, &format!("cp_{cp}_{}_curves.csv", group.group.as_str())),
                    )?;
                }
            }
            Ok(BTreeMap::from([
                ("person_days".into(), json!(features.len())),
                ("k".into(), json!(clusters.k)),
                ("sizes".into(), json!(clusters.sizes)),
                ("silhouette".into(), json!(clusters.silhouette)),
                ("silhouette_points".into(), json!(clusters.silhouette_points)),
            ]))
        },
    )
}

/// Per flow window: transition counts, row-normalized probabilities,
/// building dendrogram with its cut, and dominant directions.
pub fn run_cluster_location(config: &PipelineConfig) -> Result<()> {
    run_stage(config, "cluster-location", &[&config.registry], || {
        let (trajectories, deployment) = load_inputs(config, "cluster-location")?;
        let mut info = BTreeMap::new();
        for window in &config.windows {
            let counts = location::transition_counts(&trajectories, &deployment, window)?;
            location::write_counts(&counts, &deployment, &artifact(config, &format!("N_{}.csv", window.name)))?;
            let t = location::transition_probability(&counts);
            let clusters = location::cluster_locations(&t, config.hac_input, config.cut_fraction)?;
            location::write_probabilities(&clusters, &deployment, &artifact(config, &format!("T_{}.csv", window.name)))?;
            location::write_dendrogram(
                &clusters,
                &deployment,
                &artifact(config, &format!("dendrogram_{}.json", window.name)),
            )?;
            let dominant = location::dominant_directions(&counts, config.dominant_threshold);
            location::write_dominant(
                &dominant,
                &deployment,
                &artifact(config, &format!("dominant_{}.csv", window.name)),
            )?;
            let total: u64 = counts.iter().flatten().sum();
            let groups = clusters.assignments.iter().max().map_or(0, |&m| m + 1);
            eprintln!(
                "[cluster-location] {}: {} transitions, {} building groups, {} dominant directions",
                window.name,
                total,
                groups,
                dominant.len()
            );
            info.insert(format!("{}_transitions", window.name), json!(total));
            info.insert(format!("{}_groups", window.name), json!(groups));
            info.insert(format!("{}_dominant", window.name), json!(dominant.len()));
        }
        Ok(info)
    })
}

fn read_dominant(path: &Path, deployment: &Deployment) -> Result<Vec<location::DominantEdge>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut edges = Vec::new();
    for (lineno, line) in text.lines().enumerate().skip(1) {
        let mut parts = line.split(',');
        let (Some(from), Some(to), Some(p)) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::parse(path, lineno + 1, "expected from,to,probability"));
        };
        let resolve = |s: &str| -> Result<usize> {
            building_of(s)
                .and_then(|b| deployment.index_of(b))
                .ok_or_else(|| Error::parse(path, lineno + 1, format!("unknown building `{s}`")))
        };
        edges.push(location::DominantEdge {
            from: resolve(from)?,
            to: resolve(to)?,
            probability: p
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, lineno + 1, format!("bad probability `{p}`")))?,
        });
    }
    Ok(edges)
}

/// Read the dominant-direction files back and write one flow report per
/// selected building.
pub fn run_report(config: &PipelineConfig) -> Result<()> {
    run_stage(config, "report", &[&config.registry], || {
        require_external("report", &config.registry)?;
        let deployment = Deployment::load(&config.registry)?;
        let mut per_window = Vec::new();
        for window in &config.windows {
            let path = require(config, "report", &format!("dominant_{}.csv", window.name))?;
            per_window.push((window.name.clone(), read_dominant(&path, &deployment)?));
        }
        let buildings = resolve_buildings(&config.time_buildings, &deployment)?;
        let mut patterns = BTreeMap::new();
        for &building in &buildings {
            let report = location::building_flow_report(&per_window, building, &deployment)?;
            location::write_flow_report(
                &report,
                &deployment,
                &artifact(config, &format!("flow_report_{}.txt", building.0)),
            )?;
            eprintln!("[report] building {}: {}", building, report.pattern.as_str());
            patterns.insert(building.to_string(), json!(report.pattern.as_str()));
        }
        Ok(patterns)
    })
}

/// The full chain on an existing probe log: ingest through report.
pub fn run_all(config: &PipelineConfig) -> Result<()> {
    run_ingest(config)?;
    run_preprocess(config)?;
    run_cluster_time(config)?;
    run_cluster_person(config)?;
    run_cluster_location(config)?;
    run_report(config)
}
