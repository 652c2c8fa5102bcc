//! Location perspective: count building-to-building transitions inside
//! fixed daily time windows, turn them into row-normalized transition
//! probabilities, cluster the buildings hierarchically, and extract the
//! dominant flow direction of each building pair.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::cluster::{cut_dendrogram, hac_ward, leaf_order, sqdist, Dendrogram};
use crate::error::{Error, Result};
use crate::model::{BuildingId, DayTrajectory, Deployment, DAY_BOUNDARY_OFFSET, DAY_SECONDS};

/// A daily clock window, half-open, in local seconds since midnight.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeWindowDef {
    pub name: String,
    pub start: i64,
    pub end: i64,
}

impl TimeWindowDef {
    pub fn new(name: impl Into<String>, start: i64, end: i64) -> TimeWindowDef {
        TimeWindowDef {
            name: name.into(),
            start,
            end,
        }
    }

    /// Whether a unix instant inside a day window falls in this clock
    /// window. `day_start` is the 03:00 local opening of the day.
    pub fn contains(&self, t: i64, day_start: i64) -> bool {
        let local = (t - day_start + DAY_BOUNDARY_OFFSET).rem_euclid(DAY_SECONDS);
        local >= self.start && local < self.end
    }
}

/// The three analysis windows: morning 06:00-10:00, midday 11:00-14:00,
/// evening 18:00-22:00.
pub fn default_windows() -> Vec<TimeWindowDef> {
    vec![
        TimeWindowDef::new("morning", 6 * 3600, 10 * 3600),
        TimeWindowDef::new("midday", 11 * 3600, 14 * 3600),
        TimeWindowDef::new("evening", 18 * 3600, 22 * 3600),
    ]
}

/// Count transitions between distinct buildings whose departure time (the
/// end of the source stay) falls inside the window. Rows and columns follow
/// registry order.
pub fn transition_counts(
    trajectories: &[DayTrajectory],
    deployment: &Deployment,
    window: &TimeWindowDef,
) -> Result<Vec<Vec<u64>>> {
    let n = deployment.len();
    let mut counts = vec![vec![0u64; n]; n];
    for traj in trajectories {
        for pair in traj.entries.windows(2) {
            let from = pair[0].node.building();
            let to = pair[1].node.building();
            if from == to {
                continue;
            }
            if !window.contains(pair[0].end, traj.day.start) {
                continue;
            }
            let i = deployment.index_of(from).ok_or_else(|| {
                Error::Registry(format!("building `{from}` is not in the registry"))
            })?;
            let j = deployment.index_of(to).ok_or_else(|| {
                Error::Registry(format!("building `{to}` is not in the registry"))
            })?;
            counts[i][j] += 1;
        }
    }
    Ok(counts)
}

/// Row-normalize the counts into transition probabilities: each off-diagonal
/// entry is divided by its row's off-diagonal sum (rows with no outgoing
/// transitions stay zero), then the diagonal is set to 1.
pub fn transition_probability(counts: &[Vec<u64>]) -> Vec<Vec<f64>> {
    let n = counts.len();
    let mut t = vec![vec![0.0; n]; n];
    for i in 0..n {
        let row_sum: u64 = (0..n).filter(|&j| j != i).map(|j| counts[i][j]).sum();
        if row_sum > 0 {
            for j in 0..n {
                if j != i {
                    t[i][j] = counts[i][j] as f64 / row_sum as f64;
                }
            }
        }
        t[i][i] = 1.0;
    }
    t
}

/// Dissimilarity between buildings: 1 minus the symmetrized transition
/// probability, with the diagonal treated as 0 before symmetrizing, so a
/// pair exchanging all of each other's traffic sits at distance 0 and a
/// pair never exchanging any sits at 1.
pub fn matrix_to_dissimilarity(t: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = t.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                d[i][j] = 1.0 - (t[i][j] + t[j][i]) / 2.0;
            }
        }
    }
    d
}

/// Alternative clustering input: squared Euclidean distances between the
/// rows of T taken as feature vectors (diagonal 1s included).
pub fn row_vector_dissimilarity(t: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = t.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = sqdist(&t[i], &t[j]);
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    d
}

/// Which dissimilarity the HAC step consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HacInput {
    /// `1 - symmetrized T`, reading the matrix entries as distances.
    Dissimilarity,
    /// Squared Euclidean distances between T's rows.
    RowVectors,
}

impl HacInput {
    pub fn parse(s: &str) -> Result<HacInput> {
        match s.to_ascii_lowercase().as_str() {
            "dissimilarity" => Ok(HacInput::Dissimilarity),
            "row-vectors" => Ok(HacInput::RowVectors),
            other => Err(Error::Config(format!(
                "unknown hac-input `{other}` (expected `dissimilarity` or `row-vectors`)"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            HacInput::Dissimilarity => "dissimilarity",
            HacInput::RowVectors => "row-vectors",
        }
    }
}

#[derive(Debug, Clone)]
pub struct LocationClusters {
    pub dendrogram: Dendrogram,
    /// Absolute cut height used for the assignment.
    pub threshold: f64,
    /// Cluster index per building, registry order.
    pub assignments: Vec<usize>,
    /// Registry indices in dendrogram display order.
    pub leaf_order: Vec<usize>,
    /// T with rows and columns permuted to `leaf_order`.
    pub reordered: Vec<Vec<f64>>,
}

/// Ward-cluster the buildings of a transition matrix. The cut height is
/// `cut_fraction` of the maximum merge height (so 0 yields singletons and
/// anything above 1 yields one cluster), and the matrix is reordered by the
/// dendrogram's leaf order for display.
pub fn cluster_locations(
    t: &[Vec<f64>],
    input: HacInput,
    cut_fraction: f64,
) -> Result<LocationClusters> {
    let d = match input {
        HacInput::Dissimilarity => matrix_to_dissimilarity(t),
        HacInput::RowVectors => row_vector_dissimilarity(t),
    };
    let dendrogram = hac_ward(&d)?;
    let max_height = dendrogram
        .merges
        .iter()
        .map(|m| m.height)
        .fold(0.0, f64::max);
    let threshold = cut_fraction * max_height;
    let assignments = cut_dendrogram(&dendrogram, threshold);
    let order = leaf_order(&dendrogram);
    let n = t.len();
    let mut reordered = vec![vec![0.0; n]; n];
    for (ri, &i) in order.iter().enumerate() {
        for (rj, &j) in order.iter().enumerate() {
            reordered[ri][rj] = t[i][j];
        }
    }
    Ok(LocationClusters {
        dendrogram,
        threshold,
        assignments,
        leaf_order: order,
        reordered,
    })
}

/// The heavier direction of one building pair, kept only when it carries
/// strictly more than the threshold share of the pair's two-way traffic.
#[derive(Debug, Clone, PartialEq)]
pub struct DominantEdge {
    /// Registry indices.
    pub from: usize,
    pub to: usize,
    /// Share of the pair's transitions going `from -> to`, in (threshold, 1].
    pub probability: f64,
}

pub const DOMINANCE_THRESHOLD: f64 = 0.55;

/// Scan every unordered pair with any traffic and emit the direction whose
/// share strictly exceeds the threshold; a balanced pair emits nothing, so
/// there is at most one edge per pair. Output is ordered by pair indices.
pub fn dominant_directions(counts: &[Vec<u64>], threshold: f64) -> Vec<DominantEdge> {
    let n = counts.len();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let fwd = counts[i][j];
            let rev = counts[j][i];
            let total = fwd + rev;
            if total == 0 {
                continue;
            }
            let p = fwd as f64 / total as f64;
            if p > threshold {
                edges.push(DominantEdge {
                    from: i,
                    to: j,
                    probability: p,
                });
            } else if 1.0 - p > threshold {
                edges.push(DominantEdge {
                    from: j,
                    to: i,
                    probability: 1.0 - p,
                });
            }
        }
    }
    edges
}

/// How one building's dominant flows behave across the day's windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowPattern {
    /// Majority inbound in the first window and majority outbound in the
    /// last (or the other way around).
    Reversal,
    /// A single outbound target, the same in every window.
    ContinuousTarget,
    Mixed,
}

impl FlowPattern {
    pub fn as_str(&self) -> &'static str {
        match self {
            FlowPattern::Reversal => "reversal",
            FlowPattern::ContinuousTarget => "continuous-target",
            FlowPattern::Mixed => "mixed",
        }
    }
}

/// Incident dominant edges of the building of interest in one window.
#[derive(Debug, Clone)]
pub struct WindowFlow {
    pub window: String,
    pub inbound: Vec<DominantEdge>,
    pub outbound: Vec<DominantEdge>,
}

#[derive(Debug, Clone)]
pub struct FlowReport {
    pub building: BuildingId,
    pub windows: Vec<WindowFlow>,
    pub pattern: FlowPattern,
}

/// Partition each window's dominant edges into the building's inbound and
/// outbound sets and classify the day shape. Geometry-based "continuous
/// direction" classification needs coordinates the registry does not carry,
/// so anything that is neither a reversal nor a single constant target is
/// reported as mixed, with the raw edges available for inspection.
pub fn building_flow_report(
    per_window: &[(String, Vec<DominantEdge>)],
    building: BuildingId,
    deployment: &Deployment,
) -> Result<FlowReport> {
    let b = deployment
        .index_of(building)
        .ok_or_else(|| Error::Registry(format!("building `{building}` is not in the registry")))?;

    let mut windows = Vec::with_capacity(per_window.len());
    for (name, edges) in per_window {
        let inbound = edges.iter().filter(|e| e.to == b).cloned().collect();
        let outbound = edges.iter().filter(|e| e.from == b).cloned().collect();
        windows.push(WindowFlow {
            window: name.clone(),
            inbound,
            outbound,
        });
    }

    let pattern = classify(&windows);
    Ok(FlowReport {
        building,
        windows,
        pattern,
    })
}

fn classify(windows: &[WindowFlow]) -> FlowPattern {
    if let (Some(first), Some(last)) = (windows.first(), windows.last()) {
        if windows.len() >= 2 {
            let in_then_out = first.inbound.len() > first.outbound.len()
                && last.outbound.len() > last.inbound.len();
            let out_then_in = first.outbound.len() > first.inbound.len()
                && last.inbound.len() > last.outbound.len();
            if in_then_out || out_then_in {
                return FlowPattern::Reversal;
            }
        }
    }
    let mut target = None;
    for w in windows {
        let mut outs: Vec<usize> = w.outbound.iter().map(|e| e.to).collect();
        outs.sort_unstable();
        outs.dedup();
        let [sole] = outs[..] else {
            return FlowPattern::Mixed;
        };
        match target {
            None => target = Some(sole),
            Some(t) if t == sole => {}
            Some(_) => return FlowPattern::Mixed,
        }
    }
    if target.is_some() {
        FlowPattern::ContinuousTarget
    } else {
        FlowPattern::Mixed
    }
}

// --- artifact writers ---

pub fn write_counts(counts: &[Vec<u64>], deployment: &Deployment, path: &Path) -> Result<()> {
    let ids: Vec<String> = deployment.buildings().map(|b| b.to_string()).collect();
    let mut out = Vec::new();
    writeln!(out, "building,{}", ids.join(",")).unwrap();
    for (i, row) in counts.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
        writeln!(out, "{},{}", ids[i], cells.join(",")).unwrap();
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Write the leaf-order-reordered probability matrix; the header and row
/// names carry the reordered building ids.
pub fn write_probabilities(
    clusters: &LocationClusters,
    deployment: &Deployment,
    path: &Path,
) -> Result<()> {
    let ids: Vec<String> = clusters
        .leaf_order
        .iter()
        .map(|&i| deployment.nodes[i].building.to_string())
        .collect();
    let mut out = Vec::new();
    writeln!(out, "building,{}", ids.join(",")).unwrap();
    for (r, row) in clusters.reordered.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
        writeln!(out, "{},{}", ids[r], cells.join(",")).unwrap();
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct DendrogramFile<'a> {
    leaves: Vec<String>,
    merges: &'a [crate::cluster::Merge],
    threshold: f64,
    leaf_order: Vec<String>,
    clusters: Vec<Vec<String>>,
}

pub fn write_dendrogram(
    clusters: &LocationClusters,
    deployment: &Deployment,
    path: &Path,
) -> Result<()> {
    let name = |i: usize| deployment.nodes[i].building.to_string();
    let n_clusters = clusters.assignments.iter().max().map_or(0, |&m| m + 1);
    let mut groups = vec![Vec::new(); n_clusters];
    for (i, &c) in clusters.assignments.iter().enumerate() {
        groups[c].push(name(i));
    }
    let file = DendrogramFile {
        leaves: deployment.buildings().map(|b| b.to_string()).collect(),
        merges: &clusters.dendrogram.merges,
        threshold: clusters.threshold,
        leaf_order: clusters.leaf_order.iter().map(|&i| name(i)).collect(),
        clusters: groups,
    };
    let json = serde_json::to_string_pretty(&file).expect("dendrogram serializes");
    std::fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn write_dominant(
    edges: &[DominantEdge],
    deployment: &Deployment,
    path: &Path,
) -> Result<()> {
    let mut out = Vec::new();
    writeln!(out, "from,to,probability").unwrap();
    for e in edges {
        writeln!(
            out,
            "{},{},{:.6}",
            deployment.nodes[e.from].building, deployment.nodes[e.to].building, e.probability
        )
        .unwrap();
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_flow_report(report: &FlowReport, deployment: &Deployment, path: &Path) -> Result<()> {
    let name = |i: usize| deployment.nodes[i].building.to_string();
    let mut out = String::new();
    out.push_str(&format!("building of interest: {}\n", report.building));
    out.push_str(&format!("pattern: {}\n", report.pattern.as_str()));
    for w in &report.windows {
        out.push_str(&format!("\n[{}]\n", w.window));
        for e in &w.inbound {
            out.push_str(&format!(
                "  in  {} -> {} (p = {:.3})\n",
                name(e.from),
                name(e.to),
                e.probability
            ));
        }
        for e in &w.outbound {
            out.push_str(&format!(
                "  out {} -> {} (p = {:.3})\n",
                name(e.from),
                name(e.to),
                e.probability
            ));
        }
        if w.inbound.is_empty() && w.outbound.is_empty() {
            out.push_str("  (no dominant edges)\n");
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
