//! Shared test helpers: adjusted agreement scoring and naive reference
//! implementations that the optimized library code is checked against.

#![allow(dead_code)]

use std::collections::BTreeMap;

use trajmine::model::{DayTrajectory, NodeId, TrajectoryEntry};

/// Adjusted Rand index between two labelings of the same items.
pub fn ari(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    assert!(!a.is_empty());
    let mut table: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut rows: BTreeMap<usize, u64> = BTreeMap::new();
    let mut cols: BTreeMap<usize, u64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let choose2 = |x: u64| (x * x.saturating_sub(1) / 2) as f64;
    let sum_ij: f64 = table.values().map(|&v| choose2(v)).sum();
    let sum_a: f64 = rows.values().map(|&v| choose2(v)).sum();
    let sum_b: f64 = cols.values().map(|&v| choose2(v)).sum();
    let total = choose2(a.len() as u64);
    let expected = sum_a * sum_b / total;
    let max = 0.5 * (sum_a + sum_b);
    if max == expected {
        // Both labelings are single-cluster; they agree perfectly.
        return 1.0;
    }
    (sum_ij - expected) / (max - expected)
}

/// Whether two labelings describe the same partition (bijective relabeling).
pub fn same_partition(a: &[usize], b: &[usize]) -> bool {
    let mut fwd: BTreeMap<usize, usize> = BTreeMap::new();
    let mut back: BTreeMap<usize, usize> = BTreeMap::new();
    a.iter()
        .zip(b)
        .all(|(&x, &y)| *fwd.entry(x).or_insert(y) == y && *back.entry(y).or_insert(x) == x)
}

/// Naive reference for building-level merging: rename each sensor to its
/// building, then repeatedly rescan from the left and fuse the first
/// consecutive same-building pair whose gap is under the threshold, until a
/// full scan finds nothing. Deliberately quadratic and structured nothing
/// like the library's single pass.
pub fn naive_building_merge(trajectory: &DayTrajectory, threshold: i64) -> DayTrajectory {
    let mut spans: Vec<(char, i64, i64)> = trajectory
        .entries
        .iter()
        .map(|e| (e.node.as_str().chars().next().unwrap(), e.start, e.end))
        .collect();
    'outer: loop {
        for i in 0..spans.len().saturating_sub(1) {
            let same = spans[i].0 == spans[i + 1].0;
            let gap = spans[i + 1].1 - spans[i].2;
            if same && gap < threshold {
                spans[i].2 = spans[i + 1].2;
                spans.remove(i + 1);
                continue 'outer;
            }
        }
        break;
    }
    let entries: Vec<TrajectoryEntry> = spans
        .iter()
        .enumerate()
        .map(|(i, &(building, start, end))| TrajectoryEntry {
            node: NodeId::new(building.to_string()),
            next: spans.get(i + 1).map(|&(b, _, _)| NodeId::new(b.to_string())),
            start,
            end,
            stay: end - start,
            take: spans.get(i + 1).map_or(0, |&(_, s, _)| s - end),
        })
        .collect();
    DayTrajectory {
        device: trajectory.device.clone(),
        day: trajectory.day,
        entries,
    }
}

/// Naive Ward agglomeration over a dissimilarity matrix: clusters live in a
/// flat id-indexed table covering leaves and merges alike, and every step
/// rescans all active pairs and rebuilds rows with the size-weighted
/// recurrence. Returns `(child_a, child_b, height)` triples where ids count
/// leaves first and `child_a` holds the smaller original leaf.
pub fn naive_ward(matrix: &[Vec<f64>]) -> Vec<(usize, usize, f64)> {
    let n = matrix.len();
    // dissimilarity by unordered id pair, for active ids only
    let mut d: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for i in 0..n {
        for j in (i + 1)..n {
            d.insert((i, j), matrix[i][j]);
        }
    }
    let mut active: Vec<usize> = (0..n).collect();
    let mut size: BTreeMap<usize, f64> = (0..n).map(|i| (i, 1.0)).collect();
    let mut min_leaf: BTreeMap<usize, usize> = (0..n).map(|i| (i, i)).collect();

    let key = |x: usize, y: usize| (x.min(y), x.max(y));
    let mut merges = Vec::new();
    for step in 0..n.saturating_sub(1) {
        let (&(i, j), &height) = d
            .iter()
            .filter(|((x, y), _)| active.contains(x) && active.contains(y))
            .min_by(|(ka, va), (kb, vb)| va.partial_cmp(vb).unwrap().then(ka.cmp(kb)))
            .unwrap();

        let new = n + step;
        let (si, sj) = (size[&i], size[&j]);
        for &x in &active {
            if x == i || x == j {
                continue;
            }
            let sx = size[&x];
            let dix = d[&key(i, x)];
            let djx = d[&key(j, x)];
            let updated = ((si + sx) * dix + (sj + sx) * djx - sx * height) / (si + sj + sx);
            d.insert(key(new, x), updated);
        }
        active.retain(|&x| x != i && x != j);
        active.push(new);
        size.insert(new, si + sj);
        min_leaf.insert(new, min_leaf[&i].min(min_leaf[&j]));

        let (a, b) = if min_leaf[&i] < min_leaf[&j] { (i, j) } else { (j, i) };
        merges.push((a, b, height));
    }
    merges
}
