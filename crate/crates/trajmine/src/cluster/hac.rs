//! Agglomerative hierarchical clustering with Ward linkage.
//!
//! The input is a square dissimilarity matrix (for point data, squared
//! Euclidean distances). Each step fuses the pair of active clusters with
//! the smallest dissimilarity, recording it at that height, and updates the
//! remaining dissimilarities with the Ward size-weighted recurrence:
//!
//! ```text
//! d(A∪B, X) = ((|A|+|X|) d(A,X) + (|B|+|X|) d(B,X) - |X| d(A,B)) / (|A|+|B|+|X|)
//! ```
//!
//! Ward linkage is reducible, so merge heights never decrease. Ties pick
//! the smallest (id_a, id_b) pair, which makes the whole dendrogram a pure
//! function of the input matrix. The matrices here stay tiny (one row per
//! monitored building), so the quadratic scan per step is deliberate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One agglomeration step. Clusters are numbered like the leaves first
/// (`0..n`), then each merge creates cluster `n + step`. `a` holds the
/// child whose subtree contains the smaller original leaf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
    /// Leaves under the merged cluster.
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    /// Number of leaves.
    pub n: usize,
    /// The n-1 merges in execution order; heights are non-decreasing.
    pub merges: Vec<Merge>,
}

/// Run Ward-linkage agglomeration on a dissimilarity matrix.
pub fn hac_ward(matrix: &[Vec<f64>]) -> Result<Dendrogram> {
    let n = matrix.len();
    if n == 0 {
        return Err(Error::InvalidInput("empty dissimilarity matrix".into()));
    }
    for (i, row) in matrix.iter().enumerate() {
        if row.len() != n {
            return Err(Error::InvalidInput(format!(
                "row {i} has {} entries in a {n}x{n} matrix",
                row.len()
            )));
        }
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "dissimilarity [{i}][{j}] = {v} is not a finite non-negative number"
                )));
            }
            if matrix[j][i] != v {
                return Err(Error::InvalidInput(format!(
                    "matrix is not symmetric at [{i}][{j}]"
                )));
            }
        }
        if row[i] != 0.0 {
            return Err(Error::InvalidInput(format!(
                "diagonal entry [{i}][{i}] must be 0"
            )));
        }
    }

    // Active cluster bookkeeping, indexed by position in these vectors.
    let mut ids: Vec<usize> = (0..n).collect();
    let mut sizes: Vec<f64> = vec![1.0; n];
    let mut reps: Vec<usize> = (0..n).collect(); // smallest leaf underneath
    let mut dist: Vec<Vec<f64>> = matrix.to_vec();

    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for step in 0..n.saturating_sub(1) {
        let m = ids.len();
        let mut best: Option<(f64, (usize, usize), (usize, usize))> = None;
        for i in 0..m {
            for j in (i + 1)..m {
                let d = dist[i][j];
                let key = (ids[i].min(ids[j]), ids[i].max(ids[j]));
                let better = match &best {
                    None => true,
                    Some((bd, bkey, _)) => d < *bd || (d == *bd && key < *bkey),
                };
                if better {
                    best = Some((d, key, (i, j)));
                }
            }
        }
        let (height, _, (i, j)) = best.expect("at least one active pair");

        let new_id = n + step;
        let (sa, sb) = (sizes[i], sizes[j]);
        let dab = dist[i][j];
        // Ward update against every other active cluster.
        let mut new_row = Vec::with_capacity(m - 2);
        for x in 0..m {
            if x == i || x == j {
                continue;
            }
            let sx = sizes[x];
            let t = sa + sb + sx;
            new_row.push(((sa + sx) * dist[i][x] + (sb + sx) * dist[j][x] - sx * dab) / t);
        }

        // Order children so traversal visits the smaller original leaf first.
        let (child_a, child_b) = if reps[i] < reps[j] {
            (ids[i], ids[j])
        } else {
            (ids[j], ids[i])
        };
        merges.push(Merge {
            a: child_a,
            b: child_b,
            height,
            size: (sa + sb) as usize,
        });

        // Drop position j, then rewrite position i as the merged cluster.
        let (keep, drop) = (i, j);
        let merged_rep = reps[keep].min(reps[drop]);
        ids.remove(drop);
        sizes.remove(drop);
        reps.remove(drop);
        dist.remove(drop);
        for row in dist.iter_mut() {
            row.remove(drop);
        }
        ids[keep] = new_id;
        sizes[keep] = sa + sb;
        reps[keep] = merged_rep;
        let mut it = new_row.into_iter();
        for x in 0..ids.len() {
            if x == keep {
                dist[keep][keep] = 0.0;
                continue;
            }
            let v = it.next().expect("one entry per surviving cluster");
            dist[keep][x] = v;
            dist[x][keep] = v;
        }
    }

    Ok(Dendrogram { n, merges })
}

/// Assign leaves to clusters using only merges strictly below `threshold`.
/// Components are numbered 0.. in order of their smallest leaf.
pub fn cut_dendrogram(dendrogram: &Dendrogram, threshold: f64) -> Vec<usize> {
    let n = dendrogram.n;
    let mut parent: Vec<usize> = (0..(2 * n).saturating_sub(1)).collect();
    fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (step, m) in dendrogram.merges.iter().enumerate() {
        if m.height < threshold {
            let root = n + step;
            let ra = find(&mut parent, m.a);
            let rb = find(&mut parent, m.b);
            parent[ra] = root;
            parent[rb] = root;
        }
    }
    let mut label_of_root = std::collections::HashMap::new();
    let mut labels = Vec::with_capacity(n);
    for leaf in 0..n {
        let root = find(&mut parent, leaf);
        let next = label_of_root.len();
        labels.push(*label_of_root.entry(root).or_insert(next));
    }
    labels
}

/// Leaves in dendrogram display order: an in-order walk from the final
/// merge, visiting each merge's `a` child (smaller original leaf) first.
pub fn leaf_order(dendrogram: &Dendrogram) -> Vec<usize> {
    let n = dendrogram.n;
    if n == 0 {
        return Vec::new();
    }
    if dendrogram.merges.is_empty() {
        return (0..n).collect();
    }
    let mut order = Vec::with_capacity(n);
    let root = n + dendrogram.merges.len() - 1;
    let mut stack = vec![root];
    while let Some(node) = stack.pop() {
        if node < n {
            order.push(node);
        } else {
            let m = &dendrogram.merges[node - n];
            // Visit a before b: push b first.
            stack.push(m.b);
            stack.push(m.a);
        }
    }
    order
}
