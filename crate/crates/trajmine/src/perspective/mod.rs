//! The three mining perspectives over building-level day trajectories:
//! by time (how a building's days cluster), by person (how device days
//! cluster into visit patterns), and by location (how crowds flow between
//! buildings inside fixed time windows).

pub mod location;
pub mod person;
pub mod time;

/// Relabel raw k-means cluster indices canonically by descending cluster
/// size, mapping to 1-based labels so that label 1 is always the largest
/// cluster. Size ties go to the cluster whose first member appears earliest
/// in the input, so the labeling depends only on the partition itself, not
/// on the arbitrary cluster ids a particular seed produced. Returns the
/// relabeled assignments and the per-label sizes.
pub fn relabel_by_size(assignments: &[usize], k: usize) -> (Vec<usize>, Vec<usize>) {
    let mut sizes = vec![0usize; k];
    let mut first_member = vec![usize::MAX; k];
    for (i, &a) in assignments.iter().enumerate() {
        sizes[a] += 1;
        if first_member[a] == usize::MAX {
            first_member[a] = i;
        }
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by_key(|&c| (std::cmp::Reverse(sizes[c]), first_member[c]));
    let mut label_of = vec![0usize; k];
    for (rank, &c) in order.iter().enumerate() {
        label_of[c] = rank + 1;
    }
    let relabeled = assignments.iter().map(|&a| label_of[a]).collect();
    let sorted_sizes = order.iter().map(|&c| sizes[c]).collect();
    (relabeled, sorted_sizes)
}

/// Overlap length of `[s, e)` with `[lo, hi)`.
pub(crate) fn overlap(s: i64, e: i64, lo: i64, hi: i64) -> i64 {
    (e.min(hi) - s.max(lo)).max(0)
}
