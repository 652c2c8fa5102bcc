//! Lloyd's k-means with seeded restarts.
//!
//! Points are assigned to the nearest centroid by squared Euclidean
//! distance (ties resolve to the lowest cluster index), centroids move to
//! the arithmetic mean of their members, and the loop stops once an
//! assignment pass changes nothing or 300 update cycles have run. Each
//! restart seeds its own generator from the caller's seed, so results are a
//! pure function of `(points, k, seed, restarts)` regardless of thread
//! count: restarts run in parallel and the winner is picked by lowest SSE
//! with the earliest restart breaking ties.
//!
//! Initial centroids are sampled with distance-squared weighting: the first
//! is uniform, each further one prefers points far from everything chosen
//! so far. Plain uniform sampling was tried first and rarely lands one seed
//! per well-separated group at realistic k, which made best-of-20 restarts
//! unable to recover planted structure reliably.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{sqdist, FeatureVector};
use crate::error::{Error, Result};
use crate::seeds;

pub const MAX_ITERATIONS: usize = 300;

#[derive(Debug, Clone)]
pub struct KMeansResult {
    /// Cluster index (0-based) per input point, in input order.
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Sum of squared distances from each point to its centroid.
    pub sse: f64,
    /// Update cycles run by the winning restart.
    pub iterations: usize,
    pub seed: u64,
    /// SSE after the initial assignment and after each update cycle of the
    /// winning restart; non-increasing by construction.
    pub sse_history: Vec<f64>,
}

pub fn kmeans(
    points: &[FeatureVector],
    k: usize,
    seed: u64,
    restarts: usize,
) -> Result<KMeansResult> {
    if points.is_empty() {
        return Err(Error::InvalidInput("kmeans needs at least one point".into()));
    }
    if k == 0 {
        return Err(Error::InvalidInput("kmeans needs k >= 1".into()));
    }
    if restarts == 0 {
        return Err(Error::InvalidInput("kmeans needs at least one restart".into()));
    }
    let d = points[0].dim();
    if points.iter().any(|p| p.dim() != d) {
        return Err(Error::InvalidInput("points have mixed dimensions".into()));
    }
    let distinct = count_distinct(points);
    if k > distinct {
        return Err(Error::Infeasible(format!(
            "k = {k} exceeds the {distinct} distinct points"
        )));
    }

    let n = points.len();
    let mut data = Vec::with_capacity(n * d);
    for p in points {
        data.extend_from_slice(p.as_slice());
    }

    let runs: Vec<Run> = (0..restarts)
        .into_par_iter()
        .map(|r| run_once(&data, n, d, k, seeds::mix(&[seed, r as u64])))
        .collect();
    let best = runs
        .into_iter()
        .min_by(|a, b| a.sse.partial_cmp(&b.sse).expect("SSE is finite"))
        .expect("at least one restart");

    let centroids = best
        .centroids
        .chunks(d)
        .map(|c| c.to_vec())
        .collect::<Vec<_>>();
    debug_assert!((0..k).all(|c| best.assignments.contains(&c)));
    Ok(KMeansResult {
        assignments: best.assignments,
        centroids,
        sse: best.sse,
        iterations: best.iterations,
        seed,
        sse_history: best.sse_history,
    })
}

struct Run {
    assignments: Vec<usize>,
    centroids: Vec<f64>,
    sse: f64,
    iterations: usize,
    sse_history: Vec<f64>,
}

fn run_once(data: &[f64], n: usize, d: usize, k: usize, seed: u64) -> Run {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = init_centroids(data, n, d, k, &mut rng);

    let (mut assignments, mut sse) = assign(data, n, d, k, &centroids);
    let mut sse_history = vec![sse];
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        update_centroids(data, n, d, k, &assignments, &mut centroids);
        let (next, next_sse) = assign(data, n, d, k, &centroids);
        iterations += 1;
        debug_assert!(next_sse <= sse + sse.abs() * 1e-12 + 1e-9);
        let converged = next == assignments;
        assignments = next;
        sse = next_sse;
        sse_history.push(sse);
        if converged {
            break;
        }
    }
    Run {
        assignments,
        centroids,
        sse,
        iterations,
        sse_history,
    }
}

/// Distance-squared weighted sampling of k distinct starting points.
fn init_centroids(data: &[f64], n: usize, d: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let point = |i: usize| &data[i * d..(i + 1) * d];
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.gen_range(0..n));
    let mut weight: Vec<f64> = (0..n).map(|i| sqdist(point(i), point(chosen[0]))).collect();

    while chosen.len() < k {
        let total: f64 = weight.iter().sum();
        let next = if total > 0.0 {
            let r = rng.gen::<f64>() * total;
            let mut cum = 0.0;
            let mut pick = None;
            for (i, w) in weight.iter().enumerate() {
                cum += w;
                if cum > r {
                    pick = Some(i);
                    break;
                }
            }
            // Float slop can leave r at the very top of the range; fall back
            // to the last point with any weight.
            pick.unwrap_or_else(|| {
                weight
                    .iter()
                    .rposition(|&w| w > 0.0)
                    .expect("total weight is positive")
            })
        } else {
            // All remaining points coincide with chosen ones except for
            // duplicates; the caller guaranteed k distinct points exist, so
            // scan for the lowest-index point unlike every chosen one.
            (0..n)
                .find(|&i| chosen.iter().all(|&c| point(c) != point(i)))
                .expect("k distinct points exist")
        };
        chosen.push(next);
        for i in 0..n {
            let w = sqdist(point(i), point(next));
            if w < weight[i] {
                weight[i] = w;
            }
        }
    }

    let mut centroids = Vec::with_capacity(k * d);
    for &c in &chosen {
        centroids.extend_from_slice(point(c));
    }
    centroids
}

/// One assignment pass: nearest centroid per point (lowest index on ties)
/// plus the resulting SSE, accumulated in point order.
pub(crate) fn assign(
    data: &[f64],
    n: usize,
    d: usize,
    k: usize,
    centroids: &[f64],
) -> (Vec<usize>, f64) {
    let mut assignments = Vec::with_capacity(n);
    let mut sse = 0.0;
    for i in 0..n {
        let p = &data[i * d..(i + 1) * d];
        let mut best = 0;
        let mut best_d = sqdist(p, &centroids[0..d]);
        for j in 1..k {
            let dj = sqdist(p, &centroids[j * d..(j + 1) * d]);
            if dj < best_d {
                best = j;
                best_d = dj;
            }
        }
        assignments.push(best);
        sse += best_d;
    }
    (assignments, sse)
}

/// Move each centroid to the mean of its members. A cluster that lost all
/// members is restarted on the point farthest from its stale centroid
/// (lowest index on ties, never reusing a point within one repair round).
pub(crate) fn update_centroids(
    data: &[f64],
    n: usize,
    d: usize,
    k: usize,
    assignments: &[usize],
    centroids: &mut [f64],
) {
    let mut sums = vec![0.0f64; k * d];
    let mut counts = vec![0usize; k];
    for i in 0..n {
        let c = assignments[i];
        counts[c] += 1;
        let p = &data[i * d..(i + 1) * d];
        for (s, v) in sums[c * d..(c + 1) * d].iter_mut().zip(p) {
            *s += v;
        }
    }
    let mut repaired: Vec<usize> = Vec::new();
    for c in 0..k {
        if counts[c] > 0 {
            for j in 0..d {
                centroids[c * d + j] = sums[c * d + j] / counts[c] as f64;
            }
        } else {
            let stale = centroids[c * d..(c + 1) * d].to_vec();
            let mut far = None;
            let mut far_d = -1.0;
            for i in 0..n {
                if repaired.contains(&i) {
                    continue;
                }
                let dist = sqdist(&data[i * d..(i + 1) * d], &stale);
                if dist > far_d {
                    far = Some(i);
                    far_d = dist;
                }
            }
            let i = far.expect("at least one point");
            repaired.push(i);
            centroids[c * d..(c + 1) * d].copy_from_slice(&data[i * d..(i + 1) * d]);
        }
    }
}

fn count_distinct(points: &[FeatureVector]) -> usize {
    let mut seen = std::collections::HashSet::new();
    for p in points {
        let bits: Vec<u64> = p.as_slice().iter().map(|v| v.to_bits()).collect();
        seen.insert(bits);
    }
    seen.len()
}

/// SSE as a function of k over an inclusive range, for elbow inspection.
/// The curve should fall as k grows; any k where it rises is flagged.
#[derive(Debug, Clone)]
pub struct SseCurve {
    pub values: Vec<(usize, f64)>,
    pub violations: Vec<usize>,
}

pub fn sse_curve(
    points: &[FeatureVector],
    k_min: usize,
    k_max: usize,
    seed: u64,
    restarts: usize,
) -> Result<SseCurve> {
    if k_min == 0 || k_min > k_max {
        return Err(Error::InvalidInput(format!(
            "bad k range {k_min}..={k_max}"
        )));
    }
    let mut values = Vec::new();
    let mut violations = Vec::new();
    for k in k_min..=k_max {
        let res = kmeans(points, k, seeds::mix(&[seed, k as u64]), restarts)?;
        if let Some(&(_, prev)) = values.last() {
            if res.sse > prev {
                violations.push(k);
            }
        }
        values.push((k, res.sse));
    }
    Ok(SseCurve { values, violations })
}
