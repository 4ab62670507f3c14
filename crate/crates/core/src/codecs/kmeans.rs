//! Lloyd's k-means with k-means++ seeding, used to train PQ sub-codebooks.

use rand::Rng;
use rayon::prelude::*;

use crate::seed::rng;
use crate::types::sq_l2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansParams {
    pub max_iter: usize,
    /// Stop when `(prev - cur) / prev` drops below this.
    pub rel_tol: f64,
}

impl Default for KMeansParams {
    fn default() -> Self {
        Self {
            max_iter: 50,
            rel_tol: 1e-5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KMeans {
    /// `k × dim`, row-major.
    pub centroids: Vec<f64>,
    pub dim: usize,
    pub k: usize,
    pub assignments: Vec<usize>,
    /// Sum of squared distances after seeding and after every iteration.
    pub objective_history: Vec<f64>,
}

impl KMeans {
    pub fn centroid(&self, c: usize) -> &[f64] {
        &self.centroids[c * self.dim..(c + 1) * self.dim]
    }

    pub fn objective(&self) -> f64 {
        *self.objective_history.last().unwrap()
    }
}

/// Nearest centroid in squared L2, lowest index on ties.
#[inline]
pub fn nearest(centroids: &[f64], dim: usize, x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.chunks_exact(dim).enumerate() {
        let d = sq_l2(centroid, x);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Clusters the rows of `data` (row-major, `dim` columns) into `k` groups.
///
/// Requires `k >= 1` and at least `k` rows.
pub fn kmeans(data: &[f64], dim: usize, k: usize, seed: u64, params: KMeansParams) -> KMeans {
    let n = data.len() / dim;
    assert!(k >= 1 && n >= k, "k-means needs 1 <= k <= n (k={k}, n={n})");
    let row = |i: usize| &data[i * dim..(i + 1) * dim];

    let mut centroids = seed_plus_plus(data, dim, k, seed);
    let (mut assignments, mut dists) = assign(data, dim, &centroids);
    let mut objective: f64 = dists.iter().sum();
    let mut history = vec![objective];

    for _ in 0..params.max_iter {
        // centroid update, accumulated in point-index order
        let mut sums = vec![0.0; k * dim];
        let mut counts = vec![0usize; k];
        for i in 0..n {
            let c = assignments[i];
            counts[c] += 1;
            for (s, v) in sums[c * dim..(c + 1) * dim].iter_mut().zip(row(i)) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                for (dst, s) in centroids[c * dim..(c + 1) * dim]
                    .iter_mut()
                    .zip(&sums[c * dim..(c + 1) * dim])
                {
                    *dst = s * inv;
                }
            }
        }
        // empty clusters take the point farthest from its own centroid
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let (far, _) = (0..n)
                .map(|i| (i, sq_l2(row(i), &centroids[assignments[i] * dim..][..dim])))
                .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
            centroids[c * dim..(c + 1) * dim].copy_from_slice(row(far));
            counts[assignments[far]] -= 1;
            assignments[far] = c;
            counts[c] = 1;
        }

        let (new_assign, new_dists) = assign(data, dim, &centroids);
        let new_objective: f64 = new_dists.iter().sum();
        assignments = new_assign;
        dists = new_dists;
        history.push(new_objective);
        let improvement = objective - new_objective;
        let converged = objective <= 0.0 || improvement / objective < params.rel_tol;
        objective = new_objective;
        if converged {
            break;
        }
    }
    debug_assert_eq!(dists.len(), n);

    KMeans {
        centroids,
        dim,
        k,
        assignments,
        objective_history: history,
    }
}

fn assign(data: &[f64], dim: usize, centroids: &[f64]) -> (Vec<usize>, Vec<f64>) {
    data.par_chunks_exact(dim)
        .map(|x| nearest(centroids, dim, x))
        .unzip()
}

fn seed_plus_plus(data: &[f64], dim: usize, k: usize, seed: u64) -> Vec<f64> {
    let n = data.len() / dim;
    let row = |i: usize| &data[i * dim..(i + 1) * dim];
    let mut rng = rng(seed);
    let mut chosen = Vec::with_capacity(k);
    let mut is_chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen.push(first);
    is_chosen[first] = true;
    let mut d2: Vec<f64> = (0..n).map(|i| sq_l2(row(i), row(first))).collect();

    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                if target < w {
                    pick = Some(i);
                    break;
                }
                target -= w;
            }
            // rounding can leave the target just past the last positive weight
            pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).unwrap())
        } else {
            // fewer distinct points than k: take any unused point
            let free: Vec<usize> = (0..n).filter(|&i| !is_chosen[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(next);
        is_chosen[next] = true;
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_l2(row(i), row(next)));
        }
    }

    let mut centroids = Vec::with_capacity(k * dim);
    for &i in &chosen {
        centroids.extend_from_slice(row(i));
    }
    centroids
}
