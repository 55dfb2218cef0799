//! Seeded Lloyd k-means with k-means++ initialization.

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Labels in `0..k'` with `k' <= k`; fewer clusters come back when the points
/// have fewer than `k` distinct positions. Labels are numbered by first
/// appearance in row order. Distance ties go to the lower center index.
pub fn kmeans(points: ArrayView2<'_, f64>, k: usize, seed: u64, max_iter: usize) -> Vec<usize> {
    let n = points.nrows();
    if n == 0 || k == 0 {
        return vec![0; n];
    }
    let rows: Vec<Vec<f64>> = points.outer_iter().map(|r| r.to_vec()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // k-means++
    let mut centers: Vec<Vec<f64>> = vec![rows[rng.random_range(0..n)].clone()];
    let mut nearest: Vec<f64> = rows.iter().map(|r| sq_dist(r, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = nearest.iter().sum();
        if !(total > 0.0) {
            break;
        }
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = n - 1;
        for (i, d) in nearest.iter().enumerate() {
            acc += d;
            if acc > target && *d > 0.0 {
                pick = i;
                break;
            }
        }
        if nearest[pick] == 0.0 {
            // landed on the tail through round-off; take the last positive one
            pick = nearest.iter().rposition(|d| *d > 0.0).unwrap_or(pick);
        }
        centers.push(rows[pick].clone());
        for (i, r) in rows.iter().enumerate() {
            let d = sq_dist(r, centers.last().unwrap());
            if d < nearest[i] {
                nearest[i] = d;
            }
        }
    }

    let kk = centers.len();
    let dim = points.ncols();
    let mut labels = vec![usize::MAX; n];
    for _ in 0..max_iter.max(1) {
        let mut changed = false;
        for (i, r) in rows.iter().enumerate() {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, ctr) in centers.iter().enumerate() {
                let d = sq_dist(r, ctr);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = Array2::<f64>::zeros((kk, dim));
        let mut counts = vec![0usize; kk];
        for (i, r) in rows.iter().enumerate() {
            counts[labels[i]] += 1;
            for (j, v) in r.iter().enumerate() {
                sums[[labels[i], j]] += v;
            }
        }
        for c in 0..kk {
            // an emptied cluster keeps its previous center
            if counts[c] > 0 {
                for j in 0..dim {
                    centers[c][j] = sums[[c, j]] / counts[c] as f64;
                }
            }
        }
    }
    relabel_by_first_appearance(&labels)
}

pub(crate) fn relabel_by_first_appearance(labels: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(*l).or_insert(next)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn separates_two_groups() {
        let p = array![[0.0, 0.0], [0.1, 0.0], [0.0, 0.1], [10.0, 10.0], [10.1, 10.0]];
        let l = kmeans(p.view(), 2, 7, 100);
        assert_eq!(l, vec![0, 0, 0, 1, 1]);
    }

    #[test]
    fn fewer_distinct_points_than_k() {
        let p = array![[1.0], [1.0], [1.0]];
        assert_eq!(kmeans(p.view(), 3, 1, 100), vec![0, 0, 0]);
    }

    #[test]
    fn seeded_is_deterministic() {
        let p = Array2::from_shape_fn((50, 3), |(i, j)| ((i * 31 + j * 17) % 23) as f64);
        assert_eq!(kmeans(p.view(), 4, 99, 100), kmeans(p.view(), 4, 99, 100));
    }
}
