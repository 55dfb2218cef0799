//! Diffusion-filter denoising, spectral clustering and recursive multiscale
//! graph denoising (MGD).
//!
//! MGD on a block of rows `X`:
//!
//! 1. if `|X| < tau` (or the depth cap is hit) return `X`;
//! 2. build `P` from `X` and smooth: `X̂ = P^t X`;
//! 3. split the rows into `c` spectral clusters of `P`;
//! 4. recurse on `X̂` restricted to each cluster, put the results back in
//!    the original row order;
//! 5. return `(X + reassembled) / 2`.
//!
//! Each level therefore contributes half the correction of the level above.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kmeans;
use crate::linalg;
use crate::matrix::DataMatrix;
use crate::operator::{self, Bandwidth, DiffusionOperator, Markov};
use crate::par;
use crate::seed;
use crate::spectral::EigenSystem;

const KMEANS_MAX_ITER: usize = 100;

/// `op^t · data`, computed as `t` successive applications.
pub fn apply_operator<M: Markov + ?Sized>(op: &M, data: &DataMatrix, t: u32) -> Result<DataMatrix> {
    let p = op.matrix();
    if p.nrows() != data.rows() {
        return Err(Error::Dimension(format!(
            "operator is {}x{}, data has {} rows",
            p.nrows(),
            p.ncols(),
            data.rows()
        )));
    }
    let mut x = data.values().clone();
    for _ in 0..t {
        x = linalg::matmul(p.view(), x.view());
    }
    data.with_values(x)
}

/// `X̂ = P^t X`.
pub fn diffusion_denoise(op: &DiffusionOperator, data: &DataMatrix, t: u32) -> Result<DataMatrix> {
    apply_operator(op, data, t)
}

/// A partition of `0..N` into disjoint non-empty groups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clustering {
    pub labels: Vec<usize>,
    pub groups: Vec<Vec<usize>>,
}

impl Clustering {
    fn from_labels(labels: Vec<usize>) -> Self {
        let k = labels.iter().max().map_or(0, |m| m + 1);
        let mut groups = vec![Vec::new(); k];
        for (i, l) in labels.iter().enumerate() {
            groups[*l].push(i);
        }
        groups.retain(|g| !g.is_empty());
        Self { labels, groups }
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }
}

/// Rows of the `c` leading nontrivial eigenvectors of the symmetric
/// conjugate, each row scaled to unit length (zero rows stay zero).
///
/// A degenerate `λ = 1` eigenspace (disconnected graph) has no preferred
/// basis, so all of it is kept once the stationary direction `√d` is
/// projected out, even when that exceeds `c` columns. Row distances then do
/// not depend on which basis the solver returned.
fn spectral_features(eig: &EigenSystem, c: usize) -> Array2<f64> {
    let n = eig.len();
    let cols = c.min(n.saturating_sub(1)).max(1);
    let v = &eig.ortho_vectors;
    let unit = eig
        .eigenvalues
        .iter()
        .take_while(|l| **l > 1.0 - 1e-8)
        .count()
        .max(1);
    let mut trivial = eig.sqrt_degrees.clone();
    let tn = trivial.dot(&trivial).sqrt();
    trivial /= tn;
    let mut basis = vec![trivial];
    for k in 0..unit {
        let mut w = v.column(k).to_owned();
        for b in &basis {
            let proj = w.dot(b);
            w.scaled_add(-proj, b);
        }
        let norm = w.dot(&w).sqrt();
        if norm > 1e-6 {
            basis.push(w / norm);
        }
    }
    let mut picked: Vec<Array1<f64>> = basis.into_iter().skip(1).collect();
    let keep = cols.max(picked.len());
    picked.extend((unit..n).map(|k| v.column(k).to_owned()));
    picked.truncate(keep);
    let mut f = Array2::<f64>::zeros((n, picked.len()));
    for (j, col) in picked.iter().enumerate() {
        f.column_mut(j).assign(col);
    }
    for mut row in f.axis_iter_mut(Axis(0)) {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-300 {
            row.mapv_inplace(|v| v / norm);
        }
    }
    f
}

/// Clusters rows visited in `order`, so the result depends on row content
/// rather than on row position.
fn cluster_in_order(features: ArrayView2<'_, f64>, c: usize, order: &[usize], seed: u64) -> Clustering {
    let n = features.nrows();
    if c >= n {
        return Clustering::from_labels((0..n).collect());
    }
    let ordered = features.select(Axis(0), order);
    let ordered_labels = kmeans::kmeans(ordered.view(), c, seed, KMEANS_MAX_ITER);
    let mut labels = vec![0; n];
    for (pos, &row) in order.iter().enumerate() {
        labels[row] = ordered_labels[pos];
    }
    Clustering::from_labels(kmeans::relabel_by_first_appearance(&labels))
}

/// Rows rounded to single precision. Recursive blocks are products whose
/// last bits depend on summation order; rounding keeps the content-derived
/// order and seed stable under row permutations.
fn quantized_rows(x: ArrayView2<'_, f64>) -> Vec<Vec<f64>> {
    x.outer_iter()
        .map(|r| r.iter().map(|v| f64::from(*v as f32)).collect())
        .collect()
}

/// Canonical row order by lexicographic row content.
fn content_order(rows: &[Vec<f64>]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| {
        rows[a]
            .iter()
            .zip(&rows[b])
            .map(|(p, q)| p.total_cmp(q))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    order
}

/// Spectral clustering of the walk `op` into `c` groups: seeded k-means++ and
/// Lloyd iterations on the unit-normalized rows of the `c` leading nontrivial
/// eigenvectors of the symmetric conjugate.
///
/// Points are visited in an order derived from their operator rows (sorted
/// transition probabilities) and the seed comes from the same content, so a
/// permuted input yields the permuted partition.
pub fn spectral_cluster(op: &DiffusionOperator, c: usize) -> Result<Clustering> {
    let n = op.len();
    if c < 2 {
        return Err(Error::Validation(format!("need at least 2 clusters, got {c}")));
    }
    if c > n {
        return Err(Error::Size {
            what: "cluster count exceeds points",
            got: c,
            need: n,
        });
    }
    let keys: Vec<Vec<f32>> = op
        .values()
        .outer_iter()
        .map(|r| {
            let mut v: Vec<f32> = r.iter().map(|x| *x as f32).collect();
            v.sort_by(|a, b| b.total_cmp(a));
            v
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        keys[a]
            .iter()
            .zip(&keys[b])
            .map(|(p, q)| p.total_cmp(q))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let key_rows: Vec<Vec<f64>> = keys
        .iter()
        .map(|k| k.iter().map(|v| f64::from(*v)).collect())
        .collect();
    let seed = seed::splitmix64(seed::row_set_hash(key_rows.iter().map(|r| r.as_slice())));
    let features = spectral_features(op.eigen()?, c);
    Ok(cluster_in_order(features.view(), c, &order, seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MgdConfig {
    /// Diffusion steps applied at every level.
    pub t: u32,
    /// Blocks with fewer rows are returned unchanged.
    pub tau: usize,
    /// Clusters per split.
    pub c: usize,
    /// Recursion depth cap; `1` means a single smoothing level.
    pub max_depth: usize,
    pub bandwidth: Bandwidth,
    /// Mixed into the content hash that seeds k-means.
    pub seed: u64,
}

impl Default for MgdConfig {
    fn default() -> Self {
        Self {
            t: 3,
            tau: 50,
            c: 2,
            max_depth: 4,
            bandwidth: Bandwidth::default(),
            seed: 0,
        }
    }
}

impl MgdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t == 0 {
            return Err(Error::Validation("mgd: t must be positive".into()));
        }
        if self.c < 2 {
            return Err(Error::Validation(format!(
                "mgd: need c >= 2 clusters per split, got {}",
                self.c
            )));
        }
        if self.tau < 2 || self.tau < self.c {
            return Err(Error::Validation(format!(
                "mgd: need tau >= max(2, c), got tau = {} with c = {}",
                self.tau, self.c
            )));
        }
        if self.max_depth == 0 {
            return Err(Error::Validation("mgd: max_depth must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-depth bookkeeping of one MGD run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LevelStats {
    pub depth: usize,
    /// Blocks smoothed at this depth.
    pub blocks: usize,
    pub rows: usize,
    /// Frobenius norm of `level_output - level_input`, over all blocks.
    pub correction_norm: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MgdReport {
    pub levels: Vec<LevelStats>,
    /// Blocks whose clustering put every row in one group; recursion stopped
    /// there and the smoothed block was used as is.
    pub degenerate_splits: usize,
}

impl MgdReport {
    fn merge(&mut self, other: MgdReport) {
        self.degenerate_splits += other.degenerate_splits;
        for l in other.levels {
            self.record(l.depth, l.blocks, l.rows, l.correction_norm * l.correction_norm);
        }
    }

    fn record(&mut self, depth: usize, blocks: usize, rows: usize, sq_norm: f64) {
        while self.levels.len() <= depth {
            let d = self.levels.len();
            self.levels.push(LevelStats {
                depth: d,
                ..Default::default()
            });
        }
        let l = &mut self.levels[depth];
        l.blocks += blocks;
        l.rows += rows;
        l.correction_norm = (l.correction_norm * l.correction_norm + sq_norm).sqrt();
    }
}

#[derive(Debug, Clone)]
pub struct MgdOutput {
    pub data: DataMatrix,
    pub report: MgdReport,
}

pub fn mgd(data: &DataMatrix, config: &MgdConfig) -> Result<MgdOutput> {
    config.validate()?;
    let (values, report) = mgd_block(data.values().clone(), 0, config)?;
    Ok(MgdOutput {
        data: data.with_values(values)?,
        report,
    })
}

fn mgd_block(x: Array2<f64>, depth: usize, cfg: &MgdConfig) -> Result<(Array2<f64>, MgdReport)> {
    let n = x.nrows();
    let mut report = MgdReport::default();
    if n < cfg.tau || depth >= cfg.max_depth {
        return Ok((x, report));
    }
    let block = DataMatrix::new(x)?;
    let kernel = operator::gaussian_kernel(&block, cfg.bandwidth)?;
    let op = operator::diffusion_operator(&kernel)?;
    let smoothed = diffusion_denoise(&op, &block, cfg.t)?.into_values();

    let keys = quantized_rows(block.view());
    let order = content_order(&keys);
    let seed = seed::splitmix64(
        seed::row_set_hash(keys.iter().map(|r| r.as_slice())) ^ seed::splitmix64(cfg.seed),
    );
    let features = spectral_features(op.eigen()?, cfg.c);
    let clusters = cluster_in_order(features.view(), cfg.c, &order, seed);

    let reassembled = if clusters.len() <= 1 {
        log::warn!("mgd: degenerate split of {n} rows at depth {depth}");
        report.degenerate_splits += 1;
        smoothed
    } else {
        let pieces = par::map_slice(&clusters.groups, |idx| {
            let sub = smoothed.select(Axis(0), idx);
            mgd_block(sub, depth + 1, cfg)
        });
        let mut out = Array2::<f64>::zeros(smoothed.raw_dim());
        for (idx, piece) in clusters.groups.iter().zip(pieces) {
            let (values, sub_report) = piece?;
            for (k, &row) in idx.iter().enumerate() {
                out.row_mut(row).assign(&values.row(k));
            }
            report.merge(sub_report);
        }
        out
    };

    let x = block.into_values();
    let result = (&x + &reassembled) * 0.5;
    let sq: f64 = result
        .iter()
        .zip(x.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    report.record(depth, 1, n, sq);
    Ok((result, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand_distr::{Distribution, Normal};

    fn blobs(per: usize, spacing: f64, sd: f64, seed_: u64) -> (DataMatrix, Vec<usize>) {
        let mut rng = seed::rng(seed_);
        let normal = Normal::new(0.0, sd).unwrap();
        let mut v = Array2::zeros((2 * per, 3));
        let mut labels = Vec::new();
        for i in 0..2 * per {
            let b = i / per;
            labels.push(b);
            for j in 0..3 {
                v[[i, j]] = if j == 0 { b as f64 * spacing } else { 0.0 } + normal.sample(&mut rng);
            }
        }
        (DataMatrix::new(v).unwrap(), labels)
    }

    fn op_of(x: &DataMatrix) -> DiffusionOperator {
        let k = operator::gaussian_kernel(x, Bandwidth::default()).unwrap();
        operator::diffusion_operator(&k).unwrap()
    }

    #[test]
    fn identity_operator_leaves_data() {
        let k = operator::Kernel::from_values(Array2::eye(3), 1.0).unwrap();
        let p = operator::diffusion_operator(&k).unwrap();
        let x = DataMatrix::new(array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]).unwrap();
        assert_eq!(diffusion_denoise(&p, &x, 4).unwrap(), x);
    }

    #[test]
    fn two_point_smoothing() {
        let k = operator::Kernel::from_values(array![[1.0, 0.5], [0.5, 1.0]], 1.0).unwrap();
        let p = operator::diffusion_operator(&k).unwrap();
        let x = DataMatrix::new(array![[0.0], [3.0]]).unwrap();
        let y = diffusion_denoise(&p, &x, 1).unwrap();
        assert!((y.values()[[0, 0]] - 1.0).abs() < 1e-15);
        assert!((y.values()[[1, 0]] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn clusters_recover_blobs() {
        let (x, labels) = blobs(30, 50.0, 1.0, 3);
        let cl = spectral_cluster(&op_of(&x), 2).unwrap();
        assert_eq!(cl.len(), 2);
        for g in &cl.groups {
            let b = labels[g[0]];
            assert!(g.iter().all(|&i| labels[i] == b));
        }
    }

    #[test]
    fn one_cluster_per_point_when_c_equals_n() {
        let x = DataMatrix::new(array![[0.0], [1.0], [3.0], [7.0]]).unwrap();
        let cl = spectral_cluster(&op_of(&x), 4).unwrap();
        assert_eq!(cl.len(), 4);
    }

    #[test]
    fn duplicate_rows_share_a_cluster() {
        let (x, _) = blobs(20, 10.0, 2.0, 5);
        let mut v = x.values().clone();
        let r = v.row(3).to_owned();
        v.row_mut(25).assign(&r);
        let x = DataMatrix::new(v).unwrap();
        let cl = spectral_cluster(&op_of(&x), 3).unwrap();
        assert_eq!(cl.labels[3], cl.labels[25]);
    }

    #[test]
    fn cluster_count_validation() {
        let x = DataMatrix::new(array![[0.0], [1.0], [3.0]]).unwrap();
        let op = op_of(&x);
        assert!(matches!(spectral_cluster(&op, 4), Err(Error::Size { .. })));
        assert!(spectral_cluster(&op, 1).is_err());
    }

    #[test]
    fn config_validation() {
        let ok = MgdConfig::default();
        assert!(ok.validate().is_ok());
        assert!(MgdConfig { c: 1, ..ok }.validate().is_err());
        assert!(MgdConfig { tau: 1, c: 2, ..ok }.validate().is_err());
        assert!(MgdConfig { tau: 3, c: 4, ..ok }.validate().is_err());
        assert!(MgdConfig { max_depth: 0, ..ok }.validate().is_err());
        assert!(MgdConfig { t: 0, ..ok }.validate().is_err());
    }

    #[test]
    fn small_input_is_returned_unchanged() {
        let (x, _) = blobs(10, 5.0, 1.0, 1);
        let cfg = MgdConfig {
            tau: 21,
            ..Default::default()
        };
        let out = mgd(&x, &cfg).unwrap();
        assert_eq!(out.data, x);
        assert!(out.report.levels.is_empty());
    }

    #[test]
    fn corrections_shrink_with_depth() {
        let (x, _) = blobs(60, 8.0, 1.5, 11);
        let cfg = MgdConfig {
            tau: 10,
            ..Default::default()
        };
        let out = mgd(&x, &cfg).unwrap();
        assert_eq!(out.data.row_ids(), x.row_ids());
        let levels = &out.report.levels;
        assert!(levels.len() >= 2);
        assert_eq!(levels[0].blocks, 1);
        assert_eq!(levels[0].rows, 120);
    }
}
