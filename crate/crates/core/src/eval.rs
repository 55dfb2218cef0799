//! Embedding and denoising quality metrics.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{MultimodalSet, NoiseSpec};
use crate::denoise;
use crate::error::{Error, Result};
use crate::fusion::{FusionConfig, FusionContext, FusionStrategy};
use crate::matrix::DataMatrix;
use crate::operator::{self, Markov};
use crate::seed;

pub const DEFAULT_K: usize = 5;
pub const DEFAULT_TEST_FRACTION: f64 = 0.2;
pub const DEFAULT_BINS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    KnnAccuracy,
    Demap,
    MutualInformation,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::KnnAccuracy => "knn_accuracy",
            Metric::Demap => "demap",
            Metric::MutualInformation => "mutual_information",
        }
    }
}

/// Stratified split: per class, `round(fraction · size)` members (at least
/// one, at most size − 1) go to the test set. Returns `(train, test)` indices,
/// each sorted.
pub fn stratified_split(labels: &[i64], test_fraction: f64, seed_: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut classes: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        classes.entry(*l).or_default().push(i);
    }
    if classes.len() < 2 {
        return Err(Error::Validation("classification needs at least 2 classes".into()));
    }
    if let Some((l, _)) = classes.iter().find(|(_, m)| m.len() < 2) {
        return Err(Error::Validation(format!(
            "cannot stratify: class {l} has a single member"
        )));
    }
    let mut rng = seed::rng(seed::child(seed_, "knn-split"));
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for members in classes.values() {
        let mut m = members.clone();
        m.shuffle(&mut rng);
        let n_test = ((m.len() as f64 * test_fraction).round() as usize).clamp(1, m.len() - 1);
        test.extend_from_slice(&m[..n_test]);
        train.extend_from_slice(&m[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Majority vote over the `k` nearest training rows (distance ties go to the
/// lower training index). A tied vote goes to the label, among the tied ones,
/// of the nearest neighbor.
pub fn knn_predict(
    train: ArrayView2<'_, f64>,
    train_labels: &[i64],
    query: ArrayView2<'_, f64>,
    k: usize,
) -> Result<Vec<i64>> {
    if train.nrows() != train_labels.len() {
        return Err(Error::Dimension(format!(
            "{} training rows, {} labels",
            train.nrows(),
            train_labels.len()
        )));
    }
    if train.ncols() != query.ncols() {
        return Err(Error::Dimension(format!(
            "training has {} columns, query {}",
            train.ncols(),
            query.ncols()
        )));
    }
    if k == 0 || train.nrows() == 0 {
        return Err(Error::Validation("kNN needs k >= 1 and a nonempty training set".into()));
    }
    let k = k.min(train.nrows());
    Ok(crate::par::map_range(query.nrows(), |q| {
        let row = query.row(q);
        let mut d: Vec<(f64, usize)> = train
            .outer_iter()
            .enumerate()
            .map(|(i, t)| (sq_dist(row, t), i))
            .collect();
        d.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut near = d[..k].to_vec();
        near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut votes: BTreeMap<i64, usize> = BTreeMap::new();
        for (_, i) in &near {
            *votes.entry(train_labels[*i]).or_default() += 1;
        }
        let top = votes.values().copied().max().unwrap_or(0);
        near.iter()
            .map(|(_, i)| train_labels[*i])
            .find(|l| votes[l] == top)
            .expect("nonempty neighborhood")
    }))
}

/// Test accuracy of a kNN classifier on a stratified split of `points`.
pub fn knn_accuracy(points: ArrayView2<'_, f64>, labels: &[i64], k: usize, seed_: u64) -> Result<f64> {
    knn_accuracy_split(points, labels, k, DEFAULT_TEST_FRACTION, seed_)
}

pub fn knn_accuracy_split(
    points: ArrayView2<'_, f64>,
    labels: &[i64],
    k: usize,
    test_fraction: f64,
    seed_: u64,
) -> Result<f64> {
    if points.nrows() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} points, {} labels",
            points.nrows(),
            labels.len()
        )));
    }
    let (train, test) = stratified_split(labels, test_fraction, seed_)?;
    let tr = points.select(ndarray::Axis(0), &train);
    let te = points.select(ndarray::Axis(0), &test);
    let tr_labels: Vec<i64> = train.iter().map(|i| labels[*i]).collect();
    let pred = knn_predict(tr.view(), &tr_labels, te.view(), k)?;
    let correct = pred.iter().zip(&test).filter(|(p, i)| **p == labels[**i]).count();
    Ok(correct as f64 / test.len() as f64)
}

/// Average ranks (1-based), ties sharing the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|a, b| values[*a].total_cmp(&values[*b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for k in &idx[i..=j] {
            ranks[*k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::Dimension(format!(
            "spearman needs equal lengths >= 2, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    pearson(&average_ranks(a), &average_ranks(b))
        .ok_or_else(|| Error::Numerical("rank correlation undefined for a constant vector".into()))
}

/// Spearman correlation between upper-triangle geodesic distances and
/// Euclidean distances between embedded points.
pub fn demap(points: ArrayView2<'_, f64>, geodesics: &Array2<f64>) -> Result<f64> {
    let n = points.nrows();
    if geodesics.dim() != (n, n) {
        return Err(Error::Dimension(format!(
            "geodesic matrix is {:?} for {n} points",
            geodesics.dim()
        )));
    }
    for i in 0..n {
        if geodesics[[i, i]] != 0.0 {
            return Err(Error::Validation(format!("geodesic diagonal nonzero at {i}")));
        }
        for j in (i + 1)..n {
            if geodesics[[i, j]] != geodesics[[j, i]] {
                return Err(Error::Validation(format!("geodesics not symmetric at ({i}, {j})")));
            }
        }
    }
    let d = crate::linalg::squared_distances(points);
    let pairs = n * n.saturating_sub(1) / 2;
    let (mut g, mut e) = (Vec::with_capacity(pairs), Vec::with_capacity(pairs));
    for i in 0..n {
        for j in (i + 1)..n {
            g.push(geodesics[[i, j]]);
            e.push(d[[i, j]].sqrt());
        }
    }
    spearman(&g, &e)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiValue {
    pub value: f64,
    /// Set when an input had zero range; the value is then 0.
    pub degenerate: bool,
}

fn bin_indices(x: &[f64], bins: usize) -> Option<Vec<usize>> {
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return None;
    }
    let w = hi - lo;
    Some(
        x.iter()
            .map(|v| (((v - lo) / w * bins as f64) as usize).min(bins - 1))
            .collect(),
    )
}

/// Plug-in mutual information (nats) on equal-width bins over each input's
/// observed range. Terms are summed in sorted order, which makes the value
/// exactly symmetric in its arguments.
pub fn mutual_information(a: &[f64], b: &[f64], bins: usize) -> Result<MiValue> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!("lengths {} and {}", a.len(), b.len())));
    }
    if bins < 2 {
        return Err(Error::Validation("mutual information needs at least 2 bins".into()));
    }
    if a.len() < bins * bins {
        return Err(Error::Size {
            what: "mutual information needs at least bins^2 samples",
            got: a.len(),
            need: bins * bins,
        });
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Validation("mutual information inputs must be finite".into()));
    }
    let (Some(ia), Some(ib)) = (bin_indices(a, bins), bin_indices(b, bins)) else {
        return Ok(MiValue {
            value: 0.0,
            degenerate: true,
        });
    };
    let n = a.len() as u64;
    let mut joint = vec![0u64; bins * bins];
    let mut ca = vec![0u64; bins];
    let mut cb = vec![0u64; bins];
    for (x, y) in ia.iter().zip(&ib) {
        joint[x * bins + y] += 1;
        ca[*x] += 1;
        cb[*y] += 1;
    }
    let mut terms: Vec<f64> = Vec::new();
    for x in 0..bins {
        for y in 0..bins {
            let c = joint[x * bins + y];
            if c > 0 {
                let ratio = (c * n) as f64 / (ca[x] * cb[y]) as f64;
                terms.push(c as f64 / n as f64 * ratio.ln());
            }
        }
    }
    terms.sort_by(f64::total_cmp);
    Ok(MiValue {
        value: terms.iter().sum::<f64>().max(0.0),
        degenerate: false,
    })
}

/// How both modalities are smoothed before measuring recovered dependence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum DenoiseMethod {
    /// Observed data as is.
    None,
    /// Each modality by its own operator powered to its entropy elbow.
    ModalitySpecific,
    /// Both modalities by one fused operator.
    Fused(FusionStrategy),
}

impl DenoiseMethod {
    pub fn name(self) -> &'static str {
        match self {
            DenoiseMethod::None => "none",
            DenoiseMethod::ModalitySpecific => "modality_specific",
            DenoiseMethod::Fused(s) => s.name(),
        }
    }
}

impl fmt::Display for DenoiseMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DenoiseMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(DenoiseMethod::None),
            "modality_specific" => Ok(DenoiseMethod::ModalitySpecific),
            other => other.parse().map(DenoiseMethod::Fused),
        }
    }
}

impl From<DenoiseMethod> for String {
    fn from(m: DenoiseMethod) -> String {
        m.name().to_string()
    }
}

impl TryFrom<String> for DenoiseMethod {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Denoises both modalities of the context with `method`.
pub fn denoise_pair(ctx: &FusionContext, method: DenoiseMethod) -> Result<(DataMatrix, DataMatrix)> {
    match method {
        DenoiseMethod::None => Ok((ctx.data(0).clone(), ctx.data(1).clone())),
        DenoiseMethod::ModalitySpecific => {
            let one = |w: usize| -> Result<DataMatrix> {
                let m = ctx.raw(w)?;
                let t = m.elbow()?;
                let p = operator::power(&m.operator, t);
                denoise::apply_operator(&p, ctx.data(w), 1)
            };
            let (a, b) = crate::par::join(|| one(0), || one(1));
            Ok((a?, b?))
        }
        DenoiseMethod::Fused(s) => {
            let op = ctx.build(s)?;
            let (a, b) = crate::par::join(
                || denoise::apply_operator(&op, ctx.data(0), 1),
                || denoise::apply_operator(&op, ctx.data(1), 1),
            );
            Ok((a?, b?))
        }
    }
}

/// Mean MI over the first `pairs` columns of two aligned matrices, plus the
/// per-pair values.
pub fn paired_mi(a: &DataMatrix, b: &DataMatrix, pairs: usize, bins: usize) -> Result<(f64, Vec<f64>)> {
    a.check_aligned(b)?;
    if pairs == 0 || pairs > a.cols().min(b.cols()) {
        return Err(Error::Validation(format!(
            "{pairs} planted pairs for {} and {} columns",
            a.cols(),
            b.cols()
        )));
    }
    let per: Vec<f64> = (0..pairs)
        .map(|j| {
            let x = a.values().column(j).to_vec();
            let y = b.values().column(j).to_vec();
            mutual_information(&x, &y, bins).map(|m| m.value)
        })
        .collect::<Result<_>>()?;
    Ok((per.iter().sum::<f64>() / pairs as f64, per))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalEntry {
    pub strategy: String,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_feature: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub k: usize,
    pub test_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metric: Metric,
    pub entries: Vec<EvalEntry>,
    pub noise: Option<NoiseSpec>,
    pub seeds: Vec<u64>,
    pub split: Option<SplitSpec>,
    pub n_points: usize,
}

impl EvalReport {
    pub fn value(&self, strategy: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.strategy == strategy).map(|e| e.value)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Internal(e.to_string()))
    }
}

/// Mean MI over the planted pairs after denoising both modalities with each
/// method.
pub fn mi_recovery_benchmark(
    set: &MultimodalSet,
    methods: &[DenoiseMethod],
    cfg: &FusionConfig,
    bins: usize,
) -> Result<EvalReport> {
    set.validate()?;
    let ctx = FusionContext::new(set.modality1.clone(), set.modality2.clone(), *cfg)?;
    mi_recovery_with(&ctx, set, methods, bins)
}

/// As [`mi_recovery_benchmark`], reusing a context built on the set.
pub fn mi_recovery_with(
    ctx: &FusionContext,
    set: &MultimodalSet,
    methods: &[DenoiseMethod],
    bins: usize,
) -> Result<EvalReport> {
    let entries = methods
        .iter()
        .map(|m| {
            let (a, b) = denoise_pair(ctx, *m)?;
            let (mean, per) = paired_mi(&a, &b, set.planted_pairs, bins)?;
            Ok(EvalEntry {
                strategy: m.name().to_string(),
                value: mean,
                per_feature: Some(per),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport {
        metric: Metric::MutualInformation,
        entries,
        noise: Some(set.noise.clone()),
        seeds: vec![set.seed],
        split: None,
        n_points: set.len(),
    })
}

/// kNN accuracy of an operator's embedding or of any point matrix, packaged
/// as a single-entry report.
pub fn knn_report(
    name: &str,
    points: ArrayView2<'_, f64>,
    labels: &[i64],
    k: usize,
    seed_: u64,
) -> Result<EvalReport> {
    let value = knn_accuracy(points, labels, k, seed_)?;
    Ok(EvalReport {
        metric: Metric::KnnAccuracy,
        entries: vec![EvalEntry {
            strategy: name.to_string(),
            value,
            per_feature: None,
        }],
        noise: None,
        seeds: vec![seed_],
        split: Some(SplitSpec {
            k,
            test_fraction: DEFAULT_TEST_FRACTION,
        }),
        n_points: points.nrows(),
    })
}

/// Row-stochastic check used before evaluating arbitrary operators.
pub fn check_markov<M: Markov + ?Sized>(op: &M, tol: f64) -> Result<()> {
    let err = op.row_sum_error();
    if err > tol {
        return Err(Error::Numerical(format!("operator rows deviate from 1 by {err:e}")));
    }
    Ok(())
}
