//! Seeded synthetic generators.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{MultimodalSet, NoiseSpec};
use crate::error::{Error, Result};
use crate::matrix::DataMatrix;
use crate::seed;

fn gaussian_noise(shape: (usize, usize), sd: f64, seed_: u64) -> Array2<f64> {
    let mut rng = seed::rng(seed_);
    Array2::from_shape_simple_fn(shape, || {
        let z: f64 = StandardNormal.sample(&mut rng);
        z * sd
    })
}

fn check_nu(nu: f64, what: &str) -> Result<()> {
    if !(nu >= 0.0) || !nu.is_finite() {
        return Err(Error::Validation(format!("{what} must be a finite value >= 0, got {nu}")));
    }
    Ok(())
}

/// Two views of `base` with independent Gaussian noise of standard deviation
/// `nu1` and `nu2`. Labels default to zeros.
pub fn make_noisy_pair(base: &DataMatrix, nu1: f64, nu2: f64, seed_: u64) -> Result<MultimodalSet> {
    check_nu(nu1, "nu1")?;
    check_nu(nu2, "nu2")?;
    let shape = base.values().dim();
    let m1 = base.values() + &gaussian_noise(shape, nu1, seed::child(seed_, "noise/modality1"));
    let m2 = base.values() + &gaussian_noise(shape, nu2, seed::child(seed_, "noise/modality2"));
    Ok(MultimodalSet {
        modality1: base.with_values(m1)?,
        modality2: base.with_values(m2)?,
        labels: vec![0; base.rows()],
        ground_truth: Some(base.clone()),
        ground_truth2: None,
        geodesics: None,
        planted_pairs: 0,
        noise: NoiseSpec::Global { nu1, nu2 },
        seed: seed_,
    })
}

/// Haar-distributed orthogonal matrix (Gram–Schmidt on a Gaussian matrix).
pub fn random_orthogonal(d: usize, seed_: u64) -> Array2<f64> {
    let g = gaussian_noise((d, d), 1.0, seed_);
    let mut q = Array2::<f64>::zeros((d, d));
    for j in 0..d {
        let mut v = g.column(j).to_owned();
        // two passes keep the basis orthogonal to working precision
        for _ in 0..2 {
            for k in 0..j {
                let qk = q.column(k);
                let proj = v.dot(&qk);
                v.scaled_add(-proj, &qk);
            }
        }
        let norm = v.dot(&v).sqrt();
        q.column_mut(j).assign(&(v / norm));
    }
    q
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeSpec {
    pub branches: usize,
    pub points_per_branch: usize,
    pub ambient_dim: usize,
    /// Gaussian noise level per branch; must have `branches` entries.
    pub branch_noise: Vec<f64>,
    pub branch_length: f64,
    pub seed: u64,
}

impl Default for TreeSpec {
    fn default() -> Self {
        Self {
            branches: 5,
            points_per_branch: 100,
            ambient_dim: 60,
            branch_noise: vec![0.0; 5],
            branch_length: 20.0,
            seed: 0,
        }
    }
}

impl TreeSpec {
    pub fn validate(&self) -> Result<()> {
        if self.branches < 1 {
            return Err(Error::Validation("tree needs at least one branch".into()));
        }
        if self.ambient_dim < 2 {
            return Err(Error::Validation("tree ambient dimension must be >= 2".into()));
        }
        if self.points_per_branch < 1 {
            return Err(Error::Validation("tree needs at least one point per branch".into()));
        }
        if self.branch_noise.len() != self.branches {
            return Err(Error::Validation(format!(
                "{} noise levels for {} branches",
                self.branch_noise.len(),
                self.branches
            )));
        }
        for nu in &self.branch_noise {
            check_nu(*nu, "branch noise")?;
        }
        if !(self.branch_length > 0.0) || !self.branch_length.is_finite() {
            return Err(Error::Validation("branch length must be positive".into()));
        }
        Ok(())
    }
}

struct Branch {
    parent: Option<usize>,
    /// Position along the parent where this branch starts.
    attach: f64,
}

/// Path length along the tree between `(b1, s1)` and `(b2, s2)`, where `s` is
/// the distance from a branch's start.
fn tree_distance(branches: &[Branch], (b1, s1): (usize, f64), (b2, s2): (usize, f64)) -> f64 {
    // climb from point 1 recording (branch, cost so far, position on branch)
    let mut chain = Vec::new();
    let (mut b, mut s, mut cost) = (b1, s1, 0.0);
    loop {
        chain.push((b, cost, s));
        match branches[b].parent {
            Some(p) => {
                cost += s;
                s = branches[b].attach;
                b = p;
            }
            None => break,
        }
    }
    let (mut b, mut s, mut cost) = (b2, s2, 0.0);
    loop {
        if let Some(&(_, c1, p1)) = chain.iter().find(|(cb, _, _)| *cb == b) {
            return c1 + cost + (p1 - s).abs();
        }
        let p = branches[b].parent.expect("root is on every chain");
        cost += s;
        s = branches[b].attach;
        b = p;
    }
}

/// Branching tree of straight segments, observed through two random
/// rotations with per-branch Gaussian noise. Also returns the exact geodesic
/// distances of the noiseless points.
pub fn make_tree(spec: &TreeSpec) -> Result<MultimodalSet> {
    spec.validate()?;
    let (nb, d, ppb, len) = (spec.branches, spec.ambient_dim, spec.points_per_branch, spec.branch_length);
    let mut rng = seed::rng(seed::child(spec.seed, "tree/layout"));
    let mut dirs = gaussian_noise((nb, d), 1.0, seed::child(spec.seed, "tree/directions"));
    for mut row in dirs.axis_iter_mut(Axis(0)) {
        let n = row.dot(&row).sqrt();
        row /= n;
    }
    let mut starts = Array2::<f64>::zeros((nb, d));
    let mut branches = vec![Branch { parent: None, attach: 0.0 }];
    for b in 1..nb {
        let parent = rng.random_range(0..b);
        let attach = rng.random_range(0.0..len);
        let start = &starts.row(parent) + &(&dirs.row(parent) * attach);
        starts.row_mut(b).assign(&start);
        branches.push(Branch { parent: Some(parent), attach });
    }
    let n = nb * ppb;
    let mut pos = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut clean = Array2::<f64>::zeros((n, d));
    for b in 0..nb {
        for _ in 0..ppb {
            let s = rng.random_range(0.0..len);
            let i = pos.len();
            clean.row_mut(i).assign(&(&starts.row(b) + &(&dirs.row(b) * s)));
            pos.push((b, s));
            labels.push(b as i64);
        }
    }

    let geo_rows = crate::par::map_range(n, |i| {
        (0..n).map(|j| tree_distance(&branches, pos[i], pos[j])).collect::<Vec<f64>>()
    });
    let mut geodesics = Array2::<f64>::zeros((n, n));
    for (i, row) in geo_rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            geodesics[[i, j]] = v;
        }
    }
    // exact symmetry regardless of climb order
    for i in 0..n {
        geodesics[[i, i]] = 0.0;
        for j in (i + 1)..n {
            let v = geodesics[[i, j]];
            geodesics[[j, i]] = v;
        }
    }

    let noise_sd = Array1::from_iter(labels.iter().map(|b| spec.branch_noise[*b as usize]));
    let view = |k: u64| -> Array2<f64> {
        let q = random_orthogonal(d, seed::child_indexed(spec.seed, "tree/rotation", k));
        let mut x = crate::linalg::matmul(clean.view(), q.view());
        let z = gaussian_noise((n, d), 1.0, seed::child_indexed(spec.seed, "tree/noise", k));
        for ((mut row, zr), sd) in x.axis_iter_mut(Axis(0)).zip(z.outer_iter()).zip(&noise_sd) {
            row.scaled_add(*sd, &zr);
        }
        x
    };
    Ok(MultimodalSet {
        modality1: DataMatrix::new(view(0))?,
        modality2: DataMatrix::new(view(1))?,
        labels,
        ground_truth: Some(DataMatrix::new(clean)?),
        ground_truth2: None,
        geodesics: Some(geodesics),
        planted_pairs: 0,
        noise: NoiseSpec::PerBranch {
            branch_noise: spec.branch_noise.clone(),
        },
        seed: spec.seed,
    })
}

/// Coupled features across two modalities, corrupted by dropout.
///
/// Points carry a latent pseudotime `u ∈ [0, 1]` and a group id. Every
/// feature is a Gaussian bump in `u` plus a group offset. The first `pairs`
/// features of both modalities share the same bump and offset (the planted
/// pairs); the remaining `background` features are drawn per modality. Each
/// entry gets Gaussian observation noise, columns are shifted to a zero
/// minimum, and entries are then zeroed independently with probability
/// `dropout`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoupledSpec {
    pub n: usize,
    pub pairs: usize,
    pub background: usize,
    pub groups: usize,
    pub dropout: f64,
    pub noise: f64,
    pub seed: u64,
}

impl Default for CoupledSpec {
    fn default() -> Self {
        Self {
            n: 1000,
            pairs: 20,
            background: 30,
            groups: 4,
            dropout: 0.7,
            noise: 0.6,
            seed: 0,
        }
    }
}

struct Bumps {
    mu: Vec<f64>,
    width: Vec<f64>,
    offset: Array2<f64>,
}

impl Bumps {
    fn draw(k: usize, groups: usize, rng: &mut impl Rng) -> Self {
        let mu = (0..k).map(|_| rng.random_range(0.0..1.0)).collect();
        let width = (0..k).map(|_| rng.random_range(0.08..0.25)).collect();
        let offset = Array2::from_shape_simple_fn((groups, k), || {
            let z: f64 = StandardNormal.sample(rng);
            z
        });
        Self { mu, width, offset }
    }

    fn eval(&self, u: &[f64], group: &[usize]) -> Array2<f64> {
        Array2::from_shape_fn((u.len(), self.mu.len()), |(i, j)| {
            let z = (u[i] - self.mu[j]) / self.width[j];
            2.0 * (-0.5 * z * z).exp() + 0.5 * self.offset[[group[i], j]]
        })
    }
}

pub fn make_coupled(spec: &CoupledSpec) -> Result<MultimodalSet> {
    if spec.n < 2 || spec.pairs < 1 || spec.groups < 1 {
        return Err(Error::Validation("coupled set needs n >= 2, pairs >= 1, groups >= 1".into()));
    }
    if !(0.0..1.0).contains(&spec.dropout) {
        return Err(Error::Validation(format!("dropout must lie in [0, 1), got {}", spec.dropout)));
    }
    check_nu(spec.noise, "observation noise")?;
    let mut rng = seed::rng(seed::child(spec.seed, "coupled/latent"));
    let u: Vec<f64> = (0..spec.n).map(|_| rng.random_range(0.0..1.0)).collect();
    let group: Vec<usize> = (0..spec.n).map(|_| rng.random_range(0..spec.groups)).collect();
    let shared = Bumps::draw(spec.pairs, spec.groups, &mut rng).eval(&u, &group);

    let view = |k: u64| -> Result<(Array2<f64>, Array2<f64>)> {
        let mut rng = seed::rng(seed::child_indexed(spec.seed, "coupled/background", k));
        let bg = Bumps::draw(spec.background, spec.groups, &mut rng).eval(&u, &group);
        let mut clean = ndarray::concatenate(Axis(1), &[shared.view(), bg.view()])
            .map_err(|e| Error::Internal(e.to_string()))?;
        let noise = Normal::new(0.0, spec.noise.max(f64::MIN_POSITIVE))
            .map_err(|e| Error::Internal(e.to_string()))?;
        let mut nrng = seed::rng(seed::child_indexed(spec.seed, "coupled/noise", k));
        if spec.noise > 0.0 {
            clean.mapv_inplace(|v| v + noise.sample(&mut nrng));
        }
        for mut col in clean.axis_iter_mut(Axis(1)) {
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            col.mapv_inplace(|v| v - lo);
        }
        let mut drng = seed::rng(seed::child_indexed(spec.seed, "coupled/dropout", k));
        let sparse = clean.mapv(|v| if drng.random::<f64>() < spec.dropout { 0.0 } else { v });
        Ok((clean, sparse))
    };
    let (clean1, sparse1) = view(0)?;
    let (clean2, sparse2) = view(1)?;
    Ok(MultimodalSet {
        modality1: DataMatrix::new(sparse1)?,
        modality2: DataMatrix::new(sparse2)?,
        labels: group.iter().map(|g| *g as i64).collect(),
        ground_truth: Some(DataMatrix::new(clean1)?),
        ground_truth2: Some(DataMatrix::new(clean2)?),
        geodesics: None,
        planted_pairs: spec.pairs,
        noise: NoiseSpec::Dropout {
            p: spec.dropout,
            noise: spec.noise,
        },
        seed: spec.seed,
    })
}
