//! Diffusion-map embeddings of row-stochastic operators, symmetric or not.
//!
//! Coordinates are `λ_i^t φ_i` for the leading nontrivial eigenpairs, sorted
//! by `|λ|`. Fused operators are not similar to a symmetric matrix and can
//! have complex conjugate eigenpairs; each such pair contributes the real and
//! imaginary parts of `λ^t φ` as two real coordinates.
//!
//! Conventions: every eigenvector is scaled to unit Euclidean norm, its phase
//! is rotated so that its largest-magnitude entry is real and positive, and
//! the trivial constant eigenvector is removed from the `λ = 1` eigenspace by
//! orthogonal projection (so disconnected components keep their indicator
//! directions).

use std::fmt::Write as _;

use ndarray::{s, Array1, Array2, Axis};

use crate::error::{Error, Result};
use crate::linalg;
use crate::operator::Markov;

pub use crate::plot::scatter_2d;

/// Eigenvalues whose imaginary part is at most this are treated as real.
const REAL_TOL: f64 = 1e-10;
/// Largest imaginary residue tolerated in an eigenvector deemed real.
const RESIDUE_TOL: f64 = 1e-6;
/// Eigenvalues this close to 1 span the stationary eigenspace.
const UNIT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    /// `N × m` diffusion coordinates.
    pub coords: Array2<f64>,
    /// `(re, im)` of the eigenvalue behind each column.
    pub eigenvalues_used: Vec<(f64, f64)>,
    pub trivial_dropped: bool,
    /// Conjugate pairs embedded as (real, imaginary) coordinate pairs.
    pub complex_pairs: usize,
    /// Set when eigenvectors were unusable and the embedding came from
    /// singular vectors instead.
    pub svd_fallback: bool,
    pub row_ids: Vec<u64>,
}

impl Embedding {
    pub fn dims(&self) -> usize {
        self.coords.ncols()
    }

    pub fn len(&self) -> usize {
        self.coords.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.nrows() == 0
    }

    pub fn with_row_ids(mut self, ids: &[u64]) -> Result<Self> {
        if ids.len() != self.coords.nrows() {
            return Err(Error::Dimension(format!(
                "{} ids for {} embedded points",
                ids.len(),
                self.coords.nrows()
            )));
        }
        self.row_ids = ids.to_vec();
        Ok(self)
    }

    /// CSV with header `row_id,dim1,...,dimm`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row_id");
        for d in 1..=self.dims() {
            let _ = write!(out, ",dim{d}");
        }
        out.push('\n');
        for (id, row) in self.row_ids.iter().zip(self.coords.outer_iter()) {
            let _ = write!(out, "{id}");
            for v in row {
                let _ = write!(out, ",{v:e}");
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Copy)]
struct C {
    re: f64,
    im: f64,
}

impl C {
    fn abs(self) -> f64 {
        self.re.hypot(self.im)
    }

    fn mul(self, o: C) -> C {
        C {
            re: self.re * o.re - self.im * o.im,
            im: self.re * o.im + self.im * o.re,
        }
    }

    fn powi(self, t: u32) -> C {
        let r = self.abs().powi(t as i32);
        let th = self.im.atan2(self.re) * f64::from(t);
        if self.im == 0.0 {
            return C {
                re: self.re.powi(t as i32),
                im: 0.0,
            };
        }
        C {
            re: r * th.cos(),
            im: r * th.sin(),
        }
    }
}

/// Eigenvector column `k` as complex entries, unit norm, phase fixed so the
/// largest-magnitude entry is real positive.
fn canonical_vector(re: &Array2<f64>, im: &Array2<f64>, k: usize) -> Vec<C> {
    let mut v: Vec<C> = (0..re.nrows())
        .map(|i| C {
            re: re[[i, k]],
            im: im[[i, k]],
        })
        .collect();
    let norm = v.iter().map(|c| c.re * c.re + c.im * c.im).sum::<f64>().sqrt();
    let pivot = v
        .iter()
        .enumerate()
        .fold((0, -1.0), |(bi, bm), (i, c)| {
            let m = c.abs();
            if m > bm * (1.0 + 1e-12) {
                (i, m)
            } else {
                (bi, bm)
            }
        })
        .0;
    let p = v[pivot];
    let pm = p.abs();
    let rot = if pm > 0.0 {
        C {
            re: p.re / pm / norm,
            im: -p.im / pm / norm,
        }
    } else {
        C { re: 1.0 / norm, im: 0.0 }
    };
    for c in &mut v {
        *c = c.mul(rot);
    }
    v
}

fn sign_fix(col: &mut [f64]) {
    let pivot = col
        .iter()
        .enumerate()
        .fold((0, -1.0), |(bi, bm), (i, v)| {
            if v.abs() > bm * (1.0 + 1e-12) {
                (i, v.abs())
            } else {
                (bi, bm)
            }
        })
        .0;
    if col[pivot] < 0.0 {
        col.iter_mut().for_each(|v| *v = -*v);
    }
}

/// Diffusion-map coordinates of a row-stochastic operator: the `m` leading
/// nontrivial eigenpairs by `|λ|`, coordinates `λ^t φ`.
pub fn diffusion_map<M: Markov + ?Sized>(op: &M, m: usize, t: u32) -> Result<Embedding> {
    let p = op.matrix();
    let n = p.nrows();
    if m == 0 {
        return Err(Error::Validation("embedding needs m >= 1".into()));
    }
    if n < 2 || m > n - 1 {
        return Err(Error::Size {
            what: "embedding dimensions must be at most N - 1",
            got: m,
            need: n.saturating_sub(1),
        });
    }
    let eig = linalg::general_eigen(p.view())?;
    let values: Vec<C> = (0..n)
        .map(|k| C {
            re: eig.values_re[k],
            im: eig.values_im[k],
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        values[b]
            .abs()
            .total_cmp(&values[a].abs())
            .then(values[b].re.total_cmp(&values[a].re))
            .then(values[b].im.total_cmp(&values[a].im))
    });

    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut used: Vec<(f64, f64)> = Vec::with_capacity(m);
    let mut complex_pairs = 0;
    let mut needs_fallback = false;

    // Stationary eigenspace: project out the constant vector.
    let unit: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&k| (values[k].re - 1.0).abs() < UNIT_TOL && values[k].im.abs() < UNIT_TOL)
        .collect();
    let trivial_dropped = !unit.is_empty();
    let mut basis: Vec<Array1<f64>> = vec![Array1::from_elem(n, 1.0 / (n as f64).sqrt())];
    for &k in &unit {
        let v = canonical_vector(&eig.vectors_re, &eig.vectors_im, k);
        if v.iter().any(|c| c.im.abs() > RESIDUE_TOL) {
            needs_fallback = true;
        }
        let mut w = Array1::from_iter(v.iter().map(|c| c.re));
        for b in &basis {
            let proj = w.dot(b);
            w.scaled_add(-proj, b);
        }
        let norm = w.dot(&w).sqrt();
        if norm > 1e-6 {
            w /= norm;
            basis.push(w.clone());
            if columns.len() < m {
                let mut col = w.to_vec();
                sign_fix(&mut col);
                columns.push(col);
                used.push((1.0, 0.0));
            }
        }
    }
    let rest: Vec<usize> = if trivial_dropped {
        order.iter().copied().filter(|k| !unit.contains(k)).collect()
    } else {
        order[1..].to_vec()
    };

    for &k in &rest {
        if columns.len() >= m {
            break;
        }
        let lambda = values[k];
        if lambda.im < -REAL_TOL {
            continue; // conjugate partner of a pair already embedded
        }
        let v = canonical_vector(&eig.vectors_re, &eig.vectors_im, k);
        let lt = lambda.powi(t);
        if lambda.im.abs() <= REAL_TOL {
            if v.iter().any(|c| c.im.abs() > RESIDUE_TOL) {
                needs_fallback = true;
                break;
            }
            let mut col: Vec<f64> = v.iter().map(|c| c.re).collect();
            sign_fix(&mut col);
            let scale = lambda.re.powi(t as i32);
            columns.push(col.into_iter().map(|x| x * scale).collect());
            used.push((lambda.re, 0.0));
        } else {
            complex_pairs += 1;
            let scaled: Vec<C> = v.iter().map(|c| c.mul(lt)).collect();
            columns.push(scaled.iter().map(|c| c.re).collect());
            used.push((lambda.re, lambda.im));
            if columns.len() < m {
                columns.push(scaled.iter().map(|c| c.im).collect());
                used.push((lambda.re, -lambda.im));
            }
        }
    }

    if needs_fallback || columns.len() < m {
        log::warn!("diffusion_map: eigenvectors unusable, falling back to singular vectors");
        return svd_embedding(p, m, t);
    }

    let mut coords = Array2::<f64>::zeros((n, m));
    for (j, col) in columns.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            coords[[i, j]] = *v;
        }
    }
    if coords.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite diffusion coordinates".into()));
    }
    Ok(Embedding {
        coords,
        eigenvalues_used: used,
        trivial_dropped,
        complex_pairs,
        svd_fallback: false,
        row_ids: (0..n as u64).collect(),
    })
}

/// Left singular vectors `2..=m+1` scaled by `σ^t`.
fn svd_embedding(p: &Array2<f64>, m: usize, t: u32) -> Result<Embedding> {
    let n = p.nrows();
    let (u, s, _) = linalg::thin_svd(p.view())?;
    let mut coords = u.slice(s![.., 1..=m]).to_owned();
    for (j, mut col) in coords.axis_iter_mut(Axis(1)).enumerate() {
        let mut c = col.to_vec();
        sign_fix(&mut c);
        let scale = s[j + 1].powi(t as i32);
        for (dst, v) in col.iter_mut().zip(c) {
            *dst = v * scale;
        }
    }
    Ok(Embedding {
        coords,
        eigenvalues_used: (1..=m).map(|j| (s[j], 0.0)).collect(),
        trivial_dropped: true,
        complex_pairs: 0,
        svd_fallback: true,
        row_ids: (0..n as u64).collect(),
    })
}
