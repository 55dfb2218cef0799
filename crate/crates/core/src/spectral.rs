//! Eigendecomposition of diffusion operators through their symmetric
//! conjugate, graph Fourier filtering, spectral entropy and elbow-based
//! timescale selection.
//!
//! A diffusion operator `P = D^-1 K` is similar to the symmetric matrix
//! `M = D^1/2 P D^-1/2 = D^-1/2 K D^-1/2`. We decompose `M = V Λ Vᵀ` with an
//! orthonormal solver and recover right eigenvectors of `P` as
//! `Φ = D^-1/2 V`. Filtering in that basis, `D^-1/2 V h(Λ) Vᵀ D^1/2 f`, is
//! exact: `h(λ) = λ^t` reproduces `P^t f`.

use std::fmt::Write as _;

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::matrix::DataMatrix;
use crate::operator::DiffusionOperator;

#[derive(Debug, Clone)]
pub struct EigenSystem {
    /// Descending.
    pub eigenvalues: Array1<f64>,
    /// Right eigenvectors of `P`, one per column.
    pub right_vectors: Array2<f64>,
    /// Orthonormal eigenvectors of the symmetric conjugate.
    pub ortho_vectors: Array2<f64>,
    /// `sqrt(degrees)` of the decomposed operator.
    pub sqrt_degrees: Array1<f64>,
}

impl EigenSystem {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Reconstructs the symmetric conjugate `V Λ Vᵀ`.
    pub fn reconstruct_conjugate(&self) -> Array2<f64> {
        let scaled = &self.ortho_vectors * &self.eigenvalues.view().insert_axis(Axis(0));
        linalg::matmul(scaled.view(), self.ortho_vectors.t())
    }
}

/// Symmetric conjugate `D^1/2 P D^-1/2`, symmetrized to remove round-off.
pub fn symmetric_conjugate(op: &DiffusionOperator) -> Array2<f64> {
    let s = op.degrees().mapv(f64::sqrt);
    let p = op.values();
    let n = p.nrows();
    let mut m = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        m[[i, i]] = p[[i, i]];
        for j in (i + 1)..n {
            let a = s[i] * p[[i, j]] / s[j];
            let b = s[j] * p[[j, i]] / s[i];
            let v = 0.5 * (a + b);
            m[[i, j]] = v;
            m[[j, i]] = v;
        }
    }
    m
}

pub fn eigendecompose(op: &DiffusionOperator) -> Result<EigenSystem> {
    let m = symmetric_conjugate(op);
    let (eigenvalues, ortho_vectors) = linalg::symmetric_eigen(m.view())?;
    let sqrt_degrees = op.degrees().mapv(f64::sqrt);
    let inv = sqrt_degrees.mapv(|s| 1.0 / s);
    let right_vectors = &ortho_vectors * &inv.view().insert_axis(Axis(1));
    Ok(EigenSystem {
        eigenvalues,
        right_vectors,
        ortho_vectors,
        sqrt_degrees,
    })
}

/// `D^-1/2 V h(Λ) Vᵀ D^1/2 f` for every column `f` of `signal`.
pub fn graph_filter<H>(eig: &EigenSystem, signal: &DataMatrix, h: H) -> Result<DataMatrix>
where
    H: Fn(f64) -> f64,
{
    let n = eig.len();
    if signal.rows() != n {
        return Err(Error::Dimension(format!(
            "signal has {} rows, operator has {n}",
            signal.rows()
        )));
    }
    let lifted = signal.values() * &eig.sqrt_degrees.view().insert_axis(Axis(1));
    let mut coeffs = linalg::matmul(eig.ortho_vectors.t(), lifted.view());
    for (mut row, &lambda) in coeffs.axis_iter_mut(Axis(0)).zip(eig.eigenvalues.iter()) {
        let gain = h(lambda);
        row.mapv_inplace(|c| c * gain);
    }
    let back = linalg::matmul(eig.ortho_vectors.view(), coeffs.view());
    let out = back / eig.sqrt_degrees.view().insert_axis(Axis(1));
    signal.with_values(out)
}

/// Shannon entropy (nats) of `ψ_i = |λ_i|^t / Σ_j |λ_j|^t`, with `0 log 0 = 0`.
///
/// Evaluated as `ln T - Σ p ln p / T` with `p = |λ|^t` and `T = Σ p`, which is
/// exact for a flat spectrum of ones.
pub fn entropy_of_spectrum(eigenvalues: &[f64], t: u32) -> f64 {
    let powered: Vec<f64> = eigenvalues.iter().map(|l| l.abs().powi(t as i32)).collect();
    let total: f64 = powered.iter().sum();
    if !(total > 0.0) {
        return 0.0;
    }
    let weighted: f64 = powered.iter().filter(|p| **p > 0.0).map(|p| p * p.ln()).sum();
    (total.ln() - weighted / total).max(0.0)
}

pub fn spectral_entropy(eig: &EigenSystem, t: u32) -> f64 {
    spectral_entropy_top(eig, t, None)
}

/// Spectral entropy restricted to the `top_k` largest eigenvalues.
pub fn spectral_entropy_top(eig: &EigenSystem, t: u32, top_k: Option<usize>) -> f64 {
    let values = eig.eigenvalues.as_slice().expect("contiguous eigenvalues");
    let k = top_k.unwrap_or(values.len()).min(values.len());
    entropy_of_spectrum(&values[..k], t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EntropyOptions {
    pub t_max: u32,
    /// Use only the largest `top_k` eigenvalues; `None` uses all of them.
    pub top_k: Option<usize>,
}

impl Default for EntropyOptions {
    fn default() -> Self {
        Self {
            t_max: 64,
            top_k: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyCurve {
    pub timescales: Vec<u32>,
    pub entropies: Vec<f64>,
    pub elbow: u32,
}

impl EntropyCurve {
    /// CSV with columns `t,entropy,is_elbow`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,entropy,is_elbow\n");
        for (t, s) in self.timescales.iter().zip(&self.entropies) {
            let _ = writeln!(out, "{t},{s:.17e},{}", u8::from(*t == self.elbow));
        }
        out
    }
}

pub fn select_timescale(eig: &EigenSystem, opts: EntropyOptions) -> Result<EntropyCurve> {
    if opts.t_max < 3 {
        return Err(Error::Validation(format!(
            "t_max must be at least 3, got {}",
            opts.t_max
        )));
    }
    let timescales: Vec<u32> = (1..=opts.t_max).collect();
    let entropies: Vec<f64> = timescales
        .iter()
        .map(|&t| spectral_entropy_top(eig, t, opts.top_k))
        .collect();
    let elbow = timescales[knee_index(&entropies)];
    Ok(EntropyCurve {
        timescales,
        entropies,
        elbow,
    })
}

/// Index of the point farthest from the chord joining the first and last
/// samples of `y` (x spaced at unit steps). Distances within a relative 1e-12
/// of the maximum count as ties and resolve to the smallest index.
pub fn knee_index(y: &[f64]) -> usize {
    let n = y.len();
    if n < 3 {
        return 0;
    }
    let (x0, y0) = (0.0, y[0]);
    let (x1, y1) = ((n - 1) as f64, y[n - 1]);
    let (dx, dy) = (x1 - x0, y1 - y0);
    let norm = dx.hypot(dy);
    let dist: Vec<f64> = y
        .iter()
        .enumerate()
        .map(|(i, &yi)| (dy * i as f64 - dx * yi + x1 * y0 - y1 * x0).abs() / norm)
        .collect();
    let best = dist.iter().cloned().fold(0.0, f64::max);
    let tol = knee_tie_tolerance(y);
    dist.iter().position(|d| *d >= best - tol).unwrap_or(0)
}

/// Absolute tolerance under which two chord distances are treated as equal.
pub fn knee_tie_tolerance(y: &[f64]) -> f64 {
    let scale = y
        .iter()
        .fold(y.len() as f64, |m, v| m.max(v.abs()));
    1e-12 * scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{diffusion_operator, Kernel};
    use ndarray::array;

    fn two_point() -> DiffusionOperator {
        let k = Kernel::from_values(array![[1.0, 0.5], [0.5, 1.0]], 1.0).unwrap();
        diffusion_operator(&k).unwrap()
    }

    #[test]
    fn identity_operator_decomposes() {
        let p = diffusion_operator(&Kernel::from_values(Array2::eye(5), 1.0).unwrap()).unwrap();
        let e = eigendecompose(&p).unwrap();
        assert!(e.eigenvalues.iter().all(|l| (l - 1.0).abs() < 1e-12));
        let r = e.reconstruct_conjugate();
        assert!(linalg::max_abs_diff(r.view(), Array2::eye(5).view()) < 1e-12);
    }

    #[test]
    fn two_point_spectrum() {
        let e = eigendecompose(&two_point()).unwrap();
        assert!((e.eigenvalues[0] - 1.0).abs() < 1e-12);
        assert!((e.eigenvalues[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn entropy_examples() {
        // uniform spectrum
        assert!((entropy_of_spectrum(&[1.0; 7], 3) - 7f64.ln()).abs() < 1e-15);
        // point mass
        assert_eq!(entropy_of_spectrum(&[1.0, 0.0, 0.0], 1), 0.0);
        // psi = (3/4, 1/4)
        let expected = -(0.75f64 * 0.75f64.ln() + 0.25 * 0.25f64.ln());
        assert!((entropy_of_spectrum(&[1.0, 1.0 / 3.0], 1) - expected).abs() < 1e-15);
        assert!((expected - 0.562335).abs() < 1e-6);
    }

    #[test]
    fn entropy_uses_absolute_values() {
        assert_eq!(
            entropy_of_spectrum(&[1.0, -0.5, 0.25], 3),
            entropy_of_spectrum(&[1.0, 0.5, 0.25], 3)
        );
    }

    #[test]
    fn knee_of_linear_curve_is_first() {
        let y: Vec<f64> = (0..20).map(|i| 5.0 - 0.1 * i as f64).collect();
        assert_eq!(knee_index(&y), 0);
    }

    #[test]
    fn knee_of_small_curve() {
        assert_eq!(knee_index(&[5.0, 2.0, 1.9, 1.8, 1.7]), 1);
    }

    #[test]
    fn t_max_too_small() {
        let e = eigendecompose(&two_point()).unwrap();
        let opts = EntropyOptions {
            t_max: 2,
            top_k: None,
        };
        assert!(select_timescale(&e, opts).is_err());
    }

    #[test]
    fn csv_marks_elbow() {
        let curve = EntropyCurve {
            timescales: vec![1, 2, 3],
            entropies: vec![1.0, 0.5, 0.25],
            elbow: 2,
        };
        let csv = curve.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,entropy,is_elbow");
        assert!(lines[2].ends_with(",1"));
        assert!(lines[1].ends_with(",0"));
    }

    #[test]
    fn filter_dimension_mismatch() {
        let e = eigendecompose(&two_point()).unwrap();
        let f = DataMatrix::new(array![[1.0], [2.0], [3.0]]).unwrap();
        assert!(matches!(graph_filter(&e, &f, |l| l), Err(Error::Dimension(_))));
    }
}
