//! Dense linear algebra shared by every module.
//!
//! Storage is `ndarray`; eigen and singular value decompositions go through
//! `faer` (sequential, so results do not depend on the thread count). Matrix
//! products are split into fixed row blocks that run on the rayon pool when
//! the `parallel` feature is on.

use faer::{Mat, Side};
use ndarray::{s, Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::par;

/// Rows per block in [`matmul`]. Fixed so block boundaries never depend on
/// the number of threads.
const ROW_BLOCK: usize = 32;

/// `a · b`, parallel over row blocks of `a`.
pub fn matmul(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    assert_eq!(a.ncols(), b.nrows(), "matmul: inner dimensions differ");
    let (n, m) = (a.nrows(), b.ncols());
    if n <= ROW_BLOCK || m == 0 {
        return a.dot(&b);
    }
    let mut out = vec![0.0; n * m];
    par::for_each_chunk_mut(&mut out, ROW_BLOCK * m, |bi, chunk| {
        let r0 = bi * ROW_BLOCK;
        let r1 = (r0 + ROW_BLOCK).min(n);
        let block = a.slice(s![r0..r1, ..]).dot(&b);
        for (dst, src) in chunk.iter_mut().zip(block.iter()) {
            *dst = *src;
        }
    });
    Array2::from_shape_vec((n, m), out).expect("matmul: shape")
}

/// Divides every row by its sum. Rows summing to zero are left untouched and
/// reported by index.
pub fn normalize_rows(m: &mut Array2<f64>) -> Option<usize> {
    let mut zero_row = None;
    for (i, mut row) in m.axis_iter_mut(Axis(0)).enumerate() {
        let s: f64 = row.sum();
        if s > 0.0 && s.is_finite() {
            row.mapv_inplace(|v| v / s);
        } else if zero_row.is_none() {
            zero_row = Some(i);
        }
    }
    zero_row
}

/// Pairwise squared Euclidean distances via `|a|^2 + |b|^2 - 2 a.b`, clamped
/// at zero. The upper triangle is computed once and mirrored, so the result
/// is exactly symmetric with a zero diagonal.
pub fn squared_distances(x: ArrayView2<'_, f64>) -> Array2<f64> {
    let n = x.nrows();
    let gram = matmul(x, x.t());
    let norms: Vec<f64> = (0..n).map(|i| gram[[i, i]]).collect();
    let rows: Vec<Vec<f64>> = par::map_range(n, |i| {
        ((i + 1)..n)
            .map(|j| (norms[i] + norms[j] - 2.0 * gram[[i, j]]).max(0.0))
            .collect()
    });
    let mut d = Array2::<f64>::zeros((n, n));
    for (i, row) in rows.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            let j = i + 1 + off;
            d[[i, j]] = v;
            d[[j, i]] = v;
        }
    }
    d
}

pub fn identity(n: usize) -> Array2<f64> {
    Array2::eye(n)
}

/// `p^t` by repeated squaring.
pub fn matrix_power(p: ArrayView2<'_, f64>, t: u32) -> Array2<f64> {
    let n = p.nrows();
    let mut result: Option<Array2<f64>> = None;
    let mut base = p.to_owned();
    let mut e = t;
    while e > 0 {
        if e & 1 == 1 {
            result = Some(match result {
                None => base.clone(),
                Some(r) => matmul(r.view(), base.view()),
            });
        }
        e >>= 1;
        if e > 0 {
            base = matmul(base.view(), base.view());
        }
    }
    result.unwrap_or_else(|| identity(n))
}

pub(crate) fn to_faer(a: ArrayView2<'_, f64>) -> Mat<f64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

/// Eigendecomposition of a symmetric matrix, eigenvalues in descending order
/// with matching eigenvector columns.
pub fn symmetric_eigen(a: ArrayView2<'_, f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Dimension(format!(
            "symmetric_eigen: {}x{} is not square",
            n,
            a.ncols()
        )));
    }
    let m = to_faer(a);
    let evd = m.self_adjoint_eigen(Side::Lower).map_err(|e| {
        Error::Numerical(format!(
            "symmetric eigensolver failed on {n}x{n} matrix ({e:?}); max |entry| = {:.3e}",
            max_abs(a)
        ))
    })?;
    let s = evd.S().column_vector();
    let u = evd.U();
    // faer returns ascending order.
    let values = Array1::from_shape_fn(n, |k| s[n - 1 - k]);
    let vectors = Array2::from_shape_fn((n, n), |(i, k)| u[(i, n - 1 - k)]);
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(
            "symmetric eigensolver returned non-finite eigenvalues".into(),
        ));
    }
    Ok((values, vectors))
}

/// Eigenpairs of a general real matrix, split into real and imaginary parts.
/// Order is whatever the solver produced; eigenvectors have unit norm.
#[derive(Debug, Clone)]
pub struct ComplexEigen {
    pub values_re: Vec<f64>,
    pub values_im: Vec<f64>,
    pub vectors_re: Array2<f64>,
    pub vectors_im: Array2<f64>,
}

pub fn general_eigen(a: ArrayView2<'_, f64>) -> Result<ComplexEigen> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Dimension(format!(
            "general_eigen: {}x{} is not square",
            n,
            a.ncols()
        )));
    }
    let m = to_faer(a);
    let evd = m.eigen().map_err(|e| {
        Error::Numerical(format!(
            "eigensolver failed on {n}x{n} matrix ({e:?}); max |entry| = {:.3e}",
            max_abs(a)
        ))
    })?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let out = ComplexEigen {
        values_re: (0..n).map(|k| s[k].re).collect(),
        values_im: (0..n).map(|k| s[k].im).collect(),
        vectors_re: Array2::from_shape_fn((n, n), |(i, k)| u[(i, k)].re),
        vectors_im: Array2::from_shape_fn((n, n), |(i, k)| u[(i, k)].im),
    };
    if out.values_re.iter().chain(&out.values_im).any(|v| !v.is_finite()) {
        return Err(Error::Numerical(
            "eigensolver returned non-finite eigenvalues".into(),
        ));
    }
    Ok(out)
}

/// Thin SVD `a = U diag(s) Vᵀ`, singular values descending.
pub fn thin_svd(a: ArrayView2<'_, f64>) -> Result<(Array2<f64>, Array1<f64>, Array2<f64>)> {
    let m = to_faer(a);
    let svd = m
        .thin_svd()
        .map_err(|e| Error::Numerical(format!("svd failed ({e:?})")))?;
    let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
    let k = s.nrows();
    Ok((
        Array2::from_shape_fn((u.nrows(), k), |(i, j)| u[(i, j)]),
        Array1::from_shape_fn(k, |j| s[j]),
        Array2::from_shape_fn((v.nrows(), k), |(i, j)| v[(i, j)]),
    ))
}

pub fn max_abs(a: ArrayView2<'_, f64>) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Largest elementwise absolute difference.
pub fn max_abs_diff(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter()
        .zip(b.iter())
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}
