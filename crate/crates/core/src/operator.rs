//! Gaussian affinity kernels, row-stochastic diffusion operators and their
//! integer powers.

use std::sync::OnceLock;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::matrix::DataMatrix;
use crate::spectral::{self, EigenSystem};

/// How the kernel bandwidth ε (squared-distance units) is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "policy")]
pub enum Bandwidth {
    Fixed { epsilon: f64 },
    /// ε = (median over points of the distance to the k-th nearest neighbor)².
    MedianKnn { k: usize },
}

impl Default for Bandwidth {
    fn default() -> Self {
        Bandwidth::MedianKnn { k: 5 }
    }
}

impl Bandwidth {
    pub fn fixed(epsilon: f64) -> Self {
        Bandwidth::Fixed { epsilon }
    }

    /// Resolves the policy against a squared-distance matrix.
    pub fn resolve(&self, sq_dist: ArrayView2<'_, f64>) -> Result<f64> {
        match *self {
            Bandwidth::Fixed { epsilon } => {
                if epsilon > 0.0 && epsilon.is_finite() {
                    Ok(epsilon)
                } else {
                    Err(Error::Validation(format!(
                        "bandwidth must be positive and finite, got {epsilon}"
                    )))
                }
            }
            Bandwidth::MedianKnn { k } => {
                if k == 0 {
                    return Err(Error::Validation("median-knn bandwidth needs k >= 1".into()));
                }
                Ok(median_knn_bandwidth(sq_dist, k))
            }
        }
    }
}

/// Squared median k-th nearest-neighbor distance. `k` is clamped to `N - 1`.
/// Falls back to the mean positive squared distance when duplicates make the
/// median zero, and to 1 when every point coincides.
pub fn median_knn_bandwidth(sq_dist: ArrayView2<'_, f64>, k: usize) -> f64 {
    let n = sq_dist.nrows();
    if n < 2 {
        return 1.0;
    }
    let k = k.min(n - 1);
    let mut kth: Vec<f64> = sq_dist
        .axis_iter(Axis(0))
        .map(|row| {
            let mut r = row.to_vec();
            // index 0 is the point itself
            let (_, v, _) = r.select_nth_unstable_by(k, f64::total_cmp);
            v.sqrt()
        })
        .collect();
    kth.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        kth[n / 2]
    } else {
        0.5 * (kth[n / 2 - 1] + kth[n / 2])
    };
    let eps = median * median;
    if eps > f64::EPSILON {
        return eps;
    }
    let (sum, count) = sq_dist
        .iter()
        .filter(|v| **v > 0.0)
        .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if count > 0 {
        sum / count as f64
    } else {
        1.0
    }
}

/// Symmetric affinity matrix with unit diagonal and entries in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    values: Array2<f64>,
    bandwidth: f64,
}

impl Kernel {
    /// Validates an externally built affinity matrix. `bandwidth` is recorded
    /// as provenance only.
    pub fn from_values(values: Array2<f64>, bandwidth: f64) -> Result<Self> {
        let n = values.nrows();
        if n != values.ncols() {
            return Err(Error::Dimension(format!("kernel is {}x{}", n, values.ncols())));
        }
        for i in 0..n {
            if values[[i, i]] != 1.0 {
                return Err(Error::Validation(format!(
                    "kernel diagonal at {i} is {}, expected 1",
                    values[[i, i]]
                )));
            }
            for j in (i + 1)..n {
                let v = values[[i, j]];
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Validation(format!("kernel entry ({i},{j}) = {v}")));
                }
                if v != values[[j, i]] {
                    return Err(Error::Validation(format!("kernel asymmetric at ({i},{j})")));
                }
            }
        }
        Ok(Self { values, bandwidth })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `K(i, j) = exp(-|x_i - x_j|^2 / ε)`.
pub fn gaussian_kernel(data: &DataMatrix, bandwidth: Bandwidth) -> Result<Kernel> {
    if data.rows() < 2 {
        return Err(Error::Size {
            what: "kernel needs at least two points",
            got: data.rows(),
            need: 2,
        });
    }
    let d2 = linalg::squared_distances(data.view());
    kernel_from_sq_distances(&d2, bandwidth)
}

/// Gaussian kernel over a precomputed squared-distance matrix, which must be
/// symmetric with zero diagonal.
pub fn kernel_from_sq_distances(sq_dist: &Array2<f64>, bandwidth: Bandwidth) -> Result<Kernel> {
    let n = sq_dist.nrows();
    if n < 2 {
        return Err(Error::Size {
            what: "kernel needs at least two points",
            got: n,
            need: 2,
        });
    }
    if sq_dist.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("non-finite squared distance".into()));
    }
    let eps = bandwidth.resolve(sq_dist.view())?;
    let values = sq_dist.mapv(|d| (-d / eps).exp());
    Ok(Kernel {
        values,
        bandwidth: eps,
    })
}

/// Row-stochastic transition matrix `P = D^-1 K` of a random walk over the
/// data, with the kernel degrees kept for symmetric conjugation.
#[derive(Debug, Clone)]
pub struct DiffusionOperator {
    values: Array2<f64>,
    degrees: Array1<f64>,
    eigen: OnceLock<EigenSystem>,
}

impl PartialEq for DiffusionOperator {
    fn eq(&self, other: &Self) -> bool {
        self.values == other.values && self.degrees == other.degrees
    }
}

/// Anything that behaves as a row-stochastic operator.
pub trait Markov {
    fn matrix(&self) -> &Array2<f64>;

    fn size(&self) -> usize {
        self.matrix().nrows()
    }

    /// Largest deviation of a row sum from one.
    fn row_sum_error(&self) -> f64 {
        self.matrix()
            .axis_iter(Axis(0))
            .map(|r| (r.sum() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

impl Markov for DiffusionOperator {
    fn matrix(&self) -> &Array2<f64> {
        &self.values
    }
}

/// A square matrix checked to be row-stochastic, e.g. an operator read back
/// from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMatrix(Array2<f64>);

impl StochasticMatrix {
    pub fn new(values: Array2<f64>, tol: f64) -> Result<Self> {
        if values.nrows() != values.ncols() {
            return Err(Error::Dimension(format!(
                "operator must be square, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < -tol) {
            return Err(Error::Validation("operator entries must be finite and nonnegative".into()));
        }
        let m = Self(values);
        let err = m.row_sum_error();
        if err > tol {
            return Err(Error::Validation(format!("operator rows deviate from 1 by {err:e}")));
        }
        Ok(m)
    }
}

impl Markov for StochasticMatrix {
    fn matrix(&self) -> &Array2<f64> {
        &self.0
    }
}

impl DiffusionOperator {
    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn degrees(&self) -> &Array1<f64> {
        &self.degrees
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Cached eigendecomposition through the symmetric conjugate.
    pub fn eigen(&self) -> Result<&EigenSystem> {
        if let Some(e) = self.eigen.get() {
            return Ok(e);
        }
        let e = spectral::eigendecompose(self)?;
        Ok(self.eigen.get_or_init(|| e))
    }

    /// Stationary distribution `d / sum(d)`.
    pub fn stationary(&self) -> Array1<f64> {
        let total = self.degrees.sum();
        self.degrees.mapv(|d| d / total)
    }
}

pub fn diffusion_operator(kernel: &Kernel) -> Result<DiffusionOperator> {
    let degrees = kernel.values.sum_axis(Axis(1));
    if let Some(i) = degrees.iter().position(|d| !(*d > 0.0)) {
        return Err(Error::Internal(format!("kernel row {i} sums to zero")));
    }
    let mut values = kernel.values.clone();
    for (mut row, d) in values.axis_iter_mut(Axis(0)).zip(degrees.iter()) {
        row.mapv_inplace(|v| v / d);
    }
    Ok(DiffusionOperator {
        values,
        degrees,
        eigen: OnceLock::new(),
    })
}

/// `P^t` via exponentiation by squaring, rows renormalized once at the end.
/// The result keeps the degrees of `op`: powers of a reversible walk are
/// reversible with respect to the same stationary measure.
pub fn power(op: &DiffusionOperator, t: u32) -> DiffusionOperator {
    let mut values = linalg::matrix_power(op.values.view(), t);
    if t > 1 {
        linalg::normalize_rows(&mut values);
    }
    DiffusionOperator {
        values,
        degrees: op.degrees.clone(),
        eigen: OnceLock::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn two_point() -> DiffusionOperator {
        let k = Kernel::from_values(array![[1.0, 0.5], [0.5, 1.0]], 1.0).unwrap();
        diffusion_operator(&k).unwrap()
    }

    #[test]
    fn coincident_points_have_unit_affinity() {
        let x = DataMatrix::new(array![[1.0, 2.0], [1.0, 2.0], [4.0, 6.0]]).unwrap();
        let k = gaussian_kernel(&x, Bandwidth::fixed(3.0)).unwrap();
        assert_eq!(k.values()[[0, 1]], 1.0);
    }

    #[test]
    fn distance_equal_to_bandwidth_gives_inverse_e() {
        let x = DataMatrix::new(array![[0.0, 0.0], [3.0, 4.0]]).unwrap();
        let k = gaussian_kernel(&x, Bandwidth::fixed(25.0)).unwrap();
        assert!((k.values()[[0, 1]] - (-1.0f64).exp()).abs() < 1e-15);
        assert!((k.values()[[0, 1]] - 0.367879).abs() < 1e-6);
    }

    #[test]
    fn huge_bandwidth_saturates() {
        let x = DataMatrix::new(Array2::from_shape_fn((12, 3), |(i, j)| (i * 3 + j) as f64 % 7.0))
            .unwrap();
        let k = gaussian_kernel(&x, Bandwidth::fixed(1e12)).unwrap();
        assert!(k.values().iter().all(|v| (v - 1.0).abs() < 1e-6));
    }

    #[test]
    fn kernel_rejects_bad_input() {
        let one = DataMatrix::new(array![[1.0]]).unwrap();
        assert!(matches!(
            gaussian_kernel(&one, Bandwidth::default()),
            Err(Error::Size { .. })
        ));
        let x = DataMatrix::new(array![[0.0], [1.0]]).unwrap();
        assert!(gaussian_kernel(&x, Bandwidth::fixed(-1.0)).is_err());
        assert!(gaussian_kernel(&x, Bandwidth::MedianKnn { k: 0 }).is_err());
    }

    #[test]
    fn duplicate_points_do_not_collapse_bandwidth() {
        let x = DataMatrix::new(array![[0.0], [0.0], [0.0], [0.0], [2.0]]).unwrap();
        let k = gaussian_kernel(&x, Bandwidth::MedianKnn { k: 1 }).unwrap();
        assert!(k.bandwidth() > 0.0);
        assert!(k.values().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn two_point_operator() {
        let p = two_point();
        let expect = array![[2.0 / 3.0, 1.0 / 3.0], [1.0 / 3.0, 2.0 / 3.0]];
        assert!(linalg::max_abs_diff(p.values().view(), expect.view()) < 1e-15);
        assert_eq!(p.degrees(), &array![1.5, 1.5]);
    }

    #[test]
    fn identity_kernel_gives_identity_operator() {
        let k = Kernel::from_values(Array2::<f64>::eye(4), 1.0).unwrap();
        let p = diffusion_operator(&k).unwrap();
        assert_eq!(p.values(), &Array2::<f64>::eye(4));
    }

    #[test]
    fn power_of_two_point_operator() {
        let p = two_point();
        assert_eq!(power(&p, 0).values(), &Array2::<f64>::eye(2));
        let p2 = power(&p, 2);
        let expect = array![[5.0 / 9.0, 4.0 / 9.0], [4.0 / 9.0, 5.0 / 9.0]];
        assert!(linalg::max_abs_diff(p2.values().view(), expect.view()) < 1e-15);
    }

    #[test]
    fn from_values_validates() {
        assert!(Kernel::from_values(array![[1.0, 0.2], [0.3, 1.0]], 1.0).is_err());
        assert!(Kernel::from_values(array![[0.9, 0.2], [0.2, 1.0]], 1.0).is_err());
        assert!(Kernel::from_values(array![[1.0, 1.2], [1.2, 1.0]], 1.0).is_err());
    }
}
