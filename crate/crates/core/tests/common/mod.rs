#![allow(dead_code)]

use idiff::operator::{self, Bandwidth};
use idiff::{seed, DataMatrix, DiffusionOperator};
use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};

pub fn gaussian_data(n: usize, d: usize, seed_: u64) -> DataMatrix {
    let mut rng = seed::rng(seed_);
    let normal = Normal::new(0.0, 1.0).unwrap();
    DataMatrix::new(Array2::from_shape_fn((n, d), |_| normal.sample(&mut rng))).unwrap()
}

pub fn uniform_data(n: usize, d: usize, seed_: u64) -> DataMatrix {
    let mut rng = seed::rng(seed_);
    DataMatrix::new(Array2::from_shape_fn((n, d), |_| rng.random::<f64>())).unwrap()
}

pub fn op_of(x: &DataMatrix) -> DiffusionOperator {
    let k = operator::gaussian_kernel(x, Bandwidth::default()).unwrap();
    operator::diffusion_operator(&k).unwrap()
}

pub fn random_op(n: usize, seed_: u64) -> DiffusionOperator {
    op_of(&gaussian_data(n, 3, seed_))
}

/// Triple-loop product, independent of the library's blocked kernel.
pub fn naive_matmul(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let (n, k, m) = (a.nrows(), a.ncols(), b.ncols());
    assert_eq!(k, b.nrows());
    let mut c = Array2::zeros((n, m));
    for i in 0..n {
        for j in 0..m {
            let mut s = 0.0;
            for l in 0..k {
                s += a[[i, l]] * b[[l, j]];
            }
            c[[i, j]] = s;
        }
    }
    c
}

/// `a` multiplied by itself `t` times.
pub fn naive_power(a: &Array2<f64>, t: u32) -> Array2<f64> {
    let mut out = Array2::eye(a.nrows());
    for _ in 0..t {
        out = naive_matmul(&out, a);
    }
    out
}

pub fn max_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn permutation(n: usize, seed_: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(&mut seed::rng(seed_));
    p
}

pub fn euclidean(a: &Array2<f64>, i: usize, j: usize) -> f64 {
    a.row(i)
        .iter()
        .zip(a.row(j).iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Exhaustive max-distance-to-chord search, written independently of the
/// library: distances compared through the cross product, first maximum wins.
pub fn knee_oracle(y: &[f64]) -> usize {
    let n = y.len();
    if n < 3 {
        return 0;
    }
    let (ax, ay) = (0.0, y[0]);
    let (bx, by) = ((n - 1) as f64, y[n - 1]);
    let len = ((bx - ax) * (bx - ax) + (by - ay) * (by - ay)).sqrt();
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &yi) in y.iter().enumerate() {
        let cross = (bx - ax) * (yi - ay) - (by - ay) * (i as f64 - ax);
        let d = cross.abs() / len;
        if d > best.1 {
            best = (i, d);
        }
    }
    best.0
}

/// Median-kNN bandwidth computed from direct coordinate differences.
pub fn oracle_bandwidth(x: &Array2<f64>, k: usize) -> f64 {
    let n = x.nrows();
    let mut kth: Vec<f64> = (0..n)
        .map(|i| {
            let mut d: Vec<f64> = (0..n).map(|j| euclidean(x, i, j)).collect();
            d.sort_by(f64::total_cmp);
            d[k.min(n - 1)]
        })
        .collect();
    kth.sort_by(f64::total_cmp);
    let m = if n % 2 == 1 { kth[n / 2] } else { 0.5 * (kth[n / 2 - 1] + kth[n / 2]) };
    m * m
}

/// One level of multiscale denoising written out by hand: with the depth
/// capped at one, every recursive call returns its block, so the reassembled
/// union is exactly `P^t X` and the result is `(X + P^t X) / 2`.
pub fn single_level_oracle(x: &Array2<f64>, t: u32) -> Array2<f64> {
    let n = x.nrows();
    let eps = oracle_bandwidth(x, 5);
    let mut p = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let d = euclidean(x, i, j);
            p[[i, j]] = (-d * d / eps).exp();
        }
        let s: f64 = p.row(i).sum();
        p.row_mut(i).mapv_inplace(|v| v / s);
    }
    let smoothed = naive_matmul(&naive_power(&p, t), x);
    (x + &smoothed) * 0.5
}
