mod common;

use common::{gaussian_data, max_diff, naive_power, op_of, permutation};
use idiff::embed::{diffusion_map, Embedding};
use idiff::fusion;
use idiff::DataMatrix;
use ndarray::{Array1, Array2, Axis};

fn distances(e: &Embedding) -> Array2<f64> {
    let n = e.len();
    Array2::from_shape_fn((n, n), |(i, j)| common::euclidean(&e.coords, i, j))
}

#[test]
fn symmetric_operator_matches_conjugate_basis() {
    let p = op_of(&gaussian_data(40, 3, 1));
    let eig = p.eigen().unwrap();
    for t in [1u32, 3] {
        let e = diffusion_map(&p, 8, t).unwrap();
        assert!(e.trivial_dropped);
        assert_eq!(e.complex_pairs, 0);
        for j in 0..8 {
            let lambda = eig.eigenvalues[j + 1];
            let phi = eig.right_vectors.column(j + 1);
            let unit = &phi / phi.dot(&phi).sqrt();
            let expected = unit.mapv(|v| v * lambda.powi(t as i32));
            let got = e.coords.column(j);
            let same = got.iter().zip(expected.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let flipped = got.iter().zip(expected.iter()).map(|(a, b)| (a + b).abs()).fold(0.0, f64::max);
            assert!(same.min(flipped) < 1e-6, "t={t} column {j}: {same:e} / {flipped:e}");
            assert!((e.eigenvalues_used[j].0 - lambda).abs() < 1e-9);
        }
    }
}

/// Rebuilds `P^t` from the constant vector and the embedding's columns
/// divided back by their eigenvalue powers.
fn reconstruct(e: &Embedding, t: u32) -> Array2<f64> {
    let n = e.len();
    let mut phi = Array2::<f64>::zeros((n, n));
    phi.column_mut(0).fill(1.0);
    let mut lam = Array1::<f64>::ones(n);
    for j in 0..n - 1 {
        let l = e.eigenvalues_used[j].0;
        lam[j + 1] = l.powi(t as i32);
        phi.column_mut(j + 1).assign(&(&e.coords.column(j) / lam[j + 1]));
    }
    let inv = idiff::linalg::thin_svd(phi.view()).map(|(u, s, v)| {
        let sinv = s.mapv(|v| 1.0 / v);
        v.dot(&(&u.t() * &sinv.insert_axis(Axis(1))))
    });
    let inv = inv.unwrap();
    (&phi * &lam.insert_axis(Axis(0))).dot(&inv)
}

#[test]
fn full_basis_reconstructs_powers() {
    let p = op_of(&gaussian_data(10, 2, 3));
    for t in [1u32, 2] {
        let e = diffusion_map(&p, 9, t).unwrap();
        let rebuilt = reconstruct(&e, t);
        assert!(max_diff(&rebuilt, &naive_power(p.values(), t)) < 1e-6, "t={t}");
    }
}

#[test]
fn distances_follow_row_permutations() {
    let a = gaussian_data(30, 3, 5);
    let b = DataMatrix::new(gaussian_data(30, 3, 6).values() * 0.5 + a.values()).unwrap();
    let alt = |x: &DataMatrix, y: &DataMatrix| fusion::alternating(&op_of(x), &op_of(y), 1).unwrap();
    let base = diffusion_map(&alt(&a, &b), 5, 1).unwrap();
    let d0 = distances(&base);
    for s in 0..3 {
        let sigma = permutation(30, s);
        let e = diffusion_map(&alt(&a.select_rows(&sigma), &b.select_rows(&sigma)), 5, 1).unwrap();
        let expected = d0.select(Axis(0), &sigma).select(Axis(1), &sigma);
        assert!(max_diff(&distances(&e), &expected) < 1e-6, "permutation {s}");
    }
}

#[test]
fn largest_entry_of_each_column_is_positive() {
    let e = diffusion_map(&op_of(&gaussian_data(50, 4, 7)), 10, 1).unwrap();
    for col in e.coords.axis_iter(Axis(1)) {
        let pivot = col.iter().cloned().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
        assert!(pivot > 0.0);
        assert!(col.iter().all(|v| v.is_finite()));
    }
    let mags: Vec<f64> = e.eigenvalues_used.iter().map(|(re, im)| re.hypot(*im)).collect();
    assert!(mags.windows(2).all(|w| w[0] >= w[1] - 1e-12));
}

#[test]
fn deterministic() {
    let p = op_of(&gaussian_data(25, 3, 8));
    assert_eq!(diffusion_map(&p, 4, 2).unwrap(), diffusion_map(&p, 4, 2).unwrap());
}
