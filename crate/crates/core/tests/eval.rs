mod common;

use common::{gaussian_data, uniform_data};
use idiff::data::{make_coupled, make_tree, random_orthogonal, CoupledSpec, TreeSpec};
use idiff::eval::{self, DenoiseMethod};
use idiff::fusion::{FusionConfig, FusionStrategy};
use idiff::{seed, Error};
use ndarray::{Array2, Axis};
use proptest::prelude::*;
use rand::Rng;

fn blobs(per: usize, gap: f64) -> (Array2<f64>, Vec<i64>) {
    let noise = gaussian_data(2 * per, 3, 1).into_values();
    let mut x = noise;
    let mut labels = Vec::new();
    for (i, mut row) in x.axis_iter_mut(Axis(0)).enumerate() {
        let b = (i >= per) as i64;
        row[0] += gap * b as f64;
        labels.push(b);
    }
    (x, labels)
}

fn pairwise(x: &Array2<f64>) -> Array2<f64> {
    let n = x.nrows();
    Array2::from_shape_fn((n, n), |(i, j)| common::euclidean(x, i, j))
}

#[test]
fn separated_blobs_are_classified_perfectly() {
    let (x, labels) = blobs(50, 100.0);
    assert_eq!(eval::knn_accuracy(x.view(), &labels, 5, 0).unwrap(), 1.0);
}

#[test]
fn random_labels_are_at_chance() {
    let x = gaussian_data(500, 5, 2).into_values();
    let mut rng = seed::rng(3);
    let labels: Vec<i64> = (0..500).map(|_| rng.random_range(0..2)).collect();
    let acc = eval::knn_accuracy(x.view(), &labels, 5, 4).unwrap();
    assert!((0.4..=0.6).contains(&acc), "{acc}");
}

#[test]
fn duplicated_points_match_themselves() {
    let x = gaussian_data(60, 4, 5).into_values();
    let labels: Vec<i64> = (0..60).map(|i| i % 3).collect();
    let pred = eval::knn_predict(x.view(), &labels, x.view(), 1).unwrap();
    assert_eq!(pred, labels);
}

#[test]
fn singleton_class_is_rejected() {
    let x = gaussian_data(10, 2, 6).into_values();
    let mut labels = vec![0i64; 10];
    labels[9] = 1;
    assert!(eval::knn_accuracy(x.view(), &labels, 3, 0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn knn_ignores_orthogonal_maps(s in any::<u64>()) {
        let x = gaussian_data(80, 6, s).into_values();
        let labels: Vec<i64> = x.column(0).iter().map(|v| (*v > 0.0) as i64 + 2 * (x.len() as i64 % 2)).collect();
        prop_assume!(labels.iter().filter(|l| **l == labels[0]).count() >= 2);
        prop_assume!(labels.iter().filter(|l| **l != labels[0]).count() >= 2);
        let q = random_orthogonal(6, s ^ 5);
        let a = eval::knn_accuracy(x.view(), &labels, 5, s).unwrap();
        let b = eval::knn_accuracy(x.dot(&q).view(), &labels, 5, s).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn mi_is_exactly_symmetric(a in prop::collection::vec(-5.0f64..5.0, 64..200), shift in 0.0f64..3.0) {
        let b: Vec<f64> = a.iter().enumerate().map(|(i, v)| (v * 1.3 + shift * (i % 7) as f64).sin()).collect();
        let ab = eval::mutual_information(&a, &b, 8).unwrap().value;
        let ba = eval::mutual_information(&b, &a, 8).unwrap().value;
        prop_assert_eq!(ab.to_bits(), ba.to_bits());
        prop_assert!(ab >= 0.0);
    }

    #[test]
    fn demap_ignores_monotone_rescaling(s in any::<u64>(), power in 0.5f64..3.0) {
        let x = gaussian_data(30, 3, s).into_values();
        let g = pairwise(&uniform_data(30, 2, s ^ 9).into_values());
        let warped = g.mapv(|d| d.powf(power) + 2.0 * d);
        let a = eval::demap(x.view(), &g).unwrap();
        let b = eval::demap(x.view(), &warped).unwrap();
        let c = eval::demap((x.clone() * 7.5).view(), &g).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!((a - c).abs() < 1e-12);
    }
}

#[test]
fn demap_of_a_line() {
    let s: Vec<f64> = (0..40).map(|i| (i as f64).powf(1.3)).collect();
    let g = Array2::from_shape_fn((40, 40), |(i, j)| (s[i] - s[j]).abs());
    let line = Array2::from_shape_fn((40, 1), |(i, _)| s[i]);
    assert!((eval::demap(line.view(), &g).unwrap() - 1.0).abs() < 1e-12);
    // geodesics that are a monotone transform of the embedding distances
    let x = gaussian_data(40, 3, 8).into_values();
    let warped = pairwise(&x).mapv(f64::exp_m1);
    assert!((eval::demap(x.view(), &warped).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn demap_of_a_random_embedding_is_near_zero() {
    let tree = make_tree(&TreeSpec { points_per_branch: 40, ..Default::default() }).unwrap();
    let g = tree.geodesics.unwrap();
    let x = gaussian_data(200, 5, 10).into_values();
    let rho = eval::demap(x.view(), &g).unwrap();
    assert!(rho.abs() < 0.1, "{rho}");
}

#[test]
fn demap_rejects_constant_and_asymmetric() {
    let x = gaussian_data(5, 2, 1).into_values();
    let flat = Array2::from_shape_fn((5, 5), |(i, j)| if i == j { 0.0 } else { 1.0 });
    assert!(matches!(eval::demap(x.view(), &flat), Err(Error::Numerical(_))));
    let mut lopsided = pairwise(&x);
    lopsided[[0, 1]] += 1.0;
    assert!(eval::demap(x.view(), &lopsided).is_err());
}

#[test]
fn mi_reference_values() {
    let mut rng = seed::rng(12);
    let a: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
    let b: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
    let same = eval::mutual_information(&a, &a, 8).unwrap().value;
    assert!((same - 8f64.ln()).abs() < 0.05 * 8f64.ln(), "{same}");
    let neg: Vec<f64> = a.iter().map(|v| -v).collect();
    assert_eq!(eval::mutual_information(&a, &neg, 8).unwrap().value, same);
    let indep = eval::mutual_information(&a, &b, 8).unwrap().value;
    assert!(indep < 0.02, "{indep}");
    let flat = vec![1.0; 100];
    let m = eval::mutual_information(&flat, &a[..100], 8).unwrap();
    assert!(m.degenerate && m.value == 0.0);
    assert!(eval::mutual_information(&a[..63], &b[..63], 8).is_err());
}

#[test]
fn noiseless_pairs_keep_their_information() {
    let spec = CoupledSpec { noise: 0.0, dropout: 0.0, seed: 1, ..Default::default() };
    let set = make_coupled(&spec).unwrap();
    let (g1, g2) = (set.ground_truth.as_ref().unwrap(), set.ground_truth2.as_ref().unwrap());
    let pre = eval::paired_mi(g1, g2, spec.pairs, 8).unwrap().0;
    let mut methods = vec![DenoiseMethod::None, DenoiseMethod::ModalitySpecific];
    methods.extend(FusionStrategy::ALL.map(DenoiseMethod::Fused));
    let report = eval::mi_recovery_benchmark(&set, &methods, &FusionConfig::default(), 8).unwrap();
    for e in &report.entries {
        assert!((e.value - pre).abs() <= 0.05 * pre, "{}: {} vs {pre}", e.strategy, e.value);
    }
    assert_eq!(report.value("none"), Some(pre));
}

#[test]
fn sparsified_pairs_hide_their_information() {
    let set = make_coupled(&CoupledSpec { seed: 2, ..Default::default() }).unwrap();
    let raw = eval::paired_mi(&set.modality1, &set.modality2, set.planted_pairs, 8).unwrap().0;
    assert!(raw < 0.05, "{raw}");
}

#[test]
fn report_serializes() {
    let (x, labels) = blobs(20, 50.0);
    let r = eval::knn_report("blobs", x.view(), &labels, 3, 0).unwrap();
    let json = r.to_json().unwrap();
    assert!(json.contains("\"knn_accuracy\""));
    assert_eq!(serde_json::from_str::<eval::EvalReport>(&json).unwrap(), r);
}
