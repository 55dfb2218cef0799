mod common;

use common::{gaussian_data, max_diff, naive_matmul, naive_power, op_of, permutation};
use idiff::operator::{self, Bandwidth, Kernel};
use idiff::{Markov, DataMatrix};
use ndarray::{array, Array2, Axis};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn rows_are_stochastic(n in 2usize..40, d in 1usize..6, seed in any::<u64>()) {
        let p = op_of(&gaussian_data(n, d, seed));
        prop_assert!(p.row_sum_error() <= 1e-10);
        prop_assert!(p.values().iter().all(|v| *v >= 0.0));
        prop_assert!(p.degrees().iter().all(|d| *d > 0.0));
    }

    #[test]
    fn kernel_is_exactly_symmetric(n in 2usize..40, d in 1usize..6, seed in any::<u64>()) {
        let k = operator::gaussian_kernel(&gaussian_data(n, d, seed), Bandwidth::default()).unwrap();
        let v = k.values();
        prop_assert_eq!(v, &v.t().to_owned());
        prop_assert!(v.diag().iter().all(|x| *x == 1.0));
    }

    #[test]
    fn powers_compose(a in 0u32..8, b in 0u32..8, seed in any::<u64>()) {
        let p = op_of(&gaussian_data(20, 3, seed));
        let lhs = operator::power(&p, a + b);
        let rhs = naive_matmul(operator::power(&p, a).values(), operator::power(&p, b).values());
        prop_assert!(max_diff(lhs.values(), &rhs) < 1e-9);
        prop_assert!(lhs.row_sum_error() <= 1e-9);
    }

    #[test]
    fn power_matches_repeated_multiplication(t in 0u32..12, seed in any::<u64>()) {
        let p = op_of(&gaussian_data(15, 2, seed));
        let oracle = naive_power(p.values(), t);
        prop_assert!(max_diff(operator::power(&p, t).values(), &oracle) < 1e-10);
    }

    #[test]
    fn permuting_rows_conjugates_the_operator(n in 3usize..30, seed in any::<u64>()) {
        let x = gaussian_data(n, 3, seed);
        let sigma = permutation(n, seed ^ 1);
        let px = op_of(&x);
        let pp = op_of(&DataMatrix::new(x.values().select(Axis(0), &sigma)).unwrap());
        let expected = px.values().select(Axis(0), &sigma).select(Axis(1), &sigma);
        prop_assert!(max_diff(pp.values(), &expected) < 1e-12);
    }
}

#[test]
fn stationary_distribution_is_invariant() {
    let p = op_of(&gaussian_data(30, 4, 9));
    let pi = p.stationary();
    let moved = pi.view().insert_axis(Axis(0)).dot(p.values());
    for (a, b) in moved.iter().zip(pi.iter()) {
        approx::assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }
}

#[test]
fn doubly_stochastic_power_converges_to_uniform() {
    // a ring with equal weights is symmetric, so P is doubly stochastic
    let n = 5;
    let mut k = Array2::<f64>::eye(n);
    for i in 0..n {
        k[[i, (i + 1) % n]] = 0.5;
        k[[(i + 1) % n, i]] = 0.5;
    }
    let p = operator::diffusion_operator(&Kernel::from_values(k, 1.0).unwrap()).unwrap();
    let p50 = operator::power(&p, 50);
    let oracle = naive_power(p.values(), 50);
    assert!(max_diff(p50.values(), &oracle) < 1e-12);
    for v in p50.values().iter() {
        assert!((v - 1.0 / n as f64).abs() < 1e-6);
    }
}

#[test]
fn two_point_square() {
    let k = Kernel::from_values(array![[1.0, 0.5], [0.5, 1.0]], 1.0).unwrap();
    let p = operator::diffusion_operator(&k).unwrap();
    let p2 = operator::power(&p, 2);
    let expected = array![[5.0 / 9.0, 4.0 / 9.0], [4.0 / 9.0, 5.0 / 9.0]];
    assert!(max_diff(p2.values(), &expected) < 1e-15);
    assert_eq!(operator::power(&p, 0).values(), &Array2::<f64>::eye(2));
}

#[test]
fn kernel_errors() {
    let one = DataMatrix::new(array![[1.0, 2.0]]).unwrap();
    assert!(matches!(
        operator::gaussian_kernel(&one, Bandwidth::default()),
        Err(idiff::Error::Size { .. })
    ));
    let two = DataMatrix::new(array![[0.0], [1.0]]).unwrap();
    assert!(operator::gaussian_kernel(&two, Bandwidth::fixed(0.0)).is_err());
    assert!(operator::gaussian_kernel(&two, Bandwidth::fixed(f64::NAN)).is_err());
}
