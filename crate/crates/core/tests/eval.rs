mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use skewcwm::eval::{ari, best_matching, confusion};

#[test]
fn textbook_values_are_exact() {
    assert_eq!(ari(&[0, 0, 1, 1, 2], &[0, 0, 1, 1, 2]).unwrap(), 1.0);
    assert_eq!(ari(&[1, 1, 2, 2], &[1, 2, 1, 2]).unwrap(), -0.5);
    assert_eq!(ari(&[0, 0, 1, 1], &[5, 5, 9, 9]).unwrap(), 1.0);
}

#[test]
fn random_labelings_average_zero() {
    let mut r = rng(2024);
    let n = 200;
    let draws = 1000;
    let mut total = 0.0;
    for _ in 0..draws {
        let a: Vec<usize> = (0..n).map(|_| r.random_range(0..3)).collect();
        let b: Vec<usize> = (0..n).map(|_| r.random_range(0..3)).collect();
        total += ari(&a, &b).unwrap();
    }
    let mean = total / draws as f64;
    assert!(mean.abs() <= 0.02, "{mean}");
}

#[test]
fn contingency_margins_are_class_sizes() {
    let a = [2, 2, 0, 1, 1, 1];
    let b = [7, 3, 3, 3, 7, 7];
    let c = confusion(&a, &b).unwrap();
    assert_eq!(c.row_labels, vec![0, 1, 2]);
    assert_eq!(c.col_labels, vec![3, 7]);
    let rows: Vec<usize> = c.counts.row_iter().map(|r| r.sum()).collect();
    assert_eq!(rows, vec![1, 3, 2]);
    assert_eq!(c.counts.iter().sum::<usize>(), 6);
}

#[test]
fn matching_undoes_a_relabeling() {
    let truth = [0, 0, 1, 1, 2, 2, 2];
    let pred = [2, 2, 0, 0, 1, 1, 0];
    let perm = best_matching(&truth, &pred, 3);
    assert_eq!(perm, vec![1, 2, 0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn agrees_with_pair_counting(a in prop::collection::vec(0usize..4, 2..60), seed in 0u64..1000) {
        let mut r = rng(seed);
        let b: Vec<usize> = a.iter().map(|&x| if r.random::<f64>() < 0.6 { x } else { r.random_range(0..4) }).collect();
        let got = ari(&a, &b).unwrap();
        let want = oracle::ari_pairs(&a, &b);
        if want.is_finite() {
            prop_assert!((got - want).abs() < 1e-12, "{} vs {}", got, want);
        }
    }

    #[test]
    fn invariant_under_relabeling_and_symmetric(a in prop::collection::vec(0usize..4, 2..60), b in prop::collection::vec(0usize..4, 60)) {
        let b = &b[..a.len()];
        let relabeled: Vec<usize> = a.iter().map(|&x| [3, 0, 2, 1][x] + 10).collect();
        let v = ari(&a, b).unwrap();
        prop_assert_eq!(v, ari(&relabeled, b).unwrap());
        prop_assert_eq!(v, ari(b, &a).unwrap());
        prop_assert!(v <= 1.0);
    }
}
