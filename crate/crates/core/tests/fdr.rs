mod common;

use omicsmap::fdr::{
    estimate_pi0, perm_pvalues, qvalues_with_pi0, storey_qvalues, PValueMethod, PValueSet,
    DEFAULT_THRESHOLDS,
};
use omicsmap::numerics::{Matrix, SeededRng};
use proptest::prelude::*;

fn ids(m: usize) -> Vec<String> {
    (0..m).map(|j| format!("f{j}")).collect()
}

fn pset(p: Vec<f64>) -> PValueSet {
    PValueSet::new(ids(p.len()), p, PValueMethod::Permutation).unwrap()
}

fn interleaved(n: usize) -> Vec<u8> {
    (0..n).map(|i| (i % 2) as u8).collect()
}

#[test]
fn unit_pi0_reproduces_benjamini_hochberg() {
    let mut rng = SeededRng::new(40);
    for case in 0..100 {
        let m = 1 + rng.below(300);
        let p: Vec<f64> = (0..m)
            .map(|_| {
                // mix of signal, nulls and exact ties
                match rng.below(4) {
                    0 => rng.uniform() * 1e-3,
                    1 => (rng.below(20) as f64) / 20.0,
                    _ => rng.uniform(),
                }
            })
            .collect();
        let table = qvalues_with_pi0(&pset(p.clone()), 1.0, &DEFAULT_THRESHOLDS).unwrap();
        assert_eq!(table.q, common::bh_adjust(&p), "case {case}");
    }
}

#[test]
fn single_test_is_its_own_q_value() {
    let t = storey_qvalues(&pset(vec![0.04]), 0.0, &DEFAULT_THRESHOLDS).unwrap();
    assert_eq!(t.pi0, 1.0);
    assert_eq!(t.q, vec![0.04]);
    assert_eq!(t.significant[0], vec![false, true, true]);
}

#[test]
fn evenly_spaced_p_values_match_double_loop() {
    let p: Vec<f64> = (1..=100).map(|k| k as f64 / 100.0).collect();
    let t = storey_qvalues(&pset(p.clone()), 0.5, &DEFAULT_THRESHOLDS).unwrap();
    assert_eq!(t.pi0, 1.0);
    for i in 0..100 {
        let mut best = f64::INFINITY;
        for k in i..100 {
            best = best.min(p[k] * 100.0 / (k + 1) as f64);
        }
        assert!((t.q[i] - best.min(1.0)).abs() < 1e-15);
    }
}

#[test]
fn pi0_estimate_counts_the_upper_tail() {
    let p = [0.001, 0.002, 0.01, 0.03, 0.6, 0.9];
    assert!((estimate_pi0(&p, 0.5).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    assert_eq!(estimate_pi0(&[0.6, 0.7, 0.8, 0.1], 0.5).unwrap(), 1.0);
    assert_eq!(estimate_pi0(&[0.01, 0.02], 0.5).unwrap(), 0.5);
    assert!(estimate_pi0(&[], 0.5).is_err());
    assert!(estimate_pi0(&[0.1], 1.0).is_err());
}

#[test]
fn empty_set_is_rejected() {
    assert!(storey_qvalues(&pset(vec![]), 0.5, &DEFAULT_THRESHOLDS).is_err());
}

#[test]
fn permutation_p_values_match_exhaustive_enumeration() {
    let mut rng = SeededRng::new(41);
    for labels in [vec![0, 1, 0, 1, 0, 1, 0, 1], vec![1, 1, 1, 0, 0, 0, 0, 0]] {
        let x = Matrix::from_fn(8, 12, |_, c| if c == 11 { 1.0 } else { rng.standard_normal() });
        let set = perm_pvalues(&x, &labels, ids(12), 999, &SeededRng::new(1)).unwrap();
        assert_eq!(set.method, PValueMethod::ExactPermutation);
        for j in 0..12 {
            assert_eq!(set.p[j], common::exhaustive_perm_pvalue(&x.col(j), &labels), "feature {j}");
        }
    }
}

#[test]
fn label_copy_reaches_the_floor() {
    let labels = interleaved(30);
    let x = Matrix::from_fn(30, 1, |r, _| f64::from(labels[r]));
    let set = perm_pvalues(&x, &labels, ids(1), 199, &SeededRng::new(2)).unwrap();
    assert_eq!(set.method, PValueMethod::Permutation);
    assert_eq!(set.p[0], 1.0 / 200.0);
}

#[test]
fn p_values_never_drop_below_the_floor() {
    let mut rng = SeededRng::new(42);
    let labels = interleaved(24);
    let x = Matrix::from_fn(24, 50, |_, _| rng.standard_normal());
    let set = perm_pvalues(&x, &labels, ids(50), 199, &SeededRng::new(3)).unwrap();
    assert!(set.p.iter().all(|&p| p >= 1.0 / 200.0 && p <= 1.0));
}

#[test]
fn null_p_values_are_super_uniform() {
    let mut rng = SeededRng::new(43);
    let n = 30;
    let labels = interleaved(n);
    let x = Matrix::from_fn(n, 2000, |_, _| rng.standard_normal());
    let set = perm_pvalues(&x, &labels, ids(2000), 999, &SeededRng::new(4)).unwrap();
    let frac = set.p.iter().filter(|&&p| p <= 0.05).count() as f64 / 2000.0;
    assert!(frac <= 0.08, "ECDF(0.05) = {frac}");
}

#[test]
fn permutation_input_errors() {
    let x = Matrix::zeros(6, 2);
    assert!(perm_pvalues(&x, &[1; 6], ids(2), 199, &SeededRng::new(0)).is_err());
    assert!(perm_pvalues(&x, &interleaved(6), ids(2), 98, &SeededRng::new(0)).is_err());
    assert!(perm_pvalues(&x, &interleaved(5), ids(2), 199, &SeededRng::new(0)).is_err());
}

#[test]
fn permutation_p_values_are_reproducible() {
    let mut rng = SeededRng::new(44);
    let labels = interleaved(40);
    let x = Matrix::from_fn(40, 20, |_, _| rng.standard_normal());
    let a = perm_pvalues(&x, &labels, ids(20), 499, &SeededRng::new(5)).unwrap();
    let b = perm_pvalues(&x, &labels, ids(20), 499, &SeededRng::new(5)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn csv_lists_pi0_and_flags() {
    let t = storey_qvalues(&pset(vec![0.001, 0.5, 0.04]), 0.5, &DEFAULT_THRESHOLDS).unwrap();
    let csv = t.to_csv(&["seed=1".to_string()]);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "# seed=1");
    assert!(lines[1].starts_with("# pi0="));
    assert_eq!(lines[2], "feature,p,q,sig_0.01,sig_0.05,sig_0.10");
    assert!(lines[3].starts_with("f0,0.001,"));
    assert_eq!(lines.len(), 6);
}

proptest! {
    #[test]
    fn q_values_are_monotone_and_bounded(p in prop::collection::vec(0.0f64..=1.0, 1..200), lambda in 0.0f64..0.95) {
        let t = storey_qvalues(&pset(p.clone()), lambda, &DEFAULT_THRESHOLDS).unwrap();
        prop_assert!(t.pi0 > 0.0 && t.pi0 <= 1.0);
        let m = p.len() as f64;
        let mut order: Vec<usize> = (0..p.len()).collect();
        order.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
        for w in order.windows(2) {
            prop_assert!(t.q[w[0]] <= t.q[w[1]]);
        }
        for (rank, &i) in order.iter().enumerate() {
            prop_assert!((0.0..=1.0).contains(&t.q[i]));
            // the running minimum never raises the raw ratio
            prop_assert!(t.q[i] <= t.pi0 * m * p[i] / (rank + 1) as f64 + 1e-15);
            for (k, &thr) in t.thresholds.iter().enumerate() {
                prop_assert_eq!(t.significant[i][k], t.q[i] < thr);
            }
        }
    }
}
