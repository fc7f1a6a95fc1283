mod common;

use common::oracles::{enumerated_p, pairwise_a12, random_differences};
use flakesim::stats::{vargha_delaney_a12, wilcoxon_with, Alternative, Magnitude, Method};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn exact_p_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..300 {
        let n = rng.random_range(5..=12);
        let tied = rng.random_bool(0.5);
        let b = vec![0.0; n];
        let a = random_differences(&mut rng, n, tied);
        for alt in [Alternative::Less, Alternative::Greater, Alternative::TwoSided] {
            let w = wilcoxon_with(&a, &b, alt, Method::Exact).unwrap();
            let oracle = enumerated_p(&a, alt);
            assert!(
                (w.p_value - oracle).abs() <= 1e-12,
                "{a:?} {alt:?}: {} vs {oracle}",
                w.p_value
            );
        }
    }
}

#[test]
fn rank_sums_of_alternating_differences() {
    let a = [1.0, -2.0, 3.0, -4.0, 5.0];
    let w = wilcoxon_with(&a, &[0.0; 5], Alternative::TwoSided, Method::Exact).unwrap();
    assert_eq!((w.w_plus, w.w_minus, w.statistic), (9.0, 6.0, 6.0));
}

#[test]
fn normal_approximation_tracks_exact_for_twenty_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..50 {
        let a: Vec<f64> = (0..20).map(|_| rng.random_range(-1.0..1.5)).collect();
        let b = vec![0.0; 20];
        let e = wilcoxon_with(&a, &b, Alternative::TwoSided, Method::Exact).unwrap();
        let z = wilcoxon_with(&a, &b, Alternative::TwoSided, Method::Normal).unwrap();
        assert!((e.p_value - z.p_value).abs() < 0.02, "{} vs {}", e.p_value, z.p_value);
    }
}

#[test]
fn a12_matches_pairwise_counting_and_is_antisymmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..1000 {
        let sample = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            (0..rng.random_range(1..30))
                .map(|_| rng.random_range(0..8) as f64 * 0.5)
                .collect()
        };
        let a = sample(&mut rng);
        let b = sample(&mut rng);
        let (ab, _) = vargha_delaney_a12(&a, &b);
        let (ba, _) = vargha_delaney_a12(&b, &a);
        assert!((ab - pairwise_a12(&a, &b)).abs() < 1e-12);
        assert_eq!(ab + ba, 1.0, "{a:?} {b:?}");
    }
}

#[test]
fn a12_examples() {
    assert_eq!(vargha_delaney_a12(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).0, 0.0);
    assert_eq!(vargha_delaney_a12(&[1.0, 3.0], &[2.0, 4.0]).0, 0.25);
    assert_eq!(
        vargha_delaney_a12(&[2.0, 1.0], &[1.0, 2.0]),
        (0.5, Magnitude::Negligible)
    );
}

proptest! {
    #[test]
    fn swapping_samples_mirrors_one_sided_p(d in prop::collection::vec(prop_oneof![-3.0f64..-0.1, 0.1f64..3.0], 5..12)) {
        let zero = vec![0.0; d.len()];
        let less = wilcoxon_with(&d, &zero, Alternative::Less, Method::Exact).unwrap();
        let greater = wilcoxon_with(&zero, &d, Alternative::Greater, Method::Exact).unwrap();
        prop_assert_eq!(less.p_value, greater.p_value);
        prop_assert!(less.p_value > 0.0 && less.p_value <= 1.0);
    }
}
