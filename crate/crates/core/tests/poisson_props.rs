mod common;

use proptest::prelude::*;

use sbm_core::poisson::{ln_factorials, ln_pmf, map_error_bounds, overlap_sum, poisson_upper_tail};

use common::{exhaustive_map_error, poisson_pmf_table};

proptest! {
    #[test]
    fn overlap_is_symmetric_and_bounded(
        t1 in prop::collection::vec(0.1f64..5.0, 2),
        t2 in prop::collection::vec(0.1f64..5.0, 2),
        p1 in 0.05f64..0.95,
        lnn in 1.0f64..5.0,
    ) {
        let p2 = 1.0 - p1;
        let a = overlap_sum(&t1, &t2, p1, p2, lnn).unwrap();
        let b = overlap_sum(&t2, &t1, p2, p1, lnn).unwrap();
        prop_assert!((a.value - b.value).abs() <= 1e-12);
        prop_assert!(a.value <= p1.min(p2) + 1e-12);
        prop_assert!(a.value >= 0.0);
    }

    #[test]
    fn two_hypothesis_overlap_is_the_map_error(
        t1 in prop::collection::vec(0.1f64..4.0, 2),
        t2 in prop::collection::vec(0.1f64..4.0, 2),
        p1 in 0.05f64..0.95,
    ) {
        let lnn = 2.0;
        let p2 = 1.0 - p1;
        let est = overlap_sum(&t1, &t2, p1, p2, lnn).unwrap();
        let means = vec![t1.iter().map(|x| lnn * x).collect(), t2.iter().map(|x| lnn * x).collect()];
        let exact = exhaustive_map_error(&means, &[p1, p2], &est.truncation_box);
        prop_assert!((est.value - exact).abs() <= 1e-12);
        let bounds = map_error_bounds(&[t1, t2], &[p1, p2], lnn).unwrap();
        prop_assert_eq!(bounds.lower, bounds.upper);
    }

    #[test]
    fn pmf_matches_recursion(mean in 0.01f64..60.0) {
        let table = poisson_pmf_table(mean, 150);
        let ln_fact = ln_factorials(150);
        for (x, &p) in table.iter().enumerate() {
            let got = ln_pmf(x as u32, mean, &ln_fact).exp();
            prop_assert!((got - p).abs() <= 1e-12 * (1.0 + p) + 1e-300);
        }
    }

    #[test]
    fn chernoff_tail_dominates_exact_tail(mean in 0.1f64..30.0, extra in 1u32..40) {
        let a = mean.ceil() as u32 + extra;
        let table = poisson_pmf_table(mean, a + 400);
        let exact: f64 = table[a as usize..].iter().sum();
        prop_assert!(poisson_upper_tail(mean, a as f64) >= exact * (1.0 - 1e-9));
    }
}

#[test]
fn overlap_decays_with_ln_n() {
    let (t1, t2) = ([4.5, 0.5], [0.5, 4.5]);
    let values: Vec<f64> = [2.0, 4.0, 6.0, 8.0].iter().map(|&l| overlap_sum(&t1, &t2, 0.5, 0.5, l).unwrap().value).collect();
    assert!(values.windows(2).all(|w| w[1] < w[0]), "{values:?}");
}

#[test]
fn identical_hypotheses_overlap_fully() {
    let est = overlap_sum(&[2.0, 1.0], &[2.0, 1.0], 0.3, 0.7, 3.0).unwrap();
    assert!((est.value - 0.3).abs() < 1e-10, "{}", est.value);
}
