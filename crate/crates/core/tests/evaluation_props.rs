mod common;

use proptest::prelude::*;

use sbm_core::evaluation::{agreement, exact_match, hungarian};

use common::{brute_agreement, permutations};

fn labeling_pair() -> impl Strategy<Value = (usize, Vec<usize>, Vec<usize>)> {
    (1usize..8, 1usize..80).prop_flat_map(|(k, n)| {
        (Just(k), prop::collection::vec(0..k, n), prop::collection::vec(0..k, n))
    })
}

proptest! {
    #[test]
    fn matches_permutation_brute_force((k, a, b) in labeling_pair()) {
        let n = a.len() as f64;
        let got = agreement(&a, &b, k).unwrap().accuracy;
        prop_assert_eq!((got * n).round(), (brute_agreement(&a, &b, k) * n).round());
    }

    #[test]
    fn invariant_under_relabeling((k, a, b) in labeling_pair(), shift in 0usize..8) {
        let relabeled: Vec<usize> = a.iter().map(|&x| (x + shift) % k).collect();
        let base = agreement(&a, &b, k).unwrap().accuracy;
        prop_assert_eq!(agreement(&relabeled, &b, k).unwrap().accuracy, base);
        prop_assert_eq!(agreement(&b, &a, k).unwrap().accuracy, base);
    }

    #[test]
    fn at_least_the_largest_overlap((k, a, b) in labeling_pair()) {
        let acc = agreement(&a, &b, k).unwrap().accuracy;
        let identity = a.iter().zip(&b).filter(|(x, y)| x == y).count() as f64 / a.len() as f64;
        prop_assert!(acc >= identity);
        prop_assert!(acc >= 1.0 / k as f64 - 1e-12 || a.len() < k);
    }

    #[test]
    fn exact_only_for_relabelings((k, a, _b) in labeling_pair(), shift in 0usize..8) {
        let relabeled: Vec<usize> = a.iter().map(|&x| (x + shift) % k).collect();
        prop_assert!(exact_match(&relabeled, &a, k).unwrap());
    }

    #[test]
    fn hungarian_is_optimal(k in 1usize..7, entries in prop::collection::vec(-50i32..50, 36)) {
        let cost: Vec<Vec<f64>> = (0..k).map(|i| (0..k).map(|j| entries[i * 6 + j] as f64).collect()).collect();
        let assign = hungarian(&cost);
        let total: f64 = assign.iter().enumerate().map(|(r, &c)| cost[r][c]).sum();
        let best = permutations(k)
            .iter()
            .map(|p| p.iter().enumerate().map(|(r, &c)| cost[r][c]).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        prop_assert_eq!(total, best);
        let mut cols = assign.clone();
        cols.sort_unstable();
        prop_assert_eq!(cols, (0..k).collect::<Vec<_>>());
    }
}
