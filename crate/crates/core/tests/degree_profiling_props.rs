mod common;

use proptest::prelude::*;

use sbm_core::degree_profiling::{
    align_clusters, degree_profile, degree_profiling, group_classify, map_classify, DegreeProfile,
    DegreeProfilingOptions,
};
use sbm_core::divergence::Partition;
use sbm_core::{sample_graph, Graph, ModelParams, Regime, SbmError};

use common::full_log_posterior;

fn params_and_profile() -> impl Strategy<Value = (ModelParams, Vec<u32>, f64)> {
    (2usize..5)
        .prop_flat_map(|k| {
            (
                Just(k),
                prop::collection::vec(0.2f64..1.0, k),
                prop::collection::vec(0.5f64..20.0, k * k),
                prop::collection::vec(0u32..40, k),
                0.5f64..8.0,
            )
        })
        .prop_filter_map("duplicate rows", |(k, raw, entries, d, scale)| {
            let total: f64 = raw.iter().sum();
            let p: Vec<f64> = raw.iter().map(|x| x / total).collect();
            let q: Vec<Vec<f64>> =
                (0..k).map(|i| (0..k).map(|j| entries[i.min(j) * k + i.max(j)]).collect()).collect();
            ModelParams::new(p, q, Regime::Logarithmic).ok().map(|params| (params, d, scale))
        })
}

fn oracle_scores(params: &ModelParams, d: &[u32], scale: f64) -> Vec<f64> {
    let k = params.k();
    (0..k)
        .map(|j| {
            let means: Vec<f64> = (0..k).map(|i| scale * params.prior()[i] * params.q(i, j)).collect();
            full_log_posterior(d, &means, params.prior()[j])
        })
        .collect()
}

proptest! {
    #[test]
    fn map_matches_full_posterior((params, d, scale) in params_and_profile()) {
        let scores = oracle_scores(&params, &d, scale);
        let got = map_classify(&DegreeProfile { d: d.clone() }, &params, scale).unwrap();
        let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(scores[got] >= best - 1e-9 * (1.0 + best.abs()));
    }

    #[test]
    fn group_matches_mixture_posterior((params, d, scale) in params_and_profile()) {
        let k = params.k();
        let partition = Partition::new(k, vec![vec![0], (1..k).collect()]).unwrap();
        let scores = oracle_scores(&params, &d, scale);
        let mixture: Vec<f64> = partition
            .groups()
            .iter()
            .map(|g| g.iter().map(|&j| scores[j].exp()).sum::<f64>().ln())
            .collect();
        let got = group_classify(&DegreeProfile { d }, &params, scale, &partition).unwrap();
        let best = mixture.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(mixture[got] >= best - 1e-9 * (1.0 + best.abs()));
    }

    #[test]
    fn profile_sums_to_degree(seed in any::<u64>()) {
        let params = ModelParams::symmetric(3, 10.0, 4.0, Regime::Constant).unwrap();
        let planted = sample_graph(&params, 200, seed).unwrap();
        for v in 0..200 {
            let d = degree_profile(&planted.graph, v, &planted.labels, 3);
            prop_assert_eq!(d.d.iter().sum::<u32>() as usize, planted.graph.degree(v));
        }
    }
}

#[test]
fn alignment_undoes_a_relabeling() {
    let params = ModelParams::new(
        vec![0.2, 0.3, 0.5],
        vec![vec![20.0, 2.0, 1.0], vec![2.0, 12.0, 3.0], vec![1.0, 3.0, 8.0]],
        Regime::Constant,
    )
    .unwrap();
    let planted = sample_graph(&params, 6000, 9).unwrap();
    let scrambled: Vec<usize> = planted.labels.iter().map(|&l| (l + 1) % 3).collect();
    assert_eq!(align_clusters(&scrambled, &params, &planted.graph), planted.labels);
}

#[test]
fn zero_kernel_entries_are_not_applicable() {
    let params = ModelParams::new(vec![0.5, 0.5], vec![vec![5.0, 0.0], vec![0.0, 5.0]], Regime::Logarithmic).unwrap();
    let g = Graph::empty(10);
    let res = degree_profiling(&g, &params, 0, &DegreeProfilingOptions::default());
    assert!(matches!(res, Err(SbmError::NotApplicable(_))));
}

#[test]
fn indistinguishable_model_yields_one_group() {
    let params = ModelParams::symmetric(2, 5.0, 4.0, Regime::Logarithmic).unwrap();
    let planted = sample_graph(&params, 300, 1).unwrap();
    let res = degree_profiling(&planted.graph, &params, 1, &DegreeProfilingOptions::default()).unwrap();
    assert_eq!(res.assignment.groups, vec![vec![0, 1]]);
    assert!(res.assignment.assignment.iter().all(|&g| g == 0));
}

#[test]
fn gamma_outside_unit_interval_is_rejected() {
    let params = ModelParams::symmetric(2, 25.0, 4.0, Regime::Logarithmic).unwrap();
    let g = Graph::empty(10);
    let options = DegreeProfilingOptions { gamma: Some(1.5), ..Default::default() };
    assert!(matches!(degree_profiling(&g, &params, 0, &options), Err(SbmError::ParameterError(_))));
}
