//! Degree profiling: exact recovery in the logarithmic-degree regime.
//!
//! A fraction `gamma` of the edges is used for a preliminary sphere-comparison
//! labeling. Every vertex is then reclassified twice from its neighbor counts
//! in the remaining edges, first to a community by Poisson MAP and then to a
//! group of the finest partition by the mixture likelihood.

use rayon::prelude::*;

use crate::divergence::{finest_partition, DivergenceReport, DivergenceMode, Partition};
use crate::error::{Result, SbmError};
use crate::evaluation::{best_permutation, hungarian, BRUTE_FORCE_MAX_K};
use crate::model::{split_edges_stream, Graph, ModelParams, Regime};
use crate::rng::{stream, tag};
use crate::spectral::eigen_summary;
use crate::sphere::{reliable_classification, resolve_hyperparams, SphereOverrides};

pub const GAMMA_MIN: f64 = 0.05;
pub const GAMMA_MAX: f64 = 0.5;

/// Neighbor counts of one vertex per (alleged) community.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeProfile {
    pub d: Vec<u32>,
}

/// Final group per vertex, indexing into `groups`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupAssignment {
    pub groups: Vec<Vec<usize>>,
    pub assignment: Vec<usize>,
}

pub fn degree_profile(graph: &Graph, v: usize, labels: &[usize], k: usize) -> DegreeProfile {
    let mut d = vec![0u32; k];
    for &u in graph.neighbors(v) {
        d[labels[u]] += 1;
    }
    DegreeProfile { d }
}

/// Splitting fraction for the preliminary labeling, given the smallest
/// cross-group divergence `delta`.
pub fn default_gamma(delta: Option<f64>, n: usize) -> f64 {
    let ln_n = (n as f64).ln();
    let correction = if ln_n > 1.0 { ln_n.ln() / (4.0 * ln_n) } else { 0.0 };
    let raw = match delta {
        Some(d) if d > 1.0 => (d - 1.0) / (2.0 * d) + correction,
        _ => GAMMA_MIN.max(correction),
    };
    raw.clamp(GAMMA_MIN, GAMMA_MAX)
}

/// Relabels `prelim` so that alleged cluster sizes and edge densities best
/// match the model. Densities are divided by the regime's edge scale before
/// comparison with `Q`.
pub fn align_clusters(prelim: &[usize], params: &ModelParams, graph: &Graph) -> Vec<usize> {
    let perm = alignment(prelim, params, graph);
    prelim.iter().map(|&a| perm[a]).collect()
}

/// `perm[a]` is the model community matched to alleged cluster `a`.
pub fn alignment(prelim: &[usize], params: &ModelParams, graph: &Graph) -> Vec<usize> {
    let k = params.k();
    let n = graph.n();
    if k == 1 || n == 0 {
        return (0..k).collect();
    }
    let (sizes, density) = cluster_statistics(prelim, params, graph);
    let p = params.prior();
    if k <= BRUTE_FORCE_MAX_K {
        best_permutation(k, |perm| -alignment_cost(perm, &sizes, &density, params))
    } else {
        let sorted = |mut row: Vec<f64>| {
            row.sort_by(f64::total_cmp);
            row
        };
        let model_rows: Vec<Vec<f64>> = params.kernel_rows().into_iter().map(sorted).collect();
        let cost: Vec<Vec<f64>> = (0..k)
            .map(|a| {
                let row = sorted(density[a].clone());
                (0..k)
                    .map(|j| (sizes[a] - p[j]).abs() + row.iter().zip(&model_rows[j]).map(|(x, y)| (x - y).abs()).sum::<f64>())
                    .collect()
            })
            .collect();
        hungarian(&cost)
    }
}

/// Relative sizes and rescaled densities of the alleged clusters.
fn cluster_statistics(prelim: &[usize], params: &ModelParams, graph: &Graph) -> (Vec<f64>, Vec<Vec<f64>>) {
    let k = params.k();
    let n = graph.n();
    let mut size = vec![0f64; k];
    for &a in prelim {
        size[a] += 1.0;
    }
    let mut edges = vec![vec![0f64; k]; k];
    for (u, v) in graph.edges() {
        let (a, b) = (prelim[u], prelim[v]);
        edges[a][b] += 1.0;
        if a != b {
            edges[b][a] += 1.0;
        }
    }
    let scale = params.regime().edge_scale(n);
    let density = (0..k)
        .map(|a| {
            (0..k)
                .map(|b| {
                    let pairs = if a == b { size[a] * (size[a] - 1.0) / 2.0 } else { size[a] * size[b] };
                    if pairs > 0.0 {
                        edges[a][b] / pairs / scale
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    (size.iter().map(|s| s / n as f64).collect(), density)
}

fn alignment_cost(perm: &[usize], sizes: &[f64], density: &[Vec<f64>], params: &ModelParams) -> f64 {
    let k = perm.len();
    let p = params.prior();
    let mut cost = 0.0;
    for a in 0..k {
        cost += (sizes[a] - p[perm[a]]).abs();
        for b in 0..k {
            cost += (density[a][b] - params.q(perm[a], perm[b])).abs();
        }
    }
    cost
}

/// Per-community Poisson log-likelihood terms at a fixed scale.
#[derive(Debug, Clone)]
pub struct PoissonClassifier {
    /// `ln(scale p_i Q_ij)` indexed `[j][i]`.
    log_mean: Vec<Vec<f64>>,
    /// `ln p_j - sum_i scale p_i Q_ij`.
    offset: Vec<f64>,
}

impl PoissonClassifier {
    pub fn new(params: &ModelParams, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(SbmError::ParameterError(format!("scale {scale} must be positive")));
        }
        let k = params.k();
        let p = params.prior();
        let mut log_mean = vec![vec![0.0; k]; k];
        let mut offset = vec![0.0; k];
        for j in 0..k {
            offset[j] = p[j].ln();
            for i in 0..k {
                let mean = scale * p[i] * params.q(i, j);
                if mean <= 0.0 {
                    return Err(SbmError::ZeroEntry(i));
                }
                log_mean[j][i] = mean.ln();
                offset[j] -= mean;
            }
        }
        Ok(PoissonClassifier { log_mean, offset })
    }

    pub fn k(&self) -> usize {
        self.offset.len()
    }

    /// Log-posterior of community `j` up to a term independent of `j`.
    pub fn log_score(&self, d: &[u32], j: usize) -> f64 {
        self.offset[j] + d.iter().zip(&self.log_mean[j]).map(|(&x, &l)| x as f64 * l).sum::<f64>()
    }

    pub fn map(&self, d: &[u32]) -> usize {
        let mut best = 0;
        let mut best_score = self.log_score(d, 0);
        for j in 1..self.k() {
            let s = self.log_score(d, j);
            if s > best_score {
                best = j;
                best_score = s;
            }
        }
        best
    }

    pub fn group(&self, d: &[u32], partition: &Partition) -> usize {
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (s, group) in partition.groups().iter().enumerate() {
            let scores: Vec<f64> = group.iter().map(|&j| self.log_score(d, j)).collect();
            let top = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let total = top + scores.iter().map(|x| (x - top).exp()).sum::<f64>().ln();
            if total > best_score {
                best = s;
                best_score = total;
            }
        }
        best
    }
}

/// Most likely community for a degree profile, ties to the lowest index.
pub fn map_classify(d: &DegreeProfile, params: &ModelParams, scale: f64) -> Result<usize> {
    check_len(d, params)?;
    Ok(PoissonClassifier::new(params, scale)?.map(&d.d))
}

/// Most likely group of `partition` under the prior-weighted mixture.
pub fn group_classify(d: &DegreeProfile, params: &ModelParams, scale: f64, partition: &Partition) -> Result<usize> {
    check_len(d, params)?;
    if partition.k() != params.k() {
        return Err(SbmError::BadPartition(format!("partition of {} communities for k={}", partition.k(), params.k())));
    }
    Ok(PoissonClassifier::new(params, scale)?.group(&d.d, partition))
}

fn check_len(d: &DegreeProfile, params: &ModelParams) -> Result<()> {
    if d.d.len() != params.k() {
        return Err(SbmError::LengthMismatch(d.d.len(), params.k()));
    }
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DegreeProfilingOptions {
    pub gamma: Option<f64>,
    pub sphere: SphereOverrides,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegreeProfilingResult {
    pub assignment: GroupAssignment,
    pub gamma: f64,
    /// Aligned preliminary labeling, empty when the partition is trivial.
    pub preliminary: Vec<usize>,
    /// Community labels after the first reclassification.
    pub refined: Vec<usize>,
    pub forced_fraction: f64,
}

pub fn degree_profiling(
    graph: &Graph,
    params: &ModelParams,
    seed: u64,
    options: &DegreeProfilingOptions,
) -> Result<DegreeProfilingResult> {
    if params.has_zero_entry() {
        return Err(SbmError::NotApplicable("kernel has zero entries".into()));
    }
    let n = graph.n();
    let report = DivergenceReport::compute(params, DivergenceMode::Strict)?;
    let partition = finest_partition(params)?;
    let gamma = match options.gamma {
        Some(g) if g > 0.0 && g < 1.0 => g,
        Some(g) => return Err(SbmError::ParameterError(format!("gamma={g} outside (0, 1)"))),
        None => default_gamma(partition.min_cross(&report.dplus), n),
    };
    let groups = partition.groups().to_vec();
    if partition.len() == 1 {
        return Ok(DegreeProfilingResult {
            assignment: GroupAssignment { groups, assignment: vec![0; n] },
            gamma,
            preliminary: Vec::new(),
            refined: Vec::new(),
            forced_fraction: 0.0,
        });
    }

    let k = params.k();
    let split = split_edges_stream(graph, gamma, &mut stream(seed, tag::GAMMA_SPLIT, 0))?;
    let (g1, g2) = (&split.selected, &split.remainder);
    let ln_n = (n as f64).ln();

    let sparse = params.scaled(gamma * ln_n, Regime::Constant)?;
    let spectral = eigen_summary(&sparse)?;
    let hyper = resolve_hyperparams(&sparse, n, &spectral, &options.sphere)?;
    let prelim = reliable_classification(g1, &sparse, &hyper, crate::rng::derive_seed(seed, tag::PRELIMINARY, 0))?;
    let preliminary = align_clusters(&prelim.labels, &sparse, g1);

    let classifier = PoissonClassifier::new(params, (1.0 - gamma) * ln_n)?;
    let refined: Vec<usize> =
        (0..n).into_par_iter().map(|v| classifier.map(&degree_profile(g2, v, &preliminary, k).d)).collect();
    let assignment: Vec<usize> = (0..n)
        .into_par_iter()
        .map(|v| classifier.group(&degree_profile(g2, v, &refined, k).d, &partition))
        .collect();
    Ok(DegreeProfilingResult {
        assignment: GroupAssignment { groups, assignment },
        gamma,
        preliminary,
        refined,
        forced_fraction: prelim.forced_fraction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_params;

    #[test]
    fn profile_counts() {
        let g = Graph::from_edges(5, &[(0, 1), (0, 2), (0, 3)]).unwrap();
        let labels = vec![0, 0, 0, 1, 1];
        assert_eq!(degree_profile(&g, 0, &labels, 2).d, vec![2, 1]);
        assert_eq!(degree_profile(&g, 4, &labels, 2).d, vec![0, 0]);
    }

    #[test]
    fn prior_breaks_identical_profiles() {
        let q = nalgebra::DMatrix::from_element(2, 2, 3.0);
        let params = ModelParams::allowing_duplicate_rows(vec![0.7, 0.3], q, Regime::Logarithmic).unwrap();
        for d in [vec![0, 0], vec![4, 1], vec![0, 12]] {
            assert_eq!(map_classify(&DegreeProfile { d }, &params, 2.0).unwrap(), 0);
        }
        let q = nalgebra::DMatrix::from_element(2, 2, 3.0);
        let params = ModelParams::allowing_duplicate_rows(vec![0.3, 0.7], q, Regime::Logarithmic).unwrap();
        assert_eq!(map_classify(&DegreeProfile { d: vec![4, 1] }, &params, 2.0).unwrap(), 1);
    }

    #[test]
    fn longhand_two_community_case() {
        // theta_1 = (4.5, 0.5), theta_2 = (0.5, 4.5) with p = (1/2, 1/2).
        let params = build_params(2, vec![0.5, 0.5], vec![vec![9.0, 1.0], vec![1.0, 9.0]], Regime::Logarithmic).unwrap();
        let d = DegreeProfile { d: vec![9, 1] };
        let l1 = 9.0 * 4.5f64.ln() + 0.5f64.ln() - 5.0;
        let l2 = 9.0 * 0.5f64.ln() + 4.5f64.ln() - 5.0;
        assert!(l1 > l2);
        assert_eq!(map_classify(&d, &params, 1.0).unwrap(), 0);
    }

    #[test]
    fn zero_kernel_entry_rejected() {
        let params = build_params(2, vec![0.5, 0.5], vec![vec![1.0, 0.0], vec![0.0, 1.0]], Regime::Logarithmic).unwrap();
        let d = DegreeProfile { d: vec![1, 0] };
        assert!(matches!(map_classify(&d, &params, 1.0), Err(SbmError::ZeroEntry(_))));
        let g = Graph::empty(4);
        assert!(matches!(
            degree_profiling(&g, &params, 0, &DegreeProfilingOptions::default()),
            Err(SbmError::NotApplicable(_))
        ));
    }

    #[test]
    fn whole_partition_short_circuits() {
        let params = ModelParams::symmetric(2, 5.0, 4.0, Regime::Logarithmic).unwrap();
        let g = Graph::empty(10);
        let res = degree_profiling(&g, &params, 3, &DegreeProfilingOptions::default()).unwrap();
        assert_eq!(res.assignment.groups, vec![vec![0, 1]]);
        assert!(res.assignment.assignment.iter().all(|&a| a == 0));
    }

    #[test]
    fn single_group_always_zero() {
        let params = ModelParams::symmetric(3, 8.0, 2.0, Regime::Logarithmic).unwrap();
        let whole = Partition::whole(3);
        for d in [vec![0, 0, 0], vec![5, 1, 9]] {
            assert_eq!(group_classify(&DegreeProfile { d }, &params, 2.0, &whole).unwrap(), 0);
        }
    }

    #[test]
    fn gamma_rule() {
        let n = 2000;
        let ln_n = (n as f64).ln();
        let expected = 3.5 / 9.0 + ln_n.ln() / (4.0 * ln_n);
        assert!((default_gamma(Some(4.5), n) - expected).abs() < 1e-12);
        assert_eq!(default_gamma(Some(0.5), n), GAMMA_MIN.max(ln_n.ln() / (4.0 * ln_n)));
        assert_eq!(default_gamma(Some(1e6), n), GAMMA_MAX);
    }

    #[test]
    fn alignment_k1_is_identity() {
        let params = build_params(1, vec![1.0], vec![vec![3.0]], Regime::Logarithmic).unwrap();
        let g = Graph::empty(3);
        assert_eq!(align_clusters(&[0, 0, 0], &params, &g), vec![0, 0, 0]);
    }
}
