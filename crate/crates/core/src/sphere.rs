//! Sphere comparison: partial recovery in the constant-degree regime.
//!
//! Each edge goes to a held-out set `E` with probability `c`. Breadth-first
//! spheres are grown on the remaining graph and the number of `E` edges
//! joining a sphere around `v` to one around `v'` is inverted through a
//! Vandermonde system in the scaled eigenvalues of `PQ`. The solution
//! estimates `P_W(e_v) . P^-1 P_W(e_v')` for every eigenspace `W`.

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Result, SbmError};
use crate::evaluation::agreement;
use crate::model::{split_edges_stream, Graph, ModelParams};
use crate::rng::{stream, tag};
use crate::spectral::{eigen_summary, theorem1_conditions_of, SpectralSummary};

/// Above this condition number a decomposition solve is flagged.
pub const ILL_CONDITIONED: f64 = 1e12;

const UNREACHED: u8 = u8::MAX;

/// Breadth-first layers `N_0(v), ..., N_R(v)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborLayers {
    pub origin: usize,
    pub layers: Vec<Vec<usize>>,
}

impl NeighborLayers {
    pub fn depth(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn counts(&self) -> Vec<usize> {
        self.layers.iter().map(Vec::len).collect()
    }

    pub fn layer(&self, r: usize) -> &[usize] {
        self.layers.get(r).map_or(&[], Vec::as_slice)
    }
}

/// Reusable visited-marks for repeated searches on one graph.
pub(crate) struct BfsScratch {
    mark: Vec<u32>,
    epoch: u32,
}

impl BfsScratch {
    pub(crate) fn new(n: usize) -> Self {
        BfsScratch { mark: vec![0; n], epoch: 0 }
    }

    fn next_epoch(&mut self) -> u32 {
        if self.epoch == u32::MAX {
            self.mark.fill(0);
            self.epoch = 0;
        }
        self.epoch += 1;
        self.epoch
    }

    pub(crate) fn layers(&mut self, graph: &Graph, v: usize, depth: usize, budget: usize) -> Result<NeighborLayers> {
        let epoch = self.next_epoch();
        self.mark[v] = epoch;
        let mut layers = Vec::with_capacity(depth + 1);
        layers.push(vec![v]);
        let mut visited = 1usize;
        if visited > budget {
            return Err(SbmError::BudgetExceeded { vertex: v, budget });
        }
        for r in 0..depth {
            let mut next = Vec::new();
            for &u in &layers[r] {
                for &w in graph.neighbors(u) {
                    if self.mark[w] != epoch {
                        self.mark[w] = epoch;
                        next.push(w);
                    }
                }
            }
            visited += next.len();
            if visited > budget {
                return Err(SbmError::BudgetExceeded { vertex: v, budget });
            }
            layers.push(next);
        }
        Ok(NeighborLayers { origin: v, layers })
    }
}

/// Layers around `v` up to depth `depth`, failing once more than `budget`
/// vertices have been reached.
pub fn neighborhoods(graph: &Graph, v: usize, depth: usize, budget: usize) -> Result<NeighborLayers> {
    if v >= graph.n() {
        return Err(SbmError::IndexOutOfRange { index: v, len: graph.n() });
    }
    BfsScratch::new(graph.n()).layers(graph, v, depth, budget)
}

/// Default search budget: half of the vertices.
pub fn default_budget(n: usize) -> usize {
    (n / 2).max(1)
}

/// Ordered pairs `(v1, v2)` with `v1` in layer `r` around `v`, `v2` in layer
/// `r'` around `v'` and `{v1, v2}` an edge of `e`.
pub fn cross_count(layers_v: &NeighborLayers, layers_w: &NeighborLayers, r: usize, r_prime: usize, e: &Graph) -> u64 {
    let mut target = layers_v.layer(r).to_vec();
    target.sort_unstable();
    let mut count = 0u64;
    for &v2 in layers_w.layer(r_prime) {
        for &v1 in e.neighbors(v2) {
            if target.binary_search(&v1).is_ok() {
                count += 1;
            }
        }
    }
    count
}

/// Estimates of `P_W(e_v) . P^-1 P_W(e_v')`, one per nonzero eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct ZVector {
    pub z: Vec<f64>,
    pub ill_conditioned: bool,
}

/// Solves `sum_i ((1-c) lambda_i)^(r + r' + j + 1) z_i = (1-c) n / c * counts[j]`
/// for `j = 0..eta`.
pub fn solve_decomposition(
    counts: &[f64],
    eigenvalues: &[f64],
    c: f64,
    r: usize,
    r_prime: usize,
    n: usize,
) -> Result<ZVector> {
    let eta = eigenvalues.len();
    if counts.len() != eta {
        return Err(SbmError::LengthMismatch(counts.len(), eta));
    }
    if eta == 0 {
        return Ok(ZVector { z: Vec::new(), ill_conditioned: false });
    }
    let mu: Vec<f64> = eigenvalues.iter().map(|l| (1.0 - c) * l).collect();
    let mu_max = mu.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if mu_max == 0.0 {
        return Err(SbmError::DegenerateSpectrum("all scaled eigenvalues are zero".into()));
    }
    // Substituting y_i = mu_i^(r+r'+1) z_i leaves a Vandermonde system; rows are
    // rescaled by mu_max^j to keep entries of order one.
    let v = DMatrix::from_fn(eta, eta, |j, i| (mu[i] / mu_max).powi(j as i32));
    let scale = (1.0 - c) * n as f64 / c;
    let rhs = DVector::from_fn(eta, |j, _| scale * counts[j] / mu_max.powi(j as i32));
    let svd = v.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let ill_conditioned = smin <= 0.0 || smax / smin > ILL_CONDITIONED;
    let y = v
        .lu()
        .solve(&rhs)
        .ok_or_else(|| SbmError::NumericalFailure("singular decomposition system".into()))?;
    let e0 = (r + r_prime + 1) as i32;
    let z = (0..eta).map(|i| y[i] / mu[i].powi(e0)).collect();
    Ok(ZVector { z, ill_conditioned })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparison {
    Same,
    Different,
}

/// Outcome of classifying one vertex against the representatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VertexLabel {
    Community(usize),
    Fail,
}

/// Tuning inputs of sphere comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereHyperparams {
    /// Probability that an edge is held out into `E`.
    pub c: f64,
    /// Number of randomly chosen anchor vertices.
    pub m: usize,
    pub epsilon: f64,
    pub x: f64,
    /// Number of independent unreliable runs combined.
    pub runs: usize,
    pub r: usize,
    pub r_prime: usize,
    pub budget: usize,
    /// Whether the partial-recovery conditions hold for the model.
    pub conditions_hold: bool,
}

/// Optional replacements for the defaults. Depths left unset are rederived.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SphereOverrides {
    pub c: Option<f64>,
    pub m: Option<usize>,
    pub epsilon: Option<f64>,
    pub x: Option<f64>,
    pub runs: Option<usize>,
    pub r: Option<usize>,
    pub r_prime: Option<usize>,
    pub budget: Option<usize>,
}

const C_CANDIDATES: [f64; 4] = [0.2, 0.1, 0.05, 0.02];
const C_FALLBACK: f64 = 0.05;

pub fn default_hyperparams(params: &ModelParams, n: usize, spectral: &SpectralSummary) -> Result<SphereHyperparams> {
    resolve_hyperparams(params, n, spectral, &SphereOverrides::default())
}

pub fn resolve_hyperparams(
    params: &ModelParams,
    n: usize,
    spectral: &SpectralSummary,
    overrides: &SphereOverrides,
) -> Result<SphereHyperparams> {
    let k = params.k() as f64;
    let min_p = params.min_prior();
    let conditions = theorem1_conditions_of(params, spectral)?;
    let lam = spectral.lambda_max;
    let lam_eta = spectral.lambda_min_nonzero.unwrap_or(0.0);

    let c = overrides.c.unwrap_or_else(|| {
        C_CANDIDATES
            .iter()
            .copied()
            .find(|&c| (1.0 - c) * lam_eta.powi(4) > 4.0 * lam.powi(3))
            .unwrap_or(C_FALLBACK)
    });
    if !(c > 0.0 && c < 1.0) {
        return Err(SbmError::ParameterError(format!("split probability c={c} outside (0, 1)")));
    }
    let m = overrides.m.unwrap_or_else(|| ((4.0 * k).ln() / min_p).ceil() as usize).max(1);
    let runs = overrides.runs.unwrap_or_else(|| (n as f64).ln().ceil().max(1.0) as usize).max(1);
    let epsilon = overrides
        .epsilon
        .unwrap_or_else(|| conditions.epsilon_interval.map_or(0.5, |(lo, hi)| 0.5 * (lo + hi)));
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(SbmError::ParameterError(format!("epsilon={epsilon} outside (0, 1)")));
    }
    let x = overrides
        .x
        .unwrap_or_else(|| conditions.feasible_x_interval.map_or(0.1 * min_p.sqrt(), |(_, hi)| 0.5 * hi));
    if x.is_nan() || x <= 0.0 {
        return Err(SbmError::ParameterError(format!("x={x} must be positive")));
    }

    let (r, r_prime) = match (overrides.r, overrides.r_prime) {
        (Some(r), Some(rp)) => (r, rp),
        (r_o, rp_o) => {
            let (r, rp) = depths(n, lam, spectral.eta, c, epsilon)?;
            (r_o.unwrap_or(r), rp_o.unwrap_or(rp))
        }
    };
    if r == 0 || r_prime == 0 {
        return Err(SbmError::ParameterError("depths must be at least 1".into()));
    }
    Ok(SphereHyperparams {
        c,
        m,
        epsilon,
        x,
        runs,
        r,
        r_prime,
        budget: overrides.budget.unwrap_or_else(|| default_budget(n)),
        conditions_hold: conditions.all_hold(),
    })
}

/// Search depths `(r, r')` from the split parameter `epsilon`.
pub fn depths(n: usize, lambda_max: f64, eta: usize, c: f64, epsilon: f64) -> Result<(usize, usize)> {
    let growth = ((1.0 - c) * lambda_max).ln();
    if growth.is_nan() || growth <= 0.0 {
        return Err(SbmError::ParameterError(format!(
            "(1-c) lambda_1 = {} does not exceed 1",
            (1.0 - c) * lambda_max
        )));
    }
    let horizon = (n as f64).ln() / growth;
    let r = ((1.0 - epsilon / 3.0) * horizon - eta as f64).floor();
    let r_prime = (2.0 * epsilon / 3.0 * horizon).floor();
    if r_prime < 1.0 {
        return Err(SbmError::ParameterError(format!("graph too small: r' = {r_prime} < 1")));
    }
    let r = r.max(1.0) as usize;
    let r_prime = r_prime as usize;
    Ok(if r < r_prime { (r_prime, r) } else { (r, r_prime) })
}

/// Everything a comparison needs besides the graph.
#[derive(Debug, Clone)]
pub struct SphereContext {
    pub eigenvalues: Vec<f64>,
    pub c: f64,
    pub r: usize,
    pub r_prime: usize,
    pub n: usize,
    /// `5 (2x / sqrt(min p) + x^2)`.
    pub compare_threshold: f64,
    /// `19/3 (2x / sqrt(min p) + x^2)`.
    pub classify_margin: f64,
}

impl SphereContext {
    pub fn new(params: &ModelParams, spectral: &SpectralSummary, hyper: &SphereHyperparams, n: usize) -> Self {
        let base = 2.0 * hyper.x / params.min_prior().sqrt() + hyper.x * hyper.x;
        SphereContext {
            eigenvalues: spectral.nonzero().to_vec(),
            c: hyper.c,
            r: hyper.r,
            r_prime: hyper.r_prime,
            n,
            compare_threshold: 5.0 * base,
            classify_margin: 19.0 / 3.0 * base,
        }
    }

    pub fn eta(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Depth anchors must be explored to.
    pub fn anchor_depth(&self) -> usize {
        self.r + self.eta().max(1) - 1
    }

    fn solve(&self, counts: &[f64]) -> Result<ZVector> {
        solve_decomposition(counts, &self.eigenvalues, self.c, self.r, self.r_prime, self.n)
    }
}

/// An explored anchor with a dense depth lookup.
#[derive(Debug, Clone)]
pub struct Anchor {
    pub layers: NeighborLayers,
    depth_of: Vec<u8>,
}

impl Anchor {
    pub fn new(layers: NeighborLayers, n: usize) -> Self {
        let mut depth_of = vec![UNREACHED; n];
        for (d, layer) in layers.layers.iter().enumerate() {
            for &u in layer {
                depth_of[u] = d.min(UNREACHED as usize - 1) as u8;
            }
        }
        Anchor { layers, depth_of }
    }

    pub fn vertex(&self) -> usize {
        self.layers.origin
    }

    /// `N_{r+j, r'}` between this anchor and the layer `layer` around another
    /// vertex, for `j = 0..eta`.
    fn counts_against(&self, layer: &[usize], e: &Graph, ctx: &SphereContext) -> Vec<f64> {
        let eta = ctx.eta();
        let mut counts = vec![0.0; eta];
        let lo = ctx.r;
        for &v2 in layer {
            for &v1 in e.neighbors(v2) {
                let d = self.depth_of[v1] as usize;
                if d >= lo && d < lo + eta {
                    counts[d - lo] += 1.0;
                }
            }
        }
        counts
    }
}

fn quadratic_gap<'a>(aa: &'a ZVector, ab: &'a ZVector, bb: &'a ZVector) -> impl Iterator<Item = f64> + 'a {
    (0..aa.z.len()).map(move |i| aa.z[i] - 2.0 * ab.z[i] + bb.z[i])
}

/// `z(a . a)` for an anchor.
pub fn self_product(a: &Anchor, e: &Graph, ctx: &SphereContext) -> Result<ZVector> {
    ctx.solve(&a.counts_against(a.layers.layer(ctx.r_prime), e, ctx))
}

/// `z(a . b)`: deep layers of `a`, layer `r'` of `b`.
pub fn pair_product(a: &Anchor, b: &NeighborLayers, e: &Graph, ctx: &SphereContext) -> Result<ZVector> {
    ctx.solve(&a.counts_against(b.layer(ctx.r_prime), e, ctx))
}

/// Decides whether two explored vertices share a community.
pub fn vertex_comparison(a: &Anchor, b: &Anchor, e: &Graph, ctx: &SphereContext) -> Result<Comparison> {
    let aa = self_product(a, e, ctx)?;
    let bb = self_product(b, e, ctx)?;
    let ab = pair_product(a, &b.layers, e, ctx)?;
    Ok(compare_products(&aa, &ab, &bb, ctx.compare_threshold))
}

pub fn compare_products(aa: &ZVector, ab: &ZVector, bb: &ZVector, threshold: f64) -> Comparison {
    if quadratic_gap(aa, ab, bb).any(|g| g > threshold) {
        Comparison::Different
    } else {
        Comparison::Same
    }
}

/// Assigns `v` to the unique representative whose score dominates all others
/// up to `margin` in every eigen-direction.
pub fn classify_products(self_z: &[ZVector], cross_z: &[ZVector], margin: f64) -> VertexLabel {
    let k = self_z.len();
    let score = |s: usize, i: usize| self_z[s].z[i] - 2.0 * cross_z[s].z[i];
    let eta = self_z.first().map_or(0, |z| z.z.len());
    let mut found = None;
    for s in 0..k {
        let dominates = (0..k).filter(|&t| t != s).all(|t| (0..eta).all(|i| score(s, i) <= score(t, i) + margin));
        if dominates {
            if found.is_some() {
                return VertexLabel::Fail;
            }
            found = Some(s);
        }
    }
    found.map_or(VertexLabel::Fail, VertexLabel::Community)
}

pub fn vertex_classification(
    reps: &[Anchor],
    reps_self: &[ZVector],
    v: &NeighborLayers,
    e: &Graph,
    ctx: &SphereContext,
) -> Result<VertexLabel> {
    let cross = reps.iter().map(|a| pair_product(a, v, e, ctx)).collect::<Result<Vec<_>>>()?;
    Ok(classify_products(reps_self, &cross, ctx.classify_margin))
}

/// Why an unreliable run produced no labeling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunFailure {
    /// The anchor comparisons are not an equivalence relation.
    Inconsistent,
    /// The comparisons found a number of classes other than `k`.
    WrongClassCount(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLabeling {
    pub labels: Vec<usize>,
    pub forced: Vec<bool>,
}

impl RunLabeling {
    pub fn forced_fraction(&self) -> f64 {
        if self.labels.is_empty() {
            return 0.0;
        }
        self.forced.iter().filter(|&&f| f).count() as f64 / self.labels.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunOutcome {
    Labeled(RunLabeling),
    Failed(RunFailure),
}

/// Groups anchors into classes when the comparison relation is an equivalence.
pub fn anchor_classes(same: &[Vec<bool>]) -> Option<Vec<Vec<usize>>> {
    let m = same.len();
    let mut class_of = vec![usize::MAX; m];
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for i in 0..m {
        if !same[i][i] {
            return None;
        }
        if class_of[i] != usize::MAX {
            continue;
        }
        let members: Vec<usize> = (0..m).filter(|&j| same[i][j]).collect();
        for &j in &members {
            if class_of[j] != usize::MAX {
                return None;
            }
            class_of[j] = classes.len();
        }
        classes.push(members);
    }
    // Every class must be a clique with no edges leaving it.
    for i in 0..m {
        for j in 0..m {
            if same[i][j] != (class_of[i] == class_of[j]) {
                return None;
            }
        }
    }
    Some(classes)
}

/// A single randomized pass: split, anchors, comparisons, classification.
pub fn unreliable_classification(
    graph: &Graph,
    params: &ModelParams,
    hyper: &SphereHyperparams,
    seed: u64,
) -> Result<RunOutcome> {
    let spectral = eigen_summary(params)?;
    let ctx = SphereContext::new(params, &spectral, hyper, graph.n());
    unreliable_run(graph, params.k(), hyper, &ctx, seed, 0)
}

fn unreliable_run(
    graph: &Graph,
    k: usize,
    hyper: &SphereHyperparams,
    ctx: &SphereContext,
    seed: u64,
    run: u64,
) -> Result<RunOutcome> {
    let n = graph.n();
    let split = split_edges_stream(graph, hyper.c, &mut stream(seed, tag::SPHERE_SPLIT, run))?;
    let (e, work) = (&split.selected, &split.remainder);

    let m = hyper.m.min(n);
    let mut anchor_rng = stream(seed, tag::ANCHORS, run);
    let picks = index::sample(&mut anchor_rng, n, m).into_vec();
    let mut scratch = BfsScratch::new(n);
    let anchors = picks
        .iter()
        .map(|&v| Ok(Anchor::new(scratch.layers(work, v, ctx.anchor_depth(), hyper.budget)?, n)))
        .collect::<Result<Vec<_>>>()?;

    let self_z = anchors.iter().map(|a| self_product(a, e, ctx)).collect::<Result<Vec<_>>>()?;
    let mut same = vec![vec![true; m]; m];
    for i in 0..m {
        for j in 0..m {
            if i != j {
                let ij = pair_product(&anchors[i], &anchors[j].layers, e, ctx)?;
                same[i][j] = compare_products(&self_z[i], &ij, &self_z[j], ctx.compare_threshold) == Comparison::Same;
            }
        }
    }
    let classes = match anchor_classes(&same) {
        Some(c) => c,
        None => return Ok(RunOutcome::Failed(RunFailure::Inconsistent)),
    };
    if classes.len() != k {
        return Ok(RunOutcome::Failed(RunFailure::WrongClassCount(classes.len())));
    }

    let mut rep_rng = stream(seed, tag::REPRESENTATIVES, run);
    let reps: Vec<usize> = classes.iter().map(|cls| cls[rep_rng.gen_range(0..cls.len())]).collect();
    let rep_anchors: Vec<Anchor> = reps.iter().map(|&i| anchors[i].clone()).collect();
    let rep_self: Vec<ZVector> = reps.iter().map(|&i| self_z[i].clone()).collect();

    let results: Vec<VertexLabel> = (0..n)
        .into_par_iter()
        .map_init(
            || BfsScratch::new(n),
            |scratch, v| {
                let layers = scratch.layers(work, v, ctx.r_prime, hyper.budget)?;
                vertex_classification(&rep_anchors, &rep_self, &layers, e, ctx)
            },
        )
        .collect::<Result<Vec<_>>>()?;

    let mut forced_rng = stream(seed, tag::FORCED, run);
    let mut labels = Vec::with_capacity(n);
    let mut forced = Vec::with_capacity(n);
    for res in results {
        match res {
            VertexLabel::Community(s) => {
                labels.push(s);
                forced.push(false);
            }
            VertexLabel::Fail => {
                labels.push(forced_rng.gen_range(0..k));
                forced.push(true);
            }
        }
    }
    Ok(RunOutcome::Labeled(RunLabeling { labels, forced }))
}

/// Combined labeling from several unreliable runs.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereResult {
    pub labels: Vec<usize>,
    pub forced_fraction: f64,
    pub runs: usize,
    pub runs_failed: usize,
    pub runs_discarded: usize,
    pub discard_threshold: f64,
    pub hyper: SphereHyperparams,
}

/// Disagreement cutoff used to discard runs.
///
/// The theoretical value `4k e^-A / (1 - e^-AB)` is only meaningful when it is
/// positive and below `min p / 3`, the largest error for which the best
/// bijection between two good runs is the true one. Otherwise the cap is used.
pub fn discard_threshold(k: usize, min_p: f64, spectral: &SpectralSummary, hyper: &SphereHyperparams) -> f64 {
    let kf = k as f64;
    let c = hyper.c;
    let x = hyper.x;
    let lam = spectral.lambda_max;
    let lam_eta = spectral.lambda_min_nonzero.unwrap_or(0.0);
    let a = (1.0 - c) * x * x * lam_eta * lam_eta * min_p
        / (16.0 * lam * kf.powf(1.5) * (1.0 / min_p.sqrt() + x));
    let b = (1.0 - c) * lam_eta.powi(4) / (4.0 * lam.powi(3)) - 1.0;
    let raw = 4.0 * kf * (-a).exp() / (1.0 - (-a * b).exp());
    let cap = min_p / 3.0;
    if raw.is_finite() && raw > 0.0 {
        raw.min(cap)
    } else {
        cap
    }
}

/// Indices of runs kept by the disagreement filter.
pub fn filter_runs(labelings: &[&[usize]], k: usize, threshold: f64) -> Result<Vec<usize>> {
    let s = labelings.len();
    let mut dis = vec![vec![0.0; s]; s];
    for a in 0..s {
        for b in a + 1..s {
            let d = 1.0 - agreement(labelings[a], labelings[b], k)?.accuracy;
            dis[a][b] = d;
            dis[b][a] = d;
        }
    }
    let kept: Vec<usize> = (0..s)
        .filter(|&a| {
            let far = (0..s).filter(|&b| b != a && dis[a][b] > threshold).count();
            2 * far < s
        })
        .collect();
    Ok(if kept.is_empty() { (0..s).collect() } else { kept })
}

/// Sphere comparison proper: `runs` unreliable passes, filtered and merged.
pub fn reliable_classification(
    graph: &Graph,
    params: &ModelParams,
    hyper: &SphereHyperparams,
    seed: u64,
) -> Result<SphereResult> {
    let spectral = eigen_summary(params)?;
    let ctx = SphereContext::new(params, &spectral, hyper, graph.n());
    let k = params.k();
    let outcomes = (0..hyper.runs as u64)
        .into_par_iter()
        .map(|run| unreliable_run(graph, k, hyper, &ctx, seed, run))
        .collect::<Vec<_>>();

    let mut good = Vec::new();
    let mut failed = 0;
    let mut last_err = None;
    for out in outcomes {
        match out {
            Ok(RunOutcome::Labeled(l)) => good.push(l),
            Ok(RunOutcome::Failed(reason)) => {
                log::debug!("unreliable run failed: {reason:?}");
                failed += 1;
            }
            Err(e) => {
                log::debug!("unreliable run aborted: {e}");
                last_err = Some(e);
                failed += 1;
            }
        }
    }
    if good.is_empty() {
        if let Some(e @ (SbmError::BudgetExceeded { .. } | SbmError::ParameterError(_))) = last_err {
            log::warn!("every run aborted; last error: {e}");
        }
        return Err(SbmError::AllRunsFailed);
    }

    let threshold = discard_threshold(k, params.min_prior(), &spectral, hyper);
    let refs: Vec<&[usize]> = good.iter().map(|l| l.labels.as_slice()).collect();
    let kept = filter_runs(&refs, k, threshold)?;

    let reference = &good[kept[0]];
    let maps = kept
        .iter()
        .map(|&s| Ok(agreement(&good[s].labels, &reference.labels, k)?.matching))
        .collect::<Result<Vec<_>>>()?;
    let n = graph.n();
    let mut rng = stream(seed, tag::COMBINE, 0);
    let mut labels = Vec::with_capacity(n);
    let mut forced = 0usize;
    for v in 0..n {
        let pick = rng.gen_range(0..kept.len());
        let run = &good[kept[pick]];
        labels.push(maps[pick][run.labels[v]]);
        forced += run.forced[v] as usize;
    }
    Ok(SphereResult {
        labels,
        forced_fraction: if n == 0 { 0.0 } else { forced as f64 / n as f64 },
        runs: hyper.runs,
        runs_failed: failed,
        runs_discarded: good.len() - kept.len(),
        discard_threshold: threshold,
        hyper: hyper.clone(),
    })
}
