//! Block-model parameters, graphs, sampling and edge splitting.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SbmError};
use crate::rng::{self, tag};

const PRIOR_TOL: f64 = 1e-12;
const ROW_TOL: f64 = 1e-12;

/// How the kernel is scaled into edge probabilities for an `n`-vertex graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// Edge probability `Q / n`: constant expected degree.
    Constant,
    /// Edge probability `ln(n) Q / n`: logarithmic expected degree.
    Logarithmic,
}

impl Regime {
    /// Multiplier turning a kernel entry into an edge probability.
    pub fn edge_scale(self, n: usize) -> f64 {
        let n = n as f64;
        match self {
            Regime::Constant => 1.0 / n,
            Regime::Logarithmic => n.ln() / n,
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regime::Constant => f.write_str("constant"),
            Regime::Logarithmic => f.write_str("logarithmic"),
        }
    }
}

/// A validated block model: prior `p`, symmetric kernel `Q` and degree regime.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    p: Vec<f64>,
    q: DMatrix<f64>,
    regime: Regime,
}

impl ModelParams {
    /// Validates and builds the parameters. `q` is given row-major.
    pub fn new(p: Vec<f64>, q: Vec<Vec<f64>>, regime: Regime) -> Result<Self> {
        let k = p.len();
        let q = matrix_from_rows(k, &q)?;
        Self::validated(p, q, regime, true)
    }

    pub fn from_matrix(p: Vec<f64>, q: DMatrix<f64>, regime: Regime) -> Result<Self> {
        Self::validated(p, q, regime, true)
    }

    /// Like [`ModelParams::from_matrix`] but tolerates duplicate rows, which
    /// only some operations can handle.
    pub fn allowing_duplicate_rows(p: Vec<f64>, q: DMatrix<f64>, regime: Regime) -> Result<Self> {
        Self::validated(p, q, regime, false)
    }

    fn validated(p: Vec<f64>, q: DMatrix<f64>, regime: Regime, check_rows: bool) -> Result<Self> {
        let k = p.len();
        if k == 0 {
            return Err(SbmError::DimensionMismatch("at least one community required".into()));
        }
        if q.nrows() != k || q.ncols() != k {
            return Err(SbmError::DimensionMismatch(format!(
                "prior has {k} entries but kernel is {}x{}",
                q.nrows(),
                q.ncols()
            )));
        }
        check_prior(&p)?;
        for i in 0..k {
            for j in 0..k {
                let v = q[(i, j)];
                if !v.is_finite() || v < 0.0 {
                    return Err(SbmError::NegativeEntry(i, j));
                }
                if v != q[(j, i)] {
                    return Err(SbmError::NonSymmetric(i, j));
                }
            }
        }
        if check_rows {
            if let Some((i, j)) = duplicate_rows(&q) {
                return Err(SbmError::DuplicateRows(i, j));
            }
        }
        Ok(ModelParams { p, q, regime })
    }

    /// Symmetric k-block model: uniform prior, `alpha` on the diagonal and `beta` elsewhere.
    pub fn symmetric(k: usize, alpha: f64, beta: f64, regime: Regime) -> Result<Self> {
        let p = vec![1.0 / k as f64; k];
        let q = DMatrix::from_fn(k, k, |i, j| if i == j { alpha } else { beta });
        Self::from_matrix(p, q, regime)
    }

    pub fn k(&self) -> usize {
        self.p.len()
    }

    pub fn prior(&self) -> &[f64] {
        &self.p
    }

    pub fn kernel(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn q(&self, i: usize, j: usize) -> f64 {
        self.q[(i, j)]
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn min_prior(&self) -> f64 {
        self.p.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `diag(p) Q`.
    pub fn pq(&self) -> DMatrix<f64> {
        let k = self.k();
        DMatrix::from_fn(k, k, |i, j| self.p[i] * self.q[(i, j)])
    }

    pub fn has_zero_entry(&self) -> bool {
        self.q.iter().any(|&v| v == 0.0)
    }

    /// Rows that coincide within tolerance, if any.
    pub fn duplicate_rows(&self) -> Option<(usize, usize)> {
        duplicate_rows(&self.q)
    }

    /// Same prior, kernel multiplied by `factor`, possibly in another regime.
    pub fn scaled(&self, factor: f64, regime: Regime) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(SbmError::ParameterError(format!("kernel scale {factor} must be positive")));
        }
        Ok(ModelParams { p: self.p.clone(), q: &self.q * factor, regime })
    }

    /// Relabels communities: new community `i` is old community `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let k = self.k();
        check_permutation(perm, k)?;
        let p = perm.iter().map(|&o| self.p[o]).collect();
        let q = DMatrix::from_fn(k, k, |i, j| self.q[(perm[i], perm[j])]);
        Ok(ModelParams { p, q, regime: self.regime })
    }

    /// Kernel rows as nested vectors.
    pub fn kernel_rows(&self) -> Vec<Vec<f64>> {
        (0..self.k()).map(|i| self.q.row(i).iter().copied().collect()).collect()
    }
}

fn check_permutation(perm: &[usize], k: usize) -> Result<()> {
    let mut seen = vec![false; k];
    if perm.len() != k {
        return Err(SbmError::DimensionMismatch(format!("permutation of length {} for k={k}", perm.len())));
    }
    for &x in perm {
        if x >= k || seen[x] {
            return Err(SbmError::ParameterError("not a permutation".into()));
        }
        seen[x] = true;
    }
    Ok(())
}

fn matrix_from_rows(k: usize, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    if rows.len() != k || rows.iter().any(|r| r.len() != k) {
        return Err(SbmError::DimensionMismatch(format!(
            "kernel must be {k}x{k} to match the prior"
        )));
    }
    Ok(DMatrix::from_fn(k, k, |i, j| rows[i][j]))
}

fn check_prior(p: &[f64]) -> Result<()> {
    if let Some(i) = p.iter().position(|&x| !(x.is_finite() && x > 0.0)) {
        return Err(SbmError::BadPrior(format!("entry {i} is {} (must be > 0)", p[i])));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > PRIOR_TOL {
        return Err(SbmError::BadPrior(format!("entries sum to {total}")));
    }
    Ok(())
}

fn duplicate_rows(q: &DMatrix<f64>) -> Option<(usize, usize)> {
    let k = q.nrows();
    for i in 0..k {
        for j in i + 1..k {
            if (0..k).all(|c| (q[(i, c)] - q[(j, c)]).abs() <= ROW_TOL) {
                return Some((i, j));
            }
        }
    }
    None
}

/// Validates `(k, p, Q, regime)`.
pub fn build_params(k: usize, p: Vec<f64>, q: Vec<Vec<f64>>, regime: Regime) -> Result<ModelParams> {
    if p.len() != k {
        return Err(SbmError::DimensionMismatch(format!("k={k} but prior has {} entries", p.len())));
    }
    ModelParams::new(p, q, regime)
}

/// Undirected simple graph with sorted neighbor lists. Carries no labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<Vec<usize>>,
    edge_count: usize,
}

impl Graph {
    pub fn empty(n: usize) -> Self {
        Graph { adjacency: vec![Vec::new(); n], edge_count: 0 }
    }

    /// Builds a graph from an edge list; self-loops are rejected and duplicates dropped.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(SbmError::IndexOutOfRange { index: u.max(v), len: n });
            }
            if u == v {
                return Err(SbmError::ParameterError(format!("self-loop at vertex {u}")));
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        let mut edge_count = 0;
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
            edge_count += list.len();
        }
        Ok(Graph { adjacency, edge_count: edge_count / 2 })
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[u].binary_search(&v).is_ok()
    }

    /// Edges `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, list)| list.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
    }
}

/// A sampled graph together with its hidden community assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedGraph {
    pub graph: Graph,
    pub labels: Vec<usize>,
}

/// Samples `n` vertices from `params`. Labels are drawn i.i.d. from the prior and
/// each pair is joined independently with its scaled kernel probability.
pub fn sample_graph(params: &ModelParams, n: usize, seed: u64) -> Result<PlantedGraph> {
    if n == 0 {
        return Err(SbmError::ParameterError("n must be at least 1".into()));
    }
    let k = params.k();
    let scale = params.regime().edge_scale(n);
    let probs = DMatrix::from_fn(k, k, |i, j| params.q(i, j) * scale);
    for i in 0..k {
        for j in 0..k {
            if probs[(i, j)] > 1.0 {
                return Err(SbmError::ProbabilityOverflow { i, j, value: probs[(i, j)] });
            }
        }
    }

    let mut label_rng = rng::stream(seed, tag::LABELS, 0);
    let cumulative: Vec<f64> = params
        .prior()
        .iter()
        .scan(0.0, |acc, &x| {
            *acc += x;
            Some(*acc)
        })
        .collect();
    let labels: Vec<usize> = (0..n)
        .map(|_| {
            let u: f64 = label_rng.gen::<f64>() * cumulative[k - 1];
            cumulative.partition_point(|&c| c <= u).min(k - 1)
        })
        .collect();

    let mut members = vec![Vec::new(); k];
    for (v, &l) in labels.iter().enumerate() {
        members[l].push(v);
    }

    let mut edge_rng = rng::stream(seed, tag::EDGES, 0);
    let mut edges = Vec::new();
    for a in 0..k {
        for b in a..k {
            let prob = probs[(a, b)];
            if a == b {
                sample_within(&members[a], prob, &mut edge_rng, &mut edges);
            } else {
                sample_between(&members[a], &members[b], prob, &mut edge_rng, &mut edges);
            }
        }
    }
    let graph = Graph::from_edges(n, &edges)?;
    Ok(PlantedGraph { graph, labels })
}

/// Number of failures before the next success of a Bernoulli(prob) sequence.
fn geometric_skip<R: Rng>(rng: &mut R, log_q: f64) -> u64 {
    let u: f64 = 1.0 - rng.gen::<f64>();
    let s = (u.ln() / log_q).floor();
    if s >= u64::MAX as f64 {
        u64::MAX
    } else {
        s as u64
    }
}

fn sample_between<R: Rng>(
    left: &[usize],
    right: &[usize],
    prob: f64,
    rng: &mut R,
    out: &mut Vec<(usize, usize)>,
) {
    let total = left.len() as u64 * right.len() as u64;
    if prob <= 0.0 || total == 0 {
        return;
    }
    let cols = right.len() as u64;
    if prob >= 1.0 {
        for idx in 0..total {
            out.push((left[(idx / cols) as usize], right[(idx % cols) as usize]));
        }
        return;
    }
    let log_q = (1.0 - prob).ln();
    let mut idx = geometric_skip(rng, log_q);
    while idx < total {
        out.push((left[(idx / cols) as usize], right[(idx % cols) as usize]));
        idx = idx.saturating_add(1).saturating_add(geometric_skip(rng, log_q));
    }
}

fn sample_within<R: Rng>(members: &[usize], prob: f64, rng: &mut R, out: &mut Vec<(usize, usize)>) {
    let m = members.len() as u64;
    if prob <= 0.0 || m < 2 {
        return;
    }
    let total = m * (m - 1) / 2;
    let log_q = if prob >= 1.0 { f64::NEG_INFINITY } else { (1.0 - prob).ln() };
    let mut idx = if prob >= 1.0 { 0 } else { geometric_skip(rng, log_q) };
    // Pair index walks the strict lower triangle row by row: row r holds r pairs.
    let mut row: u64 = 1;
    let mut row_start: u64 = 0;
    while idx < total {
        while idx >= row_start + row {
            row_start += row;
            row += 1;
        }
        let col = idx - row_start;
        out.push((members[row as usize], members[col as usize]));
        let skip = if prob >= 1.0 { 0 } else { geometric_skip(rng, log_q) };
        idx = idx.saturating_add(1).saturating_add(skip);
    }
}

/// Edges of one graph divided into a selected set `E` and the remainder.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSplit {
    /// The selected edges, stored as a graph on the same vertex set.
    pub selected: Graph,
    pub remainder: Graph,
}

/// Assigns each edge to the selected side independently with probability `prob`.
pub fn split_edges(graph: &Graph, prob: f64, seed: u64) -> Result<EdgeSplit> {
    split_edges_stream(graph, prob, &mut rng::stream(seed, tag::SPLIT, 0))
}

pub(crate) fn split_edges_stream<R: Rng>(graph: &Graph, prob: f64, rng: &mut R) -> Result<EdgeSplit> {
    if !(0.0..=1.0).contains(&prob) {
        return Err(SbmError::ParameterError(format!("split probability {prob} outside [0, 1]")));
    }
    let n = graph.n();
    let mut selected = Vec::new();
    let mut remainder = Vec::new();
    for (u, v) in graph.edges() {
        if rng.gen::<f64>() < prob {
            selected.push((u, v));
        } else {
            remainder.push((u, v));
        }
    }
    Ok(EdgeSplit { selected: Graph::from_edges(n, &selected)?, remainder: Graph::from_edges(n, &remainder)? })
}

/// Binary membership profile of length `t`; bit `t-1-i` is component `i`.
pub type Profile = u32;

/// Overlapping-community model on profiles in `{0,1}^t`.
#[derive(Clone)]
pub struct OverlapModel {
    pub t_profiles: usize,
    /// Prior mass of each profile, indexed by the profile's integer value.
    pub prior: Vec<f64>,
    pub kernel: Arc<dyn Fn(Profile, Profile) -> f64 + Send + Sync>,
    /// Regime the reduced block model is placed in.
    pub regime: Regime,
}

impl fmt::Debug for OverlapModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OverlapModel")
            .field("t_profiles", &self.t_profiles)
            .field("prior", &self.prior)
            .field("regime", &self.regime)
            .finish_non_exhaustive()
    }
}

impl OverlapModel {
    pub fn new(
        t_profiles: usize,
        prior: Vec<f64>,
        kernel: impl Fn(Profile, Profile) -> f64 + Send + Sync + 'static,
    ) -> Self {
        OverlapModel { t_profiles, prior, kernel: Arc::new(kernel), regime: Regime::Logarithmic }
    }

    /// Kernel depending only on the number of shared communities: `f(x, y) = g(<x, y>)`.
    pub fn shared_count(t_profiles: usize, prior: Vec<f64>, g: Vec<f64>) -> Self {
        Self::new(t_profiles, prior, move |x, y| g[(x & y).count_ones() as usize])
    }

    /// Vanishing-probability form of the independent-connection kernel:
    /// `g(s) = s * q_plus` for `s > 0` and `q_minus` for `s = 0`.
    pub fn linear_overlap(t_profiles: usize, prior: Vec<f64>, q_plus: f64, q_minus: f64) -> Self {
        Self::new(t_profiles, prior, move |x, y| {
            let s = (x & y).count_ones();
            if s == 0 {
                q_minus
            } else {
                f64::from(s) * q_plus
            }
        })
    }

    pub fn with_regime(mut self, regime: Regime) -> Self {
        self.regime = regime;
        self
    }

    pub fn eval(&self, x: Profile, y: Profile) -> f64 {
        (self.kernel)(x, y)
    }
}

/// Profile of community `i` (0-based): the `t`-bit binary expansion of `i`,
/// most significant bit first.
pub fn profile_bits(i: usize, t: usize) -> Vec<bool> {
    (0..t).map(|b| (i >> (t - 1 - b)) & 1 == 1).collect()
}

/// Reduces an overlap model to a `2^t`-community block model. Duplicate rows are
/// allowed here and only logged.
pub fn osbm_to_sbm(model: &OverlapModel) -> Result<ModelParams> {
    let t = model.t_profiles;
    if t > 16 {
        return Err(SbmError::TooManyProfiles(t));
    }
    let k = 1usize << t;
    if model.prior.len() != k {
        return Err(SbmError::DimensionMismatch(format!(
            "prior over {{0,1}}^{t} needs {k} entries, got {}",
            model.prior.len()
        )));
    }
    let q = DMatrix::from_fn(k, k, |i, j| model.eval(i as Profile, j as Profile));
    for i in 0..k {
        for j in i + 1..k {
            if q[(i, j)] != q[(j, i)] {
                return Err(SbmError::NonSymmetric(i, j));
            }
        }
    }
    let params = ModelParams::validated(model.prior.clone(), q, model.regime, false)?;
    if let Some((i, j)) = params.duplicate_rows() {
        log::warn!("overlap reduction produced equal kernel rows {i} and {j}");
    }
    Ok(params)
}
