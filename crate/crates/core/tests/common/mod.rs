//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use std::collections::{HashSet, VecDeque};

use sbm_core::Graph;

/// Plain BFS distances, `usize::MAX` when unreachable.
pub fn bfs_distances(graph: &Graph, source: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; graph.n()];
    let mut queue = VecDeque::new();
    dist[source] = 0;
    queue.push_back(source);
    while let Some(u) = queue.pop_front() {
        for &w in graph.neighbors(u) {
            if dist[w] == usize::MAX {
                dist[w] = dist[u] + 1;
                queue.push_back(w);
            }
        }
    }
    dist
}

/// Double loop over both spheres with an edge-set membership test.
pub fn brute_cross_count(work: &Graph, e: &Graph, v: usize, w: usize, r: usize, rp: usize) -> u64 {
    let dv = bfs_distances(work, v);
    let dw = bfs_distances(work, w);
    let edges: HashSet<(usize, usize)> = e.edges().collect();
    let mut count = 0;
    for a in (0..work.n()).filter(|&a| dv[a] == r) {
        for b in (0..work.n()).filter(|&b| dw[b] == rp) {
            if edges.contains(&(a.min(b), a.max(b))) && a != b {
                count += 1;
            }
        }
    }
    count
}

/// All permutations of `0..k` by recursive insertion.
pub fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

/// Relabel-maximized agreement by scanning every permutation.
pub fn brute_agreement(a: &[usize], b: &[usize], k: usize) -> f64 {
    let n = a.len();
    permutations(k)
        .iter()
        .map(|perm| a.iter().zip(b).filter(|(&x, &y)| perm[x] == y).count())
        .max()
        .unwrap_or(0) as f64
        / n.max(1) as f64
}

/// All set partitions of `0..k` as lists of blocks.
pub fn set_partitions(k: usize) -> Vec<Vec<Vec<usize>>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for part in set_partitions(k - 1) {
        for i in 0..part.len() {
            let mut p = part.clone();
            p[i].push(k - 1);
            out.push(p);
        }
        let mut p = part.clone();
        p.push(vec![k - 1]);
        out.push(p);
    }
    out
}

/// Canonical form: blocks sorted internally and by first element.
pub fn canonical(mut blocks: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    for b in &mut blocks {
        b.sort_unstable();
    }
    blocks.sort();
    blocks
}

/// Poisson pmf table on `0..=max` by the recursion `P(x) = P(x-1) mean / x`.
pub fn poisson_pmf_table(mean: f64, max: u32) -> Vec<f64> {
    let mut table = Vec::with_capacity(max as usize + 1);
    let mut p = (-mean).exp();
    table.push(p);
    for x in 1..=max {
        p *= mean / x as f64;
        table.push(p);
    }
    table
}

/// MAP error over the box `[0, bounds]`: total mass minus the winning mass at every point.
pub fn exhaustive_map_error(means: &[Vec<f64>], priors: &[f64], bounds: &[u32]) -> f64 {
    let d = bounds.len();
    let tables: Vec<Vec<Vec<f64>>> =
        means.iter().map(|m| (0..d).map(|i| poisson_pmf_table(m[i], bounds[i])).collect()).collect();
    let mut x = vec![0u32; d];
    let mut total = 0.0;
    loop {
        let mut sum = 0.0;
        let mut max = 0.0f64;
        for (t, &p) in tables.iter().zip(priors) {
            let mass = p * (0..d).map(|i| t[i][x[i] as usize]).product::<f64>();
            sum += mass;
            max = max.max(mass);
        }
        total += sum - max;
        let mut i = 0;
        loop {
            if i == d {
                return total;
            }
            if x[i] < bounds[i] {
                x[i] += 1;
                break;
            }
            x[i] = 0;
            i += 1;
        }
    }
}

/// Full Poisson log-likelihood including the factorial term.
pub fn full_log_posterior(d: &[u32], means: &[f64], prior: f64) -> f64 {
    prior.ln()
        + d.iter()
            .zip(means)
            .map(|(&x, &m)| x as f64 * m.ln() - m - (1..=x).map(|i| (i as f64).ln()).sum::<f64>())
            .sum::<f64>()
}
