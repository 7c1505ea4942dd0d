//! Exact multivariate Poisson computations on a truncated grid.
//!
//! The overlap `sum_x min(p1 P_{lnn theta1}(x), p2 P_{lnn theta2}(x))` is summed
//! over a box wide enough that the omitted mass is bounded by a Chernoff
//! certificate, so results are exact up to a reported tail.

use rayon::prelude::*;

use crate::error::{Result, SbmError};

/// Largest dimension summed exhaustively.
pub const MAX_DIMENSION: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct OverlapEstimate {
    pub value: f64,
    /// Inclusive upper bound per coordinate.
    pub truncation_box: Vec<u32>,
    /// Certified upper bound on the overlap mass outside the box.
    pub tail_bound: f64,
}

/// Compensated (Neumaier) accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    carry: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Per-coordinate inclusive bound `ceil(mu + 12 sqrt(mu) + 30)`.
pub fn box_bound(mean: f64) -> u32 {
    (mean + 12.0 * mean.sqrt() + 30.0).ceil() as u32
}

/// `ln k!` for `k = 0..=max`.
pub fn ln_factorials(max: u32) -> Vec<f64> {
    let mut table = Vec::with_capacity(max as usize + 1);
    let mut acc = 0.0;
    table.push(0.0);
    for k in 1..=max {
        acc += (k as f64).ln();
        table.push(acc);
    }
    table
}

/// `ln P(X = x)` for `X ~ Poisson(mean)`.
pub fn ln_pmf(x: u32, mean: f64, ln_fact: &[f64]) -> f64 {
    if mean == 0.0 {
        return if x == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    x as f64 * mean.ln() - mean - ln_fact[x as usize]
}

/// Chernoff bound on `P(X >= a)` for `X ~ Poisson(mean)`, `a > mean`.
pub fn poisson_upper_tail(mean: f64, a: f64) -> f64 {
    if mean == 0.0 {
        return if a > 0.0 { 0.0 } else { 1.0 };
    }
    if a <= mean {
        return 1.0;
    }
    (-mean + a * (1.0 + mean.ln() - a.ln())).exp().min(1.0)
}

fn validate(theta1: &[f64], theta2: &[f64], lnn: f64) -> Result<()> {
    if theta1.len() != theta2.len() {
        return Err(SbmError::LengthMismatch(theta1.len(), theta2.len()));
    }
    if theta1.len() > MAX_DIMENSION {
        return Err(SbmError::DimensionTooLarge(theta1.len()));
    }
    if theta1.iter().chain(theta2).any(|&t| !(t.is_finite() && t >= 0.0)) {
        return Err(SbmError::ParameterError("profile entries must be finite and nonnegative".into()));
    }
    if !(lnn.is_finite() && lnn > 0.0) {
        return Err(SbmError::ParameterError(format!("ln n = {lnn} must be positive")));
    }
    Ok(())
}

/// Calls `f` on every point of `[0, bounds[0]] x ... x [0, bounds[d-1]]`
/// whose first coordinate is `first`.
fn for_each_in_slab<F: FnMut(&[u32])>(bounds: &[u32], first: u32, mut f: F) {
    let d = bounds.len();
    let mut x = vec![0u32; d];
    x[0] = first;
    loop {
        f(&x);
        let mut i = d;
        loop {
            if i == 1 {
                return;
            }
            i -= 1;
            if x[i] < bounds[i] {
                x[i] += 1;
                break;
            }
            x[i] = 0;
        }
    }
}

/// Sums `term(x)` over the box with a fixed slab order, so the result does not
/// depend on thread scheduling.
pub(crate) fn sum_over_box<F>(bounds: &[u32], term: F) -> f64
where
    F: Fn(&[u32]) -> f64 + Sync,
{
    if bounds.is_empty() {
        return term(&[]);
    }
    let slabs: Vec<NeumaierSum> = (0..=bounds[0])
        .into_par_iter()
        .map(|first| {
            let mut acc = NeumaierSum::default();
            if bounds.len() == 1 {
                acc.add(term(&[first]));
            } else {
                for_each_in_slab(bounds, first, |x| acc.add(term(x)));
            }
            acc
        })
        .collect();
    let mut total = NeumaierSum::default();
    for s in slabs {
        total.add(s.total());
    }
    total.total()
}

pub fn overlap_sum(theta1: &[f64], theta2: &[f64], p1: f64, p2: f64, lnn: f64) -> Result<OverlapEstimate> {
    validate(theta1, theta2, lnn)?;
    let mean1: Vec<f64> = theta1.iter().map(|t| lnn * t).collect();
    let mean2: Vec<f64> = theta2.iter().map(|t| lnn * t).collect();
    let bounds: Vec<u32> = mean1.iter().zip(&mean2).map(|(a, b)| box_bound(a.max(*b))).collect();
    if p1 <= 0.0 || p2 <= 0.0 {
        return Ok(OverlapEstimate { value: 0.0, truncation_box: bounds, tail_bound: 0.0 });
    }
    let ln_fact = ln_factorials(bounds.iter().copied().max().unwrap_or(0));
    let (lp1, lp2) = (p1.ln(), p2.ln());
    let value = sum_over_box(&bounds, |x| {
        let mut l1 = lp1;
        let mut l2 = lp2;
        for (i, &xi) in x.iter().enumerate() {
            l1 += ln_pmf(xi, mean1[i], &ln_fact);
            l2 += ln_pmf(xi, mean2[i], &ln_fact);
        }
        l1.min(l2).exp()
    });
    let outside = |means: &[f64]| -> f64 {
        means.iter().zip(&bounds).map(|(&m, &b)| poisson_upper_tail(m, b as f64 + 1.0)).sum::<f64>().min(1.0)
    };
    let tail_bound = (p1 * outside(&mean1)).min(p2 * outside(&mean2));
    Ok(OverlapEstimate { value, truncation_box: bounds, tail_bound })
}

/// Least-squares slope of `-ln(overlap)` against `ln n`.
pub fn empirical_exponent(theta1: &[f64], theta2: &[f64], p1: f64, p2: f64, n_grid: &[f64]) -> Result<f64> {
    if n_grid.len() < 4 {
        return Err(SbmError::ParameterError(format!("need at least 4 grid points, got {}", n_grid.len())));
    }
    if n_grid.windows(2).any(|w| w[1] <= w[0]) || n_grid[0] <= 1.0 {
        return Err(SbmError::ParameterError("grid must be increasing and above 1".into()));
    }
    let mut xs = Vec::with_capacity(n_grid.len());
    let mut ys = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let lnn = n.ln();
        let est = overlap_sum(theta1, theta2, p1, p2, lnn)?;
        if est.value.is_nan() || est.value <= 0.0 {
            return Err(SbmError::NumericalFailure(format!("overlap vanished at n = {n}")));
        }
        xs.push(lnn);
        ys.push(-est.value.ln());
    }
    Ok(least_squares_slope(&xs, &ys))
}

pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapErrorBounds {
    pub lower: f64,
    pub upper: f64,
    /// Sum of the pairwise tail certificates.
    pub tail: f64,
}

/// Brackets the MAP error of deciding among `k` Poisson hypotheses from the
/// pairwise overlaps.
pub fn map_error_bounds(profiles: &[Vec<f64>], priors: &[f64], lnn: f64) -> Result<MapErrorBounds> {
    let k = profiles.len();
    if priors.len() != k {
        return Err(SbmError::LengthMismatch(priors.len(), k));
    }
    if k <= 1 {
        return Ok(MapErrorBounds { lower: 0.0, upper: 0.0, tail: 0.0 });
    }
    let mut upper = NeumaierSum::default();
    let mut tail = 0.0;
    for i in 0..k {
        for j in i + 1..k {
            let est = overlap_sum(&profiles[i], &profiles[j], priors[i], priors[j], lnn)?;
            upper.add(est.value);
            tail += est.tail_bound;
        }
    }
    let upper = upper.total();
    Ok(MapErrorBounds { lower: upper / (k - 1) as f64, upper, tail })
}

/// Total-variation bound between the binomial degree model and its Poisson
/// approximation: `2 a b^2 ln(n)^2 / n`.
pub fn le_cam_bound(a: f64, b: f64, n: f64) -> f64 {
    let ln_n = n.ln();
    2.0 * a * b * b * ln_n * ln_n / n
}
