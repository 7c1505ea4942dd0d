//! Eigenstructure of `PQ = diag(p) Q`.
//!
//! `PQ` is similar to the symmetric matrix `S = sqrt(P) Q sqrt(P)`, so its
//! spectrum is real. Eigenvectors of `S` map back through `v = sqrt(P) u` and
//! the (oblique) eigenspace projectors are `sqrt(P) U U^T sqrt(P)^-1`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SbmError};
use crate::model::ModelParams;

/// Relative tolerance used both to merge eigenvalues and to call one zero.
pub const EIGEN_GROUP_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct SpectralSummary {
    /// Distinct eigenvalues, sorted by magnitude, largest first.
    pub distinct: Vec<f64>,
    pub multiplicities: Vec<usize>,
    /// Number of distinct nonzero eigenvalues.
    pub eta: usize,
    /// Projector onto the eigenspace of each distinct eigenvalue.
    pub projectors: Vec<DMatrix<f64>>,
    pub lambda_max: f64,
    pub lambda_min_nonzero: Option<f64>,
    pub rho: Option<f64>,
}

impl SpectralSummary {
    pub fn h(&self) -> usize {
        self.distinct.len()
    }

    /// The nonzero distinct eigenvalues `lambda_1..lambda_eta`.
    pub fn nonzero(&self) -> &[f64] {
        &self.distinct[..self.eta]
    }

    /// Component of `v` in eigenspace `i`.
    pub fn component(&self, i: usize, v: &DVector<f64>) -> DVector<f64> {
        &self.projectors[i] * v
    }
}

pub fn eigen_summary(params: &ModelParams) -> Result<SpectralSummary> {
    let k = params.k();
    let sqrt_p: Vec<f64> = params.prior().iter().map(|x| x.sqrt()).collect();
    let s = DMatrix::from_fn(k, k, |i, j| sqrt_p[i] * params.q(i, j) * sqrt_p[j]);
    if s.iter().any(|x| !x.is_finite()) {
        return Err(SbmError::NumericalFailure("non-finite matrix entry".into()));
    }
    let eig = nalgebra::linalg::SymmetricEigen::try_new(s, f64::EPSILON, 10_000)
        .ok_or_else(|| SbmError::NumericalFailure("symmetric eigensolver did not converge".into()))?;

    let scale = eig.eigenvalues.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let tol = EIGEN_GROUP_TOL * scale;

    // Group by value first, then order groups by magnitude.
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for idx in order {
        match groups.last_mut() {
            Some(g) if (eig.eigenvalues[idx] - eig.eigenvalues[*g.last().unwrap()]).abs() <= tol => g.push(idx),
            _ => groups.push(vec![idx]),
        }
    }
    let mean = |g: &Vec<usize>| g.iter().map(|&i| eig.eigenvalues[i]).sum::<f64>() / g.len() as f64;
    groups.sort_by(|a, b| {
        let (la, lb) = (mean(a), mean(b));
        lb.abs().total_cmp(&la.abs()).then(lb.total_cmp(&la))
    });

    let mut distinct = Vec::with_capacity(groups.len());
    let mut multiplicities = Vec::with_capacity(groups.len());
    let mut projectors = Vec::with_capacity(groups.len());
    for g in &groups {
        distinct.push(mean(g));
        multiplicities.push(g.len());
        let cols: Vec<DVector<f64>> = g.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect();
        let basis = orthonormalize(cols);
        let mut proj = DMatrix::zeros(k, k);
        for u in &basis {
            proj += u * u.transpose();
        }
        // Similarity back to PQ's coordinates.
        let proj = DMatrix::from_fn(k, k, |i, j| sqrt_p[i] * proj[(i, j)] / sqrt_p[j]);
        projectors.push(proj);
    }

    let h = distinct.len();
    let eta = if distinct[h - 1].abs() <= tol { h - 1 } else { h };
    let lambda_max = distinct[0];
    let lambda_min_nonzero = if eta > 0 { Some(distinct[eta - 1]) } else { None };
    let rho = match lambda_min_nonzero {
        Some(l) if lambda_max > 0.0 => Some(l * l / lambda_max),
        _ => None,
    };
    Ok(SpectralSummary { distinct, multiplicities, eta, projectors, lambda_max, lambda_min_nonzero, rho })
}

fn orthonormalize(cols: Vec<DVector<f64>>) -> Vec<DVector<f64>> {
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(cols.len());
    for mut v in cols {
        for u in &basis {
            let proj = u.dot(&v);
            v -= u * proj;
        }
        let norm = v.norm();
        if norm > 1e-12 {
            basis.push(v / norm);
        }
    }
    basis
}

/// Signal-to-noise ratio `|lambda_eta|^2 / lambda_1`.
pub fn snr(params: &ModelParams) -> Result<f64> {
    let s = eigen_summary(params)?;
    snr_of(&s)
}

pub fn snr_of(summary: &SpectralSummary) -> Result<f64> {
    if summary.eta == 0 {
        return Err(SbmError::DegenerateSpectrum("all eigenvalues are zero".into()));
    }
    if summary.lambda_max <= 0.0 {
        return Err(SbmError::DegenerateSpectrum("largest eigenvalue is not positive".into()));
    }
    Ok(summary.rho.expect("rho defined when eta > 0 and lambda_1 > 0"))
}

/// Which of the partial-recovery hypotheses hold, and the feasible parameter ranges.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoremConditions {
    pub rho_gt_4: bool,
    /// `lambda^7 < lambda'^8`.
    pub pow7_lt_pow8: bool,
    /// `4 lambda^3 < lambda'^4`.
    pub four_cube_lt_fourth: bool,
    /// Smallest nonzero `P_W(e_i - e_j) . P^-1 P_W(e_i - e_j)`.
    pub min_separation: f64,
    pub x_upper: f64,
    /// `(0, x_upper)` when nonempty.
    pub feasible_x_interval: Option<(f64, f64)>,
    /// Open interval of admissible depth-split parameters, when nonempty.
    pub epsilon_interval: Option<(f64, f64)>,
}

impl TheoremConditions {
    pub fn all_hold(&self) -> bool {
        self.rho_gt_4
            && self.pow7_lt_pow8
            && self.four_cube_lt_fourth
            && self.feasible_x_interval.is_some()
            && self.epsilon_interval.is_some()
    }
}

pub fn theorem1_conditions(params: &ModelParams) -> Result<TheoremConditions> {
    let s = eigen_summary(params)?;
    theorem1_conditions_of(params, &s)
}

pub fn theorem1_conditions_of(params: &ModelParams, s: &SpectralSummary) -> Result<TheoremConditions> {
    let rho = snr_of(s)?;
    let lam = s.lambda_max;
    let lam_p = s.lambda_min_nonzero.expect("eta > 0").abs();
    let k = params.k();
    let min_p = params.min_prior();

    let rho_gt_4 = rho > 4.0;
    let pow7_lt_pow8 = lam.powi(7) < lam_p.powi(8);
    let four_cube_lt_fourth = 4.0 * lam.powi(3) < lam_p.powi(4);

    let mut min_sep = f64::INFINITY;
    for proj in &s.projectors {
        for i in 0..k {
            for j in i + 1..k {
                let diff = DVector::from_fn(k, |r, _| proj[(r, i)] - proj[(r, j)]);
                if diff.norm() <= 1e-9 {
                    continue;
                }
                let q: f64 = (0..k).map(|r| diff[r] * diff[r] / params.prior()[r]).sum();
                min_sep = min_sep.min(q.abs());
            }
        }
    }

    let first = lam * k as f64 / (lam_p * min_p);
    let second = if min_sep.is_finite() {
        -(1.0 / min_p).sqrt() + (1.0 / min_p + min_sep / 13.0).sqrt()
    } else {
        f64::INFINITY
    };
    let x_upper = first.min(second);
    let feasible_x_interval = (x_upper > 0.0 && x_upper.is_finite()).then_some((0.0, x_upper));

    let epsilon_interval = {
        let a_den = (lam_p * lam_p / lam).ln();
        let b_den = (2.0 * lam.powi(3) / (lam_p * lam_p)).ln();
        if a_den <= 0.0 || b_den <= 0.0 {
            None
        } else {
            let a = (lam * lam / (lam_p * lam_p)).ln() / a_den;
            let b = (2.0 * lam * lam / (lam_p * lam_p)).ln() / b_den;
            let lo = (3.0 * a.max(b)).max(0.0);
            (lo < 1.0).then_some((lo, 1.0))
        }
    };

    Ok(TheoremConditions {
        rho_gt_4,
        pow7_lt_pow8,
        four_cube_lt_fourth,
        min_separation: min_sep,
        x_upper,
        feasible_x_interval,
        epsilon_interval,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_params, Regime};

    #[test]
    fn symmetric_blocks_closed_form() {
        for k in 2..=5 {
            let params = ModelParams::symmetric(k, 20.0, 3.0, Regime::Constant).unwrap();
            let s = eigen_summary(&params).unwrap();
            let kf = k as f64;
            assert_eq!(s.h(), 2);
            assert!((s.distinct[0] - (20.0 + (kf - 1.0) * 3.0) / kf).abs() < 1e-10);
            assert!((s.distinct[1] - 17.0 / kf).abs() < 1e-10);
            assert_eq!(s.multiplicities, vec![1, k - 1]);
            assert_eq!(s.eta, 2);
        }
    }

    #[test]
    fn single_community() {
        let params = build_params(1, vec![1.0], vec![vec![5.0]], Regime::Constant).unwrap();
        let s = eigen_summary(&params).unwrap();
        assert_eq!(s.distinct, vec![5.0]);
        assert!((s.projectors[0][(0, 0)] - 1.0).abs() < 1e-12);
        assert!((snr(&params).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn projector_identities() {
        let params = build_params(
            3,
            vec![0.2, 0.3, 0.5],
            vec![vec![4.0, 1.0, 0.5], vec![1.0, 6.0, 2.0], vec![0.5, 2.0, 3.0]],
            Regime::Constant,
        )
        .unwrap();
        let s = eigen_summary(&params).unwrap();
        let pq = params.pq();
        let mut sum = DMatrix::zeros(3, 3);
        for (lam, proj) in s.distinct.iter().zip(&s.projectors) {
            sum += proj;
            let resid = &pq * proj - proj * *lam;
            assert!(resid.amax() < 1e-8 * s.lambda_max.abs());
            assert!((proj * proj - proj).amax() < 1e-10);
        }
        assert!((sum - DMatrix::identity(3, 3)).amax() < 1e-8);
        for w in s.distinct.windows(2) {
            assert!(w[0].abs() >= w[1].abs());
        }
    }

    #[test]
    fn snr_examples() {
        let params = ModelParams::symmetric(2, 30.0, 5.0, Regime::Constant).unwrap();
        assert!((snr(&params).unwrap() - 156.25 / 17.5).abs() < 1e-10);
        let params = ModelParams::symmetric(3, 6.0, 3.0, Regime::Constant).unwrap();
        assert!((snr(&params).unwrap() - 0.25).abs() < 1e-12);
        let params = build_params(2, vec![0.5, 0.5], vec![vec![6.0, 0.0], vec![0.0, 6.0]], Regime::Constant).unwrap();
        assert!((snr(&params).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn zero_eigenvalue_reduces_eta() {
        // Rank-one kernel: Q = a a^T has a single nonzero eigenvalue.
        let a = [1.0, 2.0];
        let q = vec![vec![a[0] * a[0], a[0] * a[1]], vec![a[1] * a[0], a[1] * a[1]]];
        let params = build_params(2, vec![0.5, 0.5], q, Regime::Constant).unwrap();
        let s = eigen_summary(&params).unwrap();
        assert_eq!(s.h(), 2);
        assert_eq!(s.eta, 1);
    }

    #[test]
    fn all_zero_kernel_is_degenerate() {
        let params = build_params(1, vec![1.0], vec![vec![0.0]], Regime::Constant).unwrap();
        assert!(matches!(snr(&params), Err(SbmError::DegenerateSpectrum(_))));
    }

    #[test]
    fn recovery_conditions_strong_signal() {
        let params = ModelParams::symmetric(2, 30.0, 5.0, Regime::Constant).unwrap();
        let c = theorem1_conditions(&params).unwrap();
        assert!(c.rho_gt_4 && c.pow7_lt_pow8 && c.four_cube_lt_fourth);
        assert!((c.min_separation - 4.0).abs() < 1e-9);
        let expected_x = -(2.0f64).sqrt() + (2.0 + 4.0 / 13.0f64).sqrt();
        assert!((c.x_upper - expected_x).abs() < 1e-9);
        assert!(c.epsilon_interval.is_some());
    }

    #[test]
    fn recovery_conditions_symmetric_separation() {
        for k in 2..=5 {
            let params = ModelParams::symmetric(k, 40.0, 2.0, Regime::Constant).unwrap();
            let c = theorem1_conditions(&params).unwrap();
            assert!((c.min_separation - 2.0 * k as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn weak_signal_fails_conditions() {
        let params = ModelParams::symmetric(2, 12.0, 8.0, Regime::Constant).unwrap();
        let c = theorem1_conditions(&params).unwrap();
        assert!(!c.rho_gt_4);
        assert!(c.epsilon_interval.is_none());
    }
}
