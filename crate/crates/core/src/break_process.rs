// SPDX-License-Identifier: MIT OR Apache-2.0

//! The Wald process W_n(gamma) over a trimmed grid of candidate break
//! fractions and its recentred version Q_n(gamma) = (W_n - p) / sqrt(2p).

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::design::{split_design, DesignMatrix, SplitDesign};
use crate::error::{BreakError, Result};
use crate::regression::{moment_matrices, ols, symmetrize, VarianceMode};

/// Relative eigenvalue floor for the break-coefficient variance.
pub const PD_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakGrid {
    pub gamma_star: f64,
    pub step: f64,
    pub points: Vec<f64>,
}

impl BreakGrid {
    /// Points gamma_star + j * step for j = 0, 1, ... up to 1 - gamma_star.
    pub fn new(gamma_star: f64, step: f64) -> Result<Self> {
        if !(gamma_star > 0.0 && gamma_star < 0.5 && step > 0.0 && step <= gamma_star) {
            return Err(BreakError::InvalidTrim { gamma_star, step });
        }
        let count = ((1.0 - 2.0 * gamma_star) / step + 1e-9).floor() as usize + 1;
        let points = (0..count).map(|j| gamma_star + j as f64 * step).collect();
        Ok(Self {
            gamma_star,
            step,
            points,
        })
    }

    /// The default spacing of 1/200.
    pub fn with_default_step(gamma_star: f64) -> Result<Self> {
        Self::new(gamma_star, 1.0 / 200.0)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Wald statistic at a single break fraction.
#[derive(Debug, Clone, PartialEq)]
pub struct WaldPoint {
    pub wald: f64,
    pub delta2: DVector<f64>,
    pub rss: f64,
}

/// W_n(gamma) = n d2' (R M^-1 Omega M^-1 R')^-1 d2, evaluated with
/// Cholesky solves against M-hat and the restricted block.
pub fn wald_at(split: &SplitDesign, y: &DVector<f64>, mode: VarianceMode) -> Result<WaldPoint> {
    let gamma = split.gamma;
    let p = split.p;
    let n = split.x.nrows() as f64;
    let fit = ols(&split.x, y)?;
    let mm = moment_matrices(&split.x, &fit.residuals, mode);
    let chol = Cholesky::new(mm.m_hat).ok_or(BreakError::SingularVariance { gamma })?;
    // M^-1 Omega, then M^-1 (M^-1 Omega)'
    let left = chol.solve(&mm.omega_hat);
    let sandwich = chol.solve(&left.transpose());
    let mut b = sandwich.view((p, p), (p, p)).into_owned();
    symmetrize(&mut b);
    let delta2 = fit.coef.rows(p, p).into_owned();
    let wald = restricted_quadratic_form(&b, &delta2, gamma)? * n;
    Ok(WaldPoint {
        wald,
        delta2,
        rss: fit.rss,
    })
}

/// d' B^-1 d after checking B is numerically positive definite.
pub(crate) fn restricted_quadratic_form(
    b: &DMatrix<f64>,
    d: &DVector<f64>,
    gamma: f64,
) -> Result<f64> {
    let ev = b.clone().symmetric_eigenvalues();
    let (lo, hi) = (ev.min(), ev.max());
    if !(hi > 0.0 && lo > PD_TOLERANCE * hi) {
        return Err(BreakError::SingularVariance { gamma });
    }
    let chol = Cholesky::new(b.clone()).ok_or(BreakError::SingularVariance { gamma })?;
    let sol = chol.solve(d);
    Ok(d.dot(&sol).max(0.0))
}

pub fn q_from_wald(wald: f64, p: usize) -> f64 {
    (wald - p as f64) / (2.0 * p as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BreakProcess {
    pub grid: BreakGrid,
    pub wald: Vec<f64>,
    pub q: Vec<f64>,
    pub rss: Vec<f64>,
    pub delta2: Vec<DVector<f64>>,
    pub p: usize,
    pub n_eff: usize,
    pub mode: VarianceMode,
}

impl BreakProcess {
    /// Build from precomputed Wald values (rss and delta2 left empty).
    pub fn from_wald(grid: BreakGrid, wald: Vec<f64>, p: usize, n_eff: usize) -> Self {
        assert_eq!(grid.len(), wald.len());
        let q = wald.iter().map(|&w| q_from_wald(w, p)).collect();
        Self {
            grid,
            wald,
            q,
            rss: Vec::new(),
            delta2: Vec::new(),
            p,
            n_eff,
            mode: VarianceMode::default(),
        }
    }

    /// Least-squares break fraction: leftmost minimiser of the split RSS.
    pub fn lse_break_fraction(&self) -> Option<f64> {
        leftmost_extreme(&self.rss, |a, b| a < b).map(|i| self.grid.points[i])
    }
}

/// Index of the first element strictly better than all before it and not
/// beaten afterwards, i.e. the leftmost optimum.
pub(crate) fn leftmost_extreme(v: &[f64], better: impl Fn(f64, f64) -> bool) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &x) in v.iter().enumerate() {
        match best {
            None => best = Some(i),
            Some(b) if better(x, v[b]) => best = Some(i),
            _ => {}
        }
    }
    best
}

pub fn compute_break_process(
    design: &DesignMatrix,
    y: &[f64],
    grid: &BreakGrid,
    mode: VarianceMode,
) -> Result<BreakProcess> {
    if y.len() != design.n_eff() {
        return Err(BreakError::InvalidConfig(format!(
            "response length {} does not match design rows {}",
            y.len(),
            design.n_eff()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(BreakError::NonFiniteInput("response"));
    }
    let yv = DVector::from_column_slice(y);
    let eval = |&gamma: &f64| -> Result<WaldPoint> {
        let split = split_design(design, gamma)?;
        wald_at(&split, &yv, mode)
    };
    #[cfg(feature = "parallel")]
    let points: Vec<Result<WaldPoint>> = {
        use rayon::prelude::*;
        grid.points.par_iter().map(eval).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let points: Vec<Result<WaldPoint>> = grid.points.iter().map(eval).collect();

    let p = design.p();
    let mut wald = Vec::with_capacity(grid.len());
    let mut rss = Vec::with_capacity(grid.len());
    let mut delta2 = Vec::with_capacity(grid.len());
    for point in points {
        let point = point?;
        wald.push(point.wald);
        rss.push(point.rss);
        delta2.push(point.delta2);
    }
    let q = wald.iter().map(|&w| q_from_wald(w, p)).collect();
    Ok(BreakProcess {
        grid: grid.clone(),
        wald,
        q,
        rss,
        delta2,
        p,
        n_eff: design.n_eff(),
        mode,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::build_raw_design;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn grid_counts() {
        let g = BreakGrid::new(0.35, 0.005).unwrap();
        assert_eq!(g.len(), 61);
        assert!((g.points[0] - 0.35).abs() < 1e-15);
        assert!((g.points[60] - 0.65).abs() < 1e-12);
        assert_eq!(BreakGrid::new(0.15, 0.005).unwrap().len(), 141);
        assert!(matches!(
            BreakGrid::new(0.5, 0.005),
            Err(BreakError::InvalidTrim { .. })
        ));
        assert!(BreakGrid::new(0.1, 0.2).is_err());
        assert!(g.points.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn q_normalisation() {
        assert_eq!(q_from_wald(6.0, 6), 0.0);
        assert!((q_from_wald(6.0 + 12f64.sqrt(), 6) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn symmetric_design_gives_zero_wald() {
        // regime 2 is an exact mirror of regime 1 in both x and residual
        // pattern, so the interaction coefficient is exactly zero.
        let half = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let e = [0.5, -0.3, 0.2, -0.4, 0.1, -0.1];
        let mut z = Vec::new();
        let mut y = Vec::new();
        for _ in 0..2 {
            for (x, u) in half.iter().zip(e.iter()) {
                z.push(*x);
                y.push(1.0 + 2.0 * x + u);
            }
        }
        let d = build_raw_design(&DMatrix::from_column_slice(12, 1, &z), true).unwrap();
        let s = split_design(&d, 0.5).unwrap();
        let w = wald_at(&s, &DVector::from_vec(y), VarianceMode::Homoskedastic).unwrap();
        assert!(w.delta2.amax() < 1e-12);
        assert!(w.wald < 1e-20);
    }

    #[test]
    fn explicit_inverse_oracle_p1() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 60;
        let x = DMatrix::from_element(n, 1, 1.0);
        let d = DesignMatrix::new(x, vec!["1".into()]).unwrap();
        let y = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        for &gamma in &[0.3, 0.5, 0.7] {
            let s = split_design(&d, gamma).unwrap();
            for mode in [VarianceMode::Homoskedastic, VarianceMode::EickerWhite] {
                let w = wald_at(&s, &y, mode).unwrap();
                // explicit 2x2 inverses
                let xs = &s.x;
                let fit_coef = (xs.transpose() * xs).try_inverse().unwrap() * xs.transpose() * &y;
                let e = &y - xs * &fit_coef;
                let m = xs.transpose() * xs / n as f64;
                let omega = match mode {
                    VarianceMode::Homoskedastic => &m * (e.norm_squared() / n as f64),
                    VarianceMode::EickerWhite => {
                        let mut o = DMatrix::zeros(2, 2);
                        for t in 0..n {
                            let r = xs.row(t).transpose();
                            o += &r * r.transpose() * e[t] * e[t];
                        }
                        o / n as f64
                    }
                };
                let mi = m.try_inverse().unwrap();
                let v = &mi * omega * &mi;
                let oracle = n as f64 * fit_coef[1] * fit_coef[1] / v[(1, 1)];
                assert!(
                    (w.wald - oracle).abs() <= 1e-8 * oracle.abs().max(1e-12),
                    "{} vs {}",
                    w.wald,
                    oracle
                );
            }
        }
    }

    #[test]
    fn reparameterisation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 120;
        let z = DMatrix::from_fn(n, 2, |_, _| rng.random_range(0.0..5.0));
        let d = crate::design::build_polynomial_basis(&z, 2).unwrap();
        let y: Vec<f64> = (0..n)
            .map(|t| z[(t, 0)].sin() + rng.sample::<f64, _>(StandardNormal))
            .collect();
        let a = DMatrix::from_fn(6, 6, |i, j| if i == j { 2.0 } else { 0.0 })
            + DMatrix::from_fn(6, 6, |_, _| rng.random_range(-0.3..0.3));
        let d2 = d.transform(&a).unwrap();
        let grid = BreakGrid::new(0.3, 0.05).unwrap();
        for mode in [VarianceMode::EickerWhite, VarianceMode::Homoskedastic] {
            let b1 = compute_break_process(&d, &y, &grid, mode).unwrap();
            let b2 = compute_break_process(&d2, &y, &grid, mode).unwrap();
            for (w1, w2) in b1.wald.iter().zip(&b2.wald) {
                assert!((w1 - w2).abs() <= 1e-7 * w1.abs().max(1.0), "{w1} {w2}");
            }
        }
    }

    #[test]
    fn process_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 150;
        let z = DMatrix::from_fn(n, 2, |_, _| rng.random_range(0.0..5.0));
        let d = crate::design::build_polynomial_basis(&z, 2).unwrap();
        let y: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let grid = BreakGrid::new(0.35, 0.005).unwrap();
        let bp = compute_break_process(&d, &y, &grid, VarianceMode::EickerWhite).unwrap();
        assert_eq!(bp.wald.len(), grid.len());
        assert_eq!(bp.q.len(), grid.len());
        for (w, q) in bp.wald.iter().zip(&bp.q) {
            assert!(*w >= 0.0);
            assert_eq!(*q, (w - 6.0) / 12f64.sqrt());
        }
        let g = bp.lse_break_fraction().unwrap();
        let i = grid.points.iter().position(|&v| v == g).unwrap();
        assert!(bp.rss.iter().all(|&r| r >= bp.rss[i]));
        assert!(bp.rss[..i].iter().all(|&r| r > bp.rss[i]));
        // recomputation is deterministic
        let again = compute_break_process(&d, &y, &grid, VarianceMode::EickerWhite).unwrap();
        assert_eq!(bp, again);
    }

    #[test]
    fn infeasible_grid_propagates_gamma() {
        let z = DMatrix::from_fn(20, 1, |t, _| t as f64);
        let d = build_raw_design(&z, true).unwrap();
        let y: Vec<f64> = (0..20).map(|t| (t as f64).cos()).collect();
        let grid = BreakGrid::new(0.1, 0.05).unwrap();
        match compute_break_process(&d, &y, &grid, VarianceMode::Homoskedastic) {
            Err(BreakError::BreakGridInfeasible { gamma, .. }) => {
                assert!((gamma - 0.1).abs() < 1e-12)
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sweep_matches_pointwise_evaluation_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let n = 100;
        let z = DMatrix::from_fn(n, 1, |_, _| rng.random_range(0.0..5.0));
        let y: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let d = build_raw_design(&z, true).unwrap();
        let grid = BreakGrid::new(0.2, 0.01).unwrap();
        let bp = compute_break_process(&d, &y, &grid, VarianceMode::EickerWhite).unwrap();
        let yv = DVector::from_vec(y);
        for (i, &g) in grid.points.iter().enumerate() {
            let s = split_design(&d, g).unwrap();
            let w = wald_at(&s, &yv, VarianceMode::EickerWhite).unwrap();
            assert_eq!(w.wald.to_bits(), bp.wald[i].to_bits());
        }
    }
}
