// SPDX-License-Identifier: MIT OR Apache-2.0

//! Regressor construction: polynomial sieve bases, autoregressive lag
//! embeddings, raw user columns, and the break-interacted design.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{BreakError, Result};

/// Response and covariates as ingested, before any basis expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSample {
    pub y: Vec<f64>,
    /// n x k covariates, k may be zero.
    pub z: DMatrix<f64>,
}

impl RawSample {
    pub fn new(y: Vec<f64>, z: DMatrix<f64>) -> Result<Self> {
        if y.is_empty() {
            return Err(BreakError::SampleTooShort {
                required: 0,
                actual: 0,
            });
        }
        if z.nrows() != y.len() && z.ncols() > 0 {
            return Err(BreakError::InvalidConfig(format!(
                "covariate rows {} do not match response length {}",
                z.nrows(),
                y.len()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(BreakError::NonFiniteInput("response"));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(BreakError::NonFiniteInput("covariates"));
        }
        let z = if z.ncols() == 0 {
            DMatrix::zeros(y.len(), 0)
        } else {
            z
        };
        Ok(Self { y, z })
    }

    /// Covariates given column by column.
    pub fn from_columns(y: Vec<f64>, columns: &[Vec<f64>]) -> Result<Self> {
        let n = y.len();
        if let Some(bad) = columns.iter().find(|c| c.len() != n) {
            return Err(BreakError::InvalidConfig(format!(
                "covariate column has {} rows, response has {n}",
                bad.len()
            )));
        }
        let z = DMatrix::from_fn(n, columns.len(), |t, j| columns[j][t]);
        Self::new(y, z)
    }

    /// Response-only sample, as used for autoregressions.
    pub fn univariate(y: Vec<f64>) -> Result<Self> {
        let n = y.len();
        Self::new(y, DMatrix::zeros(n, 0))
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn k(&self) -> usize {
        self.z.ncols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BasisKind {
    /// All monomials of total degree at most `degree` in the covariates.
    PolynomialSieve { degree: usize },
    /// Intercept plus `order` lags of the response.
    ArLags { order: usize },
    /// Covariate columns used as they are.
    RawColumns,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub kind: BasisKind,
    /// Ignored (always on) for sieve and lag designs.
    pub include_intercept: bool,
}

impl DesignSpec {
    pub fn polynomial(degree: usize) -> Self {
        Self {
            kind: BasisKind::PolynomialSieve { degree },
            include_intercept: true,
        }
    }

    pub fn ar(order: usize) -> Self {
        Self {
            kind: BasisKind::ArLags { order },
            include_intercept: true,
        }
    }

    pub fn raw(include_intercept: bool) -> Self {
        Self {
            kind: BasisKind::RawColumns,
            include_intercept,
        }
    }

    /// Build the regressor matrix and the aligned response.
    pub fn build(&self, sample: &RawSample) -> Result<(DesignMatrix, Vec<f64>)> {
        match self.kind {
            BasisKind::PolynomialSieve { degree } => {
                let x = build_polynomial_basis(&sample.z, degree)?;
                Ok((x, sample.y.clone()))
            }
            BasisKind::ArLags { order } => build_ar_design(&sample.y, order),
            BasisKind::RawColumns => {
                let x = build_raw_design(&sample.z, self.include_intercept)?;
                Ok((x, sample.y.clone()))
            }
        }
    }
}

/// Accepts `poly:2`, `ar:8`, `raw` and `raw-nointercept`.
impl std::str::FromStr for DesignSpec {
    type Err = BreakError;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let bad = || BreakError::InvalidConfig(format!("unknown design {s:?}"));
        let order = |rest: &str| rest.trim().parse::<usize>().map_err(|_| bad());
        if let Some(rest) = lower.strip_prefix("poly:") {
            Ok(DesignSpec::polynomial(order(rest)?))
        } else if let Some(rest) = lower.strip_prefix("ar:") {
            Ok(DesignSpec::ar(order(rest)?))
        } else if lower == "raw" {
            Ok(DesignSpec::raw(true))
        } else if lower == "raw-nointercept" {
            Ok(DesignSpec::raw(false))
        } else {
            Err(bad())
        }
    }
}

/// The n_eff x p regressor matrix whose t-th row is x_t'.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    x: DMatrix<f64>,
    labels: Vec<String>,
}

impl DesignMatrix {
    /// Validates finiteness, `n_eff > 2p` and numerical full column rank.
    pub fn new(x: DMatrix<f64>, labels: Vec<String>) -> Result<Self> {
        assert_eq!(labels.len(), x.ncols(), "one label per column");
        if x.iter().any(|v| !v.is_finite()) {
            return Err(BreakError::NonFiniteInput("design"));
        }
        let (n, p) = x.shape();
        if p == 0 || n <= 2 * p {
            return Err(BreakError::SampleTooShort {
                required: 2 * p,
                actual: n,
            });
        }
        let sv = x.clone().singular_values();
        let smax = sv.max();
        let smin = sv.min();
        let tol = n.max(p) as f64 * f64::EPSILON * smax;
        if !(smin > tol) {
            return Err(BreakError::RankDeficient {
                smallest_singular: smin,
            });
        }
        Ok(Self { x, labels })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn n_eff(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Right-multiply by a p x p matrix, i.e. map each row x_t to A' x_t.
    pub fn transform(&self, a: &DMatrix<f64>) -> Result<Self> {
        let labels = (0..a.ncols()).map(|j| format!("c{j}")).collect();
        Self::new(&self.x * a, labels)
    }
}

/// Exponent vectors of all monomials of total degree <= `degree` in `k`
/// variables, graded lexicographic, constant first.
pub fn monomial_exponents(k: usize, degree: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![0; k]];
    if k == 0 {
        return out;
    }
    for d in 1..=degree {
        // nondecreasing index tuples (i1 <= ... <= id) in lexicographic order
        let mut idx = vec![0usize; d];
        loop {
            let mut e = vec![0; k];
            for &i in &idx {
                e[i] += 1;
            }
            out.push(e);
            let mut pos = d;
            while pos > 0 && idx[pos - 1] == k - 1 {
                pos -= 1;
            }
            if pos == 0 {
                break;
            }
            idx[pos - 1] += 1;
            let v = idx[pos - 1];
            for slot in idx.iter_mut().skip(pos) {
                *slot = v;
            }
        }
    }
    out
}

fn monomial_label(e: &[usize]) -> String {
    let parts: Vec<String> = e
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0)
        .map(|(i, &p)| {
            if p == 1 {
                format!("z{}", i + 1)
            } else {
                format!("z{}^{}", i + 1, p)
            }
        })
        .collect();
    if parts.is_empty() {
        "1".to_string()
    } else {
        parts.join("*")
    }
}

/// Polynomial sieve: every monomial of total degree <= `degree`.
pub fn build_polynomial_basis(z: &DMatrix<f64>, degree: usize) -> Result<DesignMatrix> {
    if z.iter().any(|v| !v.is_finite()) {
        return Err(BreakError::NonFiniteInput("covariates"));
    }
    let exps = monomial_exponents(z.ncols(), degree);
    let n = z.nrows();
    let x = DMatrix::from_fn(n, exps.len(), |t, j| {
        exps[j]
            .iter()
            .enumerate()
            .fold(1.0, |acc, (i, &pw)| acc * z[(t, i)].powi(pw as i32))
    });
    let labels = exps.iter().map(|e| monomial_label(e)).collect();
    DesignMatrix::new(x, labels)
}

/// Raw lag embedding without feasibility checks: row t is
/// (1, y_{t+q-1}, ..., y_t) and the aligned response is y_{t+q}.
pub fn lag_embedding(y: &[f64], order: usize) -> (DMatrix<f64>, Vec<f64>) {
    let n_eff = y.len().saturating_sub(order);
    let x = DMatrix::from_fn(n_eff, order + 1, |t, j| {
        if j == 0 {
            1.0
        } else {
            y[t + order - j]
        }
    });
    (x, y[order.min(y.len())..].to_vec())
}

/// Lag embedding x_t = (1, y_{t-1}, ..., y_{t-q}); the first q observations
/// are consumed as presample.
pub fn build_ar_design(y: &[f64], order: usize) -> Result<(DesignMatrix, Vec<f64>)> {
    let n = y.len();
    let p = order + 1;
    if order == 0 || n <= order + 2 * p {
        return Err(BreakError::SampleTooShort {
            required: order + 2 * p,
            actual: n,
        });
    }
    let (x, y_eff) = lag_embedding(y, order);
    let labels = std::iter::once("1".to_string())
        .chain((1..=order).map(|j| format!("y_lag{j}")))
        .collect();
    let design = DesignMatrix::new(x, labels)?;
    Ok((design, y_eff))
}

pub fn build_raw_design(z: &DMatrix<f64>, include_intercept: bool) -> Result<DesignMatrix> {
    let n = z.nrows();
    let k = z.ncols();
    let off = usize::from(include_intercept);
    let x = DMatrix::from_fn(
        n,
        k + off,
        |t, j| {
            if j < off {
                1.0
            } else {
                z[(t, j - off)]
            }
        },
    );
    let mut labels: Vec<String> = Vec::with_capacity(k + off);
    if include_intercept {
        labels.push("1".into());
    }
    labels.extend((1..=k).map(|i| format!("z{i}")));
    DesignMatrix::new(x, labels)
}

/// Regime split index k* = floor(n_eff * gamma); rows 1..=k* are pre-break.
pub fn split_index(n_eff: usize, gamma: f64) -> usize {
    // guard against 0.35 * 200 = 69.999...
    ((n_eff as f64) * gamma + 1e-9).floor() as usize
}

/// The 2p-column design with rows (x_t', x_t' 1{t/n_eff > gamma}).
#[derive(Debug, Clone, PartialEq)]
pub struct SplitDesign {
    pub gamma: f64,
    pub split_index: usize,
    pub p: usize,
    pub x: DMatrix<f64>,
}

pub fn split_design(design: &DesignMatrix, gamma: f64) -> Result<SplitDesign> {
    let n = design.n_eff();
    let p = design.p();
    let min_rows = p + 2;
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(BreakError::BreakGridInfeasible {
            gamma,
            first: 0,
            second: 0,
            min_rows,
        });
    }
    let k = split_index(n, gamma).min(n);
    if k < min_rows || n - k < min_rows {
        return Err(BreakError::BreakGridInfeasible {
            gamma,
            first: k,
            second: n - k,
            min_rows,
        });
    }
    let base = design.matrix();
    let x = DMatrix::from_fn(n, 2 * p, |t, j| {
        if j < p {
            base[(t, j)]
        } else if t >= k {
            base[(t, j - p)]
        } else {
            0.0
        }
    });
    Ok(SplitDesign {
        gamma,
        split_index: k,
        p,
        x,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn parses_design_specs() {
        assert_eq!("poly:3".parse::<DesignSpec>().unwrap(), DesignSpec::polynomial(3));
        assert_eq!("AR:8".parse::<DesignSpec>().unwrap(), DesignSpec::ar(8));
        assert_eq!("raw-nointercept".parse::<DesignSpec>().unwrap(), DesignSpec::raw(false));
        assert!("spline:4".parse::<DesignSpec>().is_err());
    }


    fn binom(n: usize, k: usize) -> usize {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    fn covariates(n: usize, k: usize) -> DMatrix<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64((n * 31 + k) as u64);
        DMatrix::from_fn(n, k, |_, _| rng.random_range(0.0..5.0))
    }

    #[test]
    fn sieve_column_counts() {
        let z = covariates(400, 2);
        assert_eq!(build_polynomial_basis(&z, 2).unwrap().p(), 6);
        assert_eq!(build_polynomial_basis(&z, 3).unwrap().p(), 10);
        assert_eq!(build_polynomial_basis(&z, 4).unwrap().p(), 15);
    }

    #[test]
    fn exponent_count_matches_binomial_exhaustively() {
        for k in 1..=4 {
            for d in 0..=6 {
                let e = monomial_exponents(k, d);
                assert_eq!(e.len(), binom(k + d, d), "k={k} d={d}");
                let unique: BTreeSet<_> = e.iter().cloned().collect();
                assert_eq!(unique.len(), e.len());
                assert!(e.iter().all(|v| v.iter().sum::<usize>() <= d));
            }
        }
    }

    #[test]
    fn degree_zero_is_intercept() {
        let z = covariates(10, 2);
        let x = build_polynomial_basis(&z, 0).unwrap();
        assert_eq!(x.p(), 1);
        assert!(x.matrix().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn three_covariates_quadratic_by_brute_force() {
        // brute force: every exponent triple with sum <= 2
        let mut expected = BTreeSet::new();
        for a in 0..=2 {
            for b in 0..=2 {
                for c in 0..=2 {
                    if a + b + c <= 2 {
                        expected.insert(vec![a, b, c]);
                    }
                }
            }
        }
        let got = monomial_exponents(3, 2);
        assert_eq!(got.len(), 10);
        assert_eq!(got.iter().cloned().collect::<BTreeSet<_>>(), expected);
        let z = covariates(50, 3);
        let labels = build_polynomial_basis(&z, 2).unwrap().labels().to_vec();
        assert_eq!(
            labels,
            vec!["1", "z1", "z2", "z3", "z1^2", "z1*z2", "z1*z3", "z2^2", "z2*z3", "z3^2"]
        );
    }

    #[test]
    fn permuting_covariates_permutes_columns() {
        let z = covariates(60, 3);
        let zp = DMatrix::from_fn(60, 3, |t, i| z[(t, [2, 0, 1][i])]);
        let a = build_polynomial_basis(&z, 3).unwrap();
        let b = build_polynomial_basis(&zp, 3).unwrap();
        // every column of one basis appears in the other (products may
        // associate differently, so compare to rounding)
        assert_eq!(a.p(), b.p());
        for j in 0..a.p() {
            let ca = a.matrix().column(j);
            let hit = (0..b.p()).any(|k| {
                let cb = b.matrix().column(k);
                (ca - cb).amax() <= 1e-12 * ca.amax()
            });
            assert!(hit, "column {} has no counterpart", a.labels()[j]);
        }
    }

    #[test]
    fn non_finite_and_rank_errors() {
        let mut z = covariates(30, 2);
        z[(3, 1)] = f64::NAN;
        assert_eq!(
            build_polynomial_basis(&z, 2),
            Err(BreakError::NonFiniteInput("covariates"))
        );
        let z = DMatrix::from_element(30, 2, 1.5);
        assert!(matches!(
            build_polynomial_basis(&z, 2),
            Err(BreakError::RankDeficient { .. })
        ));
    }

    #[test]
    fn ar_design_shift() {
        let (x, ye) = lag_embedding(&[1.0, 2.0, 3.0, 4.0], 1);
        assert_eq!(
            x,
            DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 1.0, 2.0, 1.0, 3.0])
        );
        assert_eq!(ye, vec![2.0, 3.0, 4.0]);

        let y: Vec<f64> = (1..=12).map(|v| v as f64 + (v as f64).sin()).collect();
        let (x, ye) = build_ar_design(&y, 1).unwrap();
        assert_eq!(x.n_eff(), 11);
        for t in 0..11 {
            assert_eq!(x.matrix()[(t, 0)], 1.0);
            assert_eq!(x.matrix()[(t, 1)], y[t]);
            assert_eq!(ye[t], y[t + 1]);
        }
        assert!(matches!(
            build_ar_design(&[1.0, 2.0, 3.0, 4.0], 1),
            Err(BreakError::SampleTooShort { .. })
        ));
    }

    #[test]
    fn ar_design_counts() {
        let y: Vec<f64> = (0..300).map(|t| ((t * 37 % 101) as f64).sqrt()).collect();
        let (x, ye) = build_ar_design(&y, 4).unwrap();
        assert_eq!((x.n_eff(), x.p(), ye.len()), (296, 5, 296));
        assert!(matches!(
            build_ar_design(&y, 300),
            Err(BreakError::SampleTooShort { .. })
        ));
    }

    #[test]
    fn split_blocks() {
        let z = covariates(10, 1);
        let d = build_raw_design(&z, false).unwrap();
        let s = split_design(&d, 0.5).unwrap();
        assert_eq!(s.split_index, 5);
        for t in 0..10 {
            assert_eq!(s.x[(t, 0)], d.matrix()[(t, 0)]);
            let expect = if t < 5 { 0.0 } else { d.matrix()[(t, 0)] };
            assert_eq!(s.x[(t, 1)], expect);
        }
    }

    #[test]
    fn split_infeasible_and_floor() {
        let z = covariates(100, 2);
        let d = build_polynomial_basis(&z, 2).unwrap();
        assert!(matches!(
            split_design(&d, 0.999),
            Err(BreakError::BreakGridInfeasible { .. })
        ));
        assert_eq!(split_index(200, 0.35), 70);
        let z = covariates(200, 2);
        let d = build_polynomial_basis(&z, 2).unwrap();
        assert_eq!(split_design(&d, 0.35).unwrap().split_index, 70);
    }
}
