// SPDX-License-Identifier: MIT OR Apache-2.0

//! Least squares and the second-moment estimators used by the Wald process.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{BreakError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub coef: DVector<f64>,
    pub residuals: DVector<f64>,
    pub rss: f64,
}

/// Least squares by Householder QR. The rank check uses the singular
/// values of R, which coincide with those of X.
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<OlsFit> {
    let (n, k) = x.shape();
    assert_eq!(n, y.len(), "row count must match response length");
    if n < k {
        return Err(BreakError::SampleTooShort {
            required: k,
            actual: n,
        });
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(BreakError::NonFiniteInput("regression data"));
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let sv = r.singular_values();
    let smax = sv.max();
    let smin = sv.min();
    let tol = n.max(k) as f64 * f64::EPSILON * smax;
    if !(smin > tol) {
        return Err(BreakError::RankDeficient {
            smallest_singular: smin,
        });
    }
    let mut qty = y.clone();
    qr.q_tr_mul(&mut qty);
    let rhs = qty.rows(0, k).into_owned();
    let coef = r
        .solve_upper_triangular(&rhs)
        .ok_or(BreakError::RankDeficient {
            smallest_singular: smin,
        })?;
    let residuals = y - x * &coef;
    let rss = residuals.norm_squared();
    Ok(OlsFit {
        coef,
        residuals,
        rss,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum VarianceMode {
    /// n^{-1} sum x_t x_t' e_t^2
    #[default]
    EickerWhite,
    /// sigma^2 M with sigma^2 = n^{-1} sum e_t^2
    Homoskedastic,
}

impl std::str::FromStr for VarianceMode {
    type Err = BreakError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "eicker_white" | "ew" | "white" => Ok(VarianceMode::EickerWhite),
            "homoskedastic" | "homo" => Ok(VarianceMode::Homoskedastic),
            _ => Err(BreakError::InvalidConfig(format!("unknown variance mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentMatrices {
    pub m_hat: DMatrix<f64>,
    pub omega_hat: DMatrix<f64>,
    pub mode: VarianceMode,
    pub sigma2_hat: Option<f64>,
}

/// Second moment of the regressors, n^{-1} X'X, symmetrised.
pub fn second_moment(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows() as f64;
    let mut m = x.tr_mul(x) / n;
    symmetrize(&mut m);
    m
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let k = m.nrows();
    for i in 0..k {
        for j in (i + 1)..k {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// M-hat and Omega-hat for a design (full or split) and its OLS residuals.
/// Both divide by the number of rows; no degrees-of-freedom correction.
pub fn moment_matrices(
    x: &DMatrix<f64>,
    residuals: &DVector<f64>,
    mode: VarianceMode,
) -> MomentMatrices {
    assert_eq!(x.nrows(), residuals.len());
    let n = x.nrows() as f64;
    let m_hat = second_moment(x);
    match mode {
        VarianceMode::EickerWhite => {
            let mut weighted = x.clone();
            for (mut row, e) in weighted.row_iter_mut().zip(residuals.iter()) {
                row *= *e;
            }
            let mut omega_hat = weighted.tr_mul(&weighted) / n;
            symmetrize(&mut omega_hat);
            MomentMatrices {
                m_hat,
                omega_hat,
                mode,
                sigma2_hat: None,
            }
        }
        VarianceMode::Homoskedastic => {
            let sigma2 = residuals.norm_squared() / n;
            let omega_hat = &m_hat * sigma2;
            MomentMatrices {
                m_hat,
                omega_hat,
                mode,
                sigma2_hat: Some(sigma2),
            }
        }
    }
}
