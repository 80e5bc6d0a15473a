// SPDX-License-Identifier: MIT OR Apache-2.0

//! Power of the ExpW test under its own weighted alternative, as a
//! function of the weight c, and the c at which it crosses one half.
//!
//! Under the alternative y_t = e_t + sqrt(c) s_t with
//! s_t = (n sqrt p)^{-1/2} (g - 1{t/n <= g}) x_t' b0,
//! b0 ~ N(0, (g(1-g) M)^{-1}) and g uniform on the break grid.
//! Break estimates and residuals are linear in sqrt(c), so every c on
//! the grid reuses one pair of fits per break fraction.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::dgp::gen_covariates;
use super::experiment::config_hash;
use crate::break_process::{compute_break_process, BreakGrid};
use crate::design::{build_polynomial_basis, split_design, DesignMatrix};
use crate::error::{BreakError, Result};
use crate::null_sim::quantile_sorted;
use crate::regression::{ols, second_moment, VarianceMode};
use crate::rng::{map_reps, stream};
use crate::test_stats::log_expw_of;

/// Offset separating the null streams from the alternative streams.
const NULL_SEED_TAG: u64 = 0x6e75_6c6c_5f64_7261;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeConfig {
    pub n: usize,
    pub degree: usize,
    pub gamma_star: f64,
    pub grid_step: f64,
    pub reps: usize,
    pub null_reps: usize,
    pub seed: u64,
    pub c_min: f64,
    pub c_max: f64,
    pub c_step: f64,
    pub level: f64,
    pub variance_mode: VarianceMode,
}

impl EnvelopeConfig {
    pub fn new(n: usize, degree: usize, gamma_star: f64) -> Self {
        Self {
            n,
            degree,
            gamma_star,
            grid_step: 1.0 / 200.0,
            reps: 300,
            null_reps: 1000,
            seed: 1,
            c_min: 0.05,
            c_max: 20.0,
            c_step: 0.05,
            level: 0.05,
            variance_mode: VarianceMode::default(),
        }
    }

    pub fn c_grid(&self) -> Vec<f64> {
        let count = ((self.c_max - self.c_min) / self.c_step + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|i| self.c_min + i as f64 * self.c_step)
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if !(self.c_min > 0.0 && self.c_step > 0.0 && self.c_max >= self.c_min) {
            return Err(BreakError::InvalidConfig(
                "c grid must be positive and increasing".into(),
            ));
        }
        if self.reps == 0 || self.null_reps < 20 {
            return Err(BreakError::InvalidConfig(
                "envelope needs reps > 0 and at least 20 null replications".into(),
            ));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(BreakError::InvalidConfig("level must lie in (0,1)".into()));
        }
        BreakGrid::new(self.gamma_star, self.grid_step).map(|_| ())
    }
}

/// One alternative draw: design, noise, unit-weight signal and its break.
#[derive(Debug, Clone)]
pub struct EnvelopeDraw {
    pub design: DesignMatrix,
    pub noise: Vec<f64>,
    pub signal: Vec<f64>,
    pub gamma: f64,
}

impl EnvelopeDraw {
    pub fn response(&self, c: f64) -> Vec<f64> {
        let r = c.sqrt();
        self.noise
            .iter()
            .zip(&self.signal)
            .map(|(e, s)| e + r * s)
            .collect()
    }
}

pub fn envelope_draw(cfg: &EnvelopeConfig, grid: &BreakGrid, rep: usize) -> Result<EnvelopeDraw> {
    let mut rng = stream(cfg.seed, rep as u64);
    let n = cfg.n;
    let z = gen_covariates(n, &mut rng);
    let design = build_polynomial_basis(&z, cfg.degree)?;
    let noise: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let gamma = grid.points[rng.random_range(0..grid.len())];
    let p = design.p();
    let m = second_moment(design.matrix());
    let chol = m.cholesky().ok_or(BreakError::SingularOmega)?;
    let u = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
    // L' b = u gives Cov(b) = M^{-1}
    let b0 = chol
        .l()
        .transpose()
        .solve_upper_triangular(&u)
        .ok_or(BreakError::SingularOmega)?
        / (gamma * (1.0 - gamma)).sqrt();
    let split = crate::design::split_index(n, gamma);
    let scale = 1.0 / (n as f64 * (p as f64).sqrt()).sqrt();
    let fitted = design.matrix() * &b0;
    let signal = (0..n)
        .map(|t| {
            let gt = if t < split { gamma - 1.0 } else { gamma };
            scale * gt * fitted[t]
        })
        .collect();
    Ok(EnvelopeDraw {
        design,
        noise,
        signal,
        gamma,
    })
}

/// In-place Cholesky of a row-major k x k matrix; false if not PD.
fn cholesky(a: &mut [f64], k: usize) -> bool {
    for j in 0..k {
        let mut d = a[j * k + j];
        for l in 0..j {
            d -= a[j * k + l] * a[j * k + l];
        }
        if !(d > 0.0) {
            return false;
        }
        let d = d.sqrt();
        a[j * k + j] = d;
        for i in (j + 1)..k {
            let mut s = a[i * k + j];
            for l in 0..j {
                s -= a[i * k + l] * a[j * k + l];
            }
            a[i * k + j] = s / d;
        }
    }
    true
}

/// d' (L L')^{-1} d for a factor stored by [`cholesky`].
fn chol_quad(l: &[f64], d: &[f64], k: usize, work: &mut [f64]) -> f64 {
    for i in 0..k {
        let mut s = d[i];
        for j in 0..i {
            s -= l[i * k + j] * work[j];
        }
        work[i] = s / l[i * k + i];
    }
    work[..k].iter().map(|v| v * v).sum()
}

/// Pieces of the Wald statistic at one break fraction, as polynomials in
/// r = sqrt(c): delta = d0 + r d1 and B = B00 + 2r B01 + r^2 B11.
struct WaldParts {
    d0: Vec<f64>,
    d1: Vec<f64>,
    b00: Vec<f64>,
    b01: Vec<f64>,
    b11: Vec<f64>,
}

fn restricted_block(
    chol: &nalgebra::Cholesky<f64, nalgebra::Dyn>,
    omega: &DMatrix<f64>,
    p: usize,
) -> Vec<f64> {
    let left = chol.solve(omega);
    let full = chol.solve(&left.transpose());
    let mut out = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..p {
            out[i * p + j] = 0.5 * (full[(p + i, p + j)] + full[(p + j, p + i)]);
        }
    }
    out
}

fn cross_moment(
    x: &DMatrix<f64>,
    a: &DVector<f64>,
    b: &DVector<f64>,
    mode: VarianceMode,
) -> DMatrix<f64> {
    let n = x.nrows() as f64;
    match mode {
        VarianceMode::EickerWhite => {
            let mut xa = x.clone();
            for (mut row, (ai, bi)) in xa.row_iter_mut().zip(a.iter().zip(b.iter())) {
                row *= ai * bi;
            }
            let m = x.tr_mul(&xa) / n;
            (&m + m.transpose()) * 0.5
        }
        VarianceMode::Homoskedastic => second_moment(x) * (a.dot(b) / n),
    }
}

fn wald_parts(draw: &EnvelopeDraw, gamma: f64, mode: VarianceMode) -> Result<WaldParts> {
    let split = split_design(&draw.design, gamma)?;
    let p = split.p;
    let e = DVector::from_column_slice(&draw.noise);
    let s = DVector::from_column_slice(&draw.signal);
    let fe = ols(&split.x, &e)?;
    let fs = ols(&split.x, &s)?;
    let m = second_moment(&split.x);
    let chol = m.cholesky().ok_or(BreakError::SingularVariance { gamma })?;
    let b00 = restricted_block(
        &chol,
        &cross_moment(&split.x, &fe.residuals, &fe.residuals, mode),
        p,
    );
    let b01 = restricted_block(
        &chol,
        &cross_moment(&split.x, &fe.residuals, &fs.residuals, mode),
        p,
    );
    let b11 = restricted_block(
        &chol,
        &cross_moment(&split.x, &fs.residuals, &fs.residuals, mode),
        p,
    );
    Ok(WaldParts {
        d0: fe.coef.rows(p, p).iter().copied().collect(),
        d1: fs.coef.rows(p, p).iter().copied().collect(),
        b00,
        b01,
        b11,
    })
}

/// log ExpW at every c on the grid for one alternative draw.
fn alternative_stats(
    cfg: &EnvelopeConfig,
    grid: &BreakGrid,
    cs: &[f64],
    rep: usize,
) -> Result<Vec<f64>> {
    let draw = envelope_draw(cfg, grid, rep)?;
    let p = draw.design.p();
    let n = draw.design.n_eff() as f64;
    let parts = grid
        .points
        .iter()
        .map(|g| wald_parts(&draw, *g, cfg.variance_mode))
        .collect::<Result<Vec<_>>>()?;
    let mut b = vec![0.0; p * p];
    let mut d = vec![0.0; p];
    let mut work = vec![0.0; p];
    let mut wald = vec![0.0; grid.len()];
    let mut out = Vec::with_capacity(cs.len());
    for &c in cs {
        let r = c.sqrt();
        for (gi, wp) in parts.iter().enumerate() {
            for i in 0..p * p {
                b[i] = wp.b00[i] + 2.0 * r * wp.b01[i] + c * wp.b11[i];
            }
            for i in 0..p {
                d[i] = wp.d0[i] + r * wp.d1[i];
            }
            if !cholesky(&mut b, p) {
                return Err(BreakError::SingularVariance {
                    gamma: grid.points[gi],
                });
            }
            wald[gi] = n * chol_quad(&b, &d, p, &mut work);
        }
        out.push(log_expw_of(&wald, p, c));
    }
    Ok(out)
}

fn null_wald_path(cfg: &EnvelopeConfig, grid: &BreakGrid, rep: usize) -> Result<(Vec<f64>, usize)> {
    let mut rng = stream(cfg.seed ^ NULL_SEED_TAG, rep as u64);
    let z = gen_covariates(cfg.n, &mut rng);
    let design = build_polynomial_basis(&z, cfg.degree)?;
    let y: Vec<f64> = (0..cfg.n).map(|_| rng.sample(StandardNormal)).collect();
    let bp = compute_break_process(&design, &y, grid, cfg.variance_mode)?;
    Ok((bp.wald, design.p()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCurve {
    pub c: Vec<f64>,
    pub power: Vec<f64>,
    pub critical_values: Vec<f64>,
    pub p: usize,
    pub valid_reps: usize,
    pub valid_null_reps: usize,
    pub config_hash: String,
}

impl PowerCurve {
    /// Smallest c with power at least one half, interpolated linearly
    /// from the previous grid point.
    pub fn crossing(&self) -> Result<f64> {
        let i = self
            .power
            .iter()
            .position(|v| *v >= 0.5)
            .ok_or(BreakError::NoCrossing {
                max_power: self.power.iter().copied().fold(0.0, f64::max),
            })?;
        if i == 0 {
            return Ok(self.c[0]);
        }
        let (c0, c1) = (self.c[i - 1], self.c[i]);
        let (p0, p1) = (self.power[i - 1], self.power[i]);
        Ok(c0 + (0.5 - p0) / (p1 - p0) * (c1 - c0))
    }
}

pub fn power_curve(cfg: &EnvelopeConfig) -> Result<PowerCurve> {
    cfg.validate()?;
    let grid = BreakGrid::new(cfg.gamma_star, cfg.grid_step)?;
    let cs = cfg.c_grid();

    let null: Vec<(Vec<f64>, usize)> = map_reps(cfg.null_reps, |i| null_wald_path(cfg, &grid, i))
        .into_iter()
        .filter_map(|r| r.ok())
        .collect();
    if null.len() < 20 {
        return Err(BreakError::InvalidConfig(
            "too few valid null replications".into(),
        ));
    }
    let p = null[0].1;
    let critical_values: Vec<f64> = cs
        .iter()
        .map(|&c| {
            let mut draws: Vec<f64> = null.iter().map(|(w, _)| log_expw_of(w, p, c)).collect();
            draws.sort_by(f64::total_cmp);
            quantile_sorted(&draws, 1.0 - cfg.level)
        })
        .collect();

    let alt: Vec<Vec<f64>> = map_reps(cfg.reps, |i| alternative_stats(cfg, &grid, &cs, i))
        .into_iter()
        .filter_map(|r| r.ok())
        .collect();
    if alt.is_empty() {
        return Err(BreakError::InvalidConfig(
            "no valid alternative replications".into(),
        ));
    }
    let power = (0..cs.len())
        .map(|j| alt.iter().filter(|s| s[j] > critical_values[j]).count() as f64 / alt.len() as f64)
        .collect();
    Ok(PowerCurve {
        c: cs,
        power,
        critical_values,
        p,
        valid_reps: alt.len(),
        valid_null_reps: null.len(),
        config_hash: config_hash(cfg),
    })
}

/// The power curve and its one-half crossing.
pub fn power_envelope(cfg: &EnvelopeConfig) -> Result<(PowerCurve, f64)> {
    let curve = power_curve(cfg)?;
    let c = curve.crossing()?;
    Ok((curve, c))
}
