// SPDX-License-Identifier: MIT OR Apache-2.0

//! Simulation of the limiting null processes: the Gaussian limit of the
//! recentred Wald process and the fixed-dimension tied-down Bessel process.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{BreakError, Result};
use crate::rng::{map_reps, stream};
use crate::test_stats::{
    avg_of, functional_of_q, sup_of, CriticalValueRow, CriticalValueTable, Functional,
};

pub const DEFAULT_N_GRID: usize = 3600;
pub const DEFAULT_REPS: usize = 10_000;
pub const DEFAULT_LEVELS: [f64; 3] = [0.01, 0.05, 0.10];

/// Indices k with k/N in [gamma_star, 1 - gamma_star], endpoints included.
pub fn trimmed_range(n_grid: usize, gamma_star: f64) -> Result<std::ops::RangeInclusive<usize>> {
    let n = n_grid as f64;
    let lo = (gamma_star * n - 1e-9).ceil().max(1.0) as usize;
    let hi = ((1.0 - gamma_star) * n + 1e-9).floor() as usize;
    let hi = hi.min(n_grid - 1);
    if !(gamma_star > 0.0 && gamma_star < 0.5) || lo > hi {
        return Err(BreakError::InvalidTrim {
            gamma_star,
            step: 1.0 / n,
        });
    }
    Ok(lo..=hi)
}

/// How (W, W-bar) is generated on the grid.
///
/// `Gaussian` draws the jointly Gaussian pair whose covariance is exactly the
/// limit kernel at every grid point. `Ito` uses left-endpoint sums of the
/// stochastic integrals of one Brownian path; it shares the covariance but
/// not the Gaussian law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathConstruction {
    #[default]
    Gaussian,
    Ito,
}

impl std::fmt::Display for PathConstruction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Gaussian => "gaussian",
            Self::Ito => "ito",
        })
    }
}

impl std::str::FromStr for PathConstruction {
    type Err = BreakError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" => Ok(Self::Gaussian),
            "ito" => Ok(Self::Ito),
            other => Err(BreakError::InvalidConfig(format!(
                "unknown path construction '{other}' (expected gaussian or ito)"
            ))),
        }
    }
}

/// One discretised path of (W, W-bar) on the grid k/N, k = 0..=N.
#[derive(Debug, Clone)]
pub struct QPath {
    pub n_grid: usize,
    pub w: Vec<f64>,
    pub w_bar: Vec<f64>,
}

impl QPath {
    /// Build from Brownian increments, using left-endpoint sums for the
    /// stochastic integrals.
    pub fn from_increments(db: &[f64]) -> Self {
        let n = db.len();
        let mut b = vec![0.0; n + 1];
        let mut ito = vec![0.0; n + 1];
        for j in 1..=n {
            ito[j] = ito[j - 1] + b[j - 1] * db[j - 1];
            b[j] = b[j - 1] + db[j - 1];
        }
        let s2 = std::f64::consts::SQRT_2;
        let (b_end, i_end) = (b[n], ito[n]);
        let w = ito.iter().map(|v| s2 * v).collect();
        let w_bar = (0..=n)
            .map(|k| s2 * ((i_end - ito[k]) - b[k] * (b_end - b[k])))
            .collect();
        Self {
            n_grid: n,
            w,
            w_bar,
        }
    }

    /// Exact Gaussian draw on the grid.
    ///
    /// W(t) = sqrt(2) * int_0^t sqrt(s) dB_s. W-bar(t) is
    /// sqrt(2) * int_t^1 (s - t) / sqrt(s) dB_s plus an independent part
    /// phi(t) * beta(2t / phi(t)) with phi(t) = 1 - t + t ln t and beta a
    /// second Brownian motion. Per cell the pair (int sqrt(s) dB,
    /// int dB / sqrt(s)) is drawn from its exact 2x2 covariance, so the
    /// grid values have the limit covariance with no discretisation error.
    pub fn gaussian<R: Rng + ?Sized>(n_grid: usize, rng: &mut R) -> Self {
        let n = n_grid;
        let nf = n as f64;
        let mut sa = vec![0.0; n + 1];
        let mut sc = vec![0.0; n + 1];
        for j in 1..=n {
            let z1: f64 = rng.sample(StandardNormal);
            // Var int sqrt(s) dB over the cell = (t_j^2 - t_{j-1}^2) / 2
            let var_a = (2 * j - 1) as f64 / (2.0 * nf * nf);
            let a = var_a.sqrt() * z1;
            let c = if j == 1 {
                0.0
            } else {
                let z2: f64 = rng.sample(StandardNormal);
                let jf = j as f64;
                let var_c = (1.0 / (jf - 1.0)).ln_1p();
                let beta = (1.0 / nf) / var_a.sqrt();
                let cond = (var_c - 2.0 / (2.0 * jf - 1.0)).max(0.0);
                beta * z1 + cond.sqrt() * z2
            };
            sa[j] = sa[j - 1] + a;
            sc[j] = sc[j - 1] + c;
        }
        let s2 = std::f64::consts::SQRT_2;
        let w: Vec<f64> = sa.iter().map(|v| s2 * v).collect();
        let mut w_bar = vec![0.0; n + 1];
        w_bar[0] = w[n];
        let mut beta = 0.0;
        let mut tau_prev = 0.0;
        for (k, wb) in w_bar.iter_mut().enumerate().take(n).skip(1) {
            let t = k as f64 / nf;
            let u = 1.0 - t;
            let phi = u + t * (-u).ln_1p();
            let tau = 2.0 * t / phi;
            beta += (tau - tau_prev).sqrt() * rng.sample::<f64, _>(StandardNormal);
            tau_prev = tau;
            *wb = s2 * ((sa[n] - sa[k]) - t * (sc[n] - sc[k])) + phi * beta;
        }
        Self {
            n_grid: n,
            w,
            w_bar,
        }
    }

    pub fn q_at(&self, k: usize) -> f64 {
        let g = k as f64 / self.n_grid as f64;
        self.w[k] / g + self.w_bar[k] / (1.0 - g) - self.w[self.n_grid]
    }

    pub fn q_trimmed(&self, range: std::ops::RangeInclusive<usize>) -> Vec<f64> {
        range.map(|k| self.q_at(k)).collect()
    }
}

pub fn brownian_increments<R: Rng + ?Sized>(n_grid: usize, rng: &mut R) -> Vec<f64> {
    let sd = (1.0 / n_grid as f64).sqrt();
    (0..n_grid)
        .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

pub fn simulate_q_path<R: Rng + ?Sized>(
    n_grid: usize,
    construction: PathConstruction,
    rng: &mut R,
) -> QPath {
    match construction {
        PathConstruction::Gaussian => QPath::gaussian(n_grid, rng),
        PathConstruction::Ito => QPath::from_increments(&brownian_increments(n_grid, rng)),
    }
}

/// Covariance of the limit process at V = 1 on the open unit interval.
pub fn q_kernel(a: f64, b: f64) -> f64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    lo * (1.0 - hi) / ((1.0 - lo) * hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitPathConfig {
    pub n_grid: usize,
    pub gamma_star: f64,
    pub reps: usize,
    pub seed: u64,
    pub functional: Functional,
    #[serde(default)]
    pub construction: PathConstruction,
}

impl LimitPathConfig {
    pub fn new(gamma_star: f64, functional: Functional, seed: u64) -> Self {
        Self {
            n_grid: DEFAULT_N_GRID,
            gamma_star,
            reps: DEFAULT_REPS,
            seed,
            functional,
            construction: PathConstruction::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_grid < 100 {
            return Err(BreakError::InvalidConfig(format!(
                "grid resolution must be at least 100, got {}",
                self.n_grid
            )));
        }
        if self.reps < 100 {
            return Err(BreakError::InvalidConfig(format!(
                "at least 100 replications required, got {}",
                self.reps
            )));
        }
        self.functional.validate()?;
        trimmed_range(self.n_grid, self.gamma_star).map(|_| ())
    }
}

/// Sorted null draws of one functional at one trimming.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullDistribution {
    pub functional: Functional,
    pub gamma_star: f64,
    pub draws: Vec<f64>,
    pub origin: String,
}

impl NullDistribution {
    pub fn from_draws(
        functional: Functional,
        gamma_star: f64,
        mut draws: Vec<f64>,
        origin: String,
    ) -> Self {
        assert!(!draws.is_empty(), "null distribution needs draws");
        draws.sort_by(f64::total_cmp);
        Self {
            functional,
            gamma_star,
            draws,
            origin,
        }
    }

    pub fn reps(&self) -> usize {
        self.draws.len()
    }

    /// Linear interpolation between order statistics (type 7).
    pub fn quantile(&self, prob: f64) -> f64 {
        quantile_sorted(&self.draws, prob)
    }

    pub fn critical_value(&self, level: f64) -> f64 {
        self.quantile(1.0 - level)
    }

    /// (1 + #{draws >= stat}) / (1 + reps).
    pub fn p_value(&self, stat: f64) -> f64 {
        let below = self.draws.partition_point(|d| *d < stat);
        let at_or_above = self.draws.len() - below;
        (1 + at_or_above) as f64 / (1 + self.draws.len()) as f64
    }
}

pub fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    assert!(!sorted.is_empty());
    let prob = prob.clamp(0.0, 1.0);
    let h = (sorted.len() - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Null draws of a functional of the limit process at V = 1.
pub fn critical_values(config: &LimitPathConfig) -> Result<NullDistribution> {
    config.validate()?;
    if let Functional::ExpW { .. } = config.functional {
        return Err(BreakError::FunctionalMismatch(
            "the ExpW null depends on the dimension and is not a functional of the limit process"
                .into(),
        ));
    }
    let range = trimmed_range(config.n_grid, config.gamma_star)?;
    let draws = map_reps(config.reps, |i| {
        let mut rng = stream(config.seed, i as u64);
        let path = simulate_q_path(config.n_grid, config.construction, &mut rng);
        functional_of_q(config.functional, &path.q_trimmed(range.clone()), 1.0)
            .expect("Q functional")
    });
    Ok(NullDistribution::from_draws(
        config.functional,
        config.gamma_star,
        draws,
        format!(
            "simulated: N={} reps={} seed={} paths={}",
            config.n_grid, config.reps, config.seed, config.construction
        ),
    ))
}

/// sup and avg critical values for several trimmings, sharing one set of
/// paths. Replication `i` uses the same stream as in [`critical_values`].
pub fn critical_value_table(
    n_grid: usize,
    reps: usize,
    seed: u64,
    construction: PathConstruction,
    gamma_stars: &[f64],
    levels: &[f64],
) -> Result<CriticalValueTable> {
    let ranges = gamma_stars
        .iter()
        .map(|g| {
            LimitPathConfig {
                n_grid,
                gamma_star: *g,
                reps,
                seed,
                functional: Functional::Sup,
                construction,
            }
            .validate()?;
            trimmed_range(n_grid, *g)
        })
        .collect::<Result<Vec<_>>>()?;
    let per_rep: Vec<Vec<(f64, f64)>> = map_reps(reps, |i| {
        let mut rng = stream(seed, i as u64);
        let path = simulate_q_path(n_grid, construction, &mut rng);
        ranges
            .iter()
            .map(|r| {
                let q = path.q_trimmed(r.clone());
                (sup_of(&q, 1.0).0, avg_of(&q, 1.0))
            })
            .collect()
    });
    let mut rows = Vec::new();
    for (g_idx, g) in gamma_stars.iter().enumerate() {
        let mut sups: Vec<f64> = per_rep.iter().map(|r| r[g_idx].0).collect();
        let mut avgs: Vec<f64> = per_rep.iter().map(|r| r[g_idx].1).collect();
        sups.sort_by(f64::total_cmp);
        avgs.sort_by(f64::total_cmp);
        for level in levels {
            rows.push(CriticalValueRow {
                gamma_star: *g,
                level: *level,
                sup_cv: quantile_sorted(&sups, 1.0 - level),
                avg_cv: quantile_sorted(&avgs, 1.0 - level),
            });
        }
    }
    Ok(CriticalValueTable { rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BesselConfig {
    pub p: usize,
    pub n_grid: usize,
    pub reps: usize,
    pub seed: u64,
}

/// The tied-down Bessel process of dimension `p` on the trimmed grid.
/// Only the trimmed stretch of each Brownian coordinate is simulated: the
/// value at the lower end, the increments inside, and the jump to 1.
pub fn bessel_path<R: Rng + ?Sized>(
    p: usize,
    n_grid: usize,
    range: std::ops::RangeInclusive<usize>,
    rng: &mut R,
) -> Vec<f64> {
    let (lo, hi) = (*range.start(), *range.end());
    let n = n_grid as f64;
    let m = hi - lo + 1;
    let step_sd = (1.0 / n).sqrt();
    let mut acc = vec![0.0; m];
    let mut b = vec![0.0; m];
    for _ in 0..p {
        b[0] = (lo as f64 / n).sqrt() * rng.sample::<f64, _>(StandardNormal);
        for i in 1..m {
            b[i] = b[i - 1] + step_sd * rng.sample::<f64, _>(StandardNormal);
        }
        let b1 =
            b[m - 1] + ((n_grid - hi) as f64 / n).sqrt() * rng.sample::<f64, _>(StandardNormal);
        for i in 0..m {
            let g = (lo + i) as f64 / n;
            let d = b[i] - g * b1;
            acc[i] += d * d;
        }
    }
    for (i, a) in acc.iter_mut().enumerate() {
        let g = (lo + i) as f64 / n;
        *a /= g * (1.0 - g);
    }
    acc
}

/// Null draws of the supremum of the Bessel process over the trimmed grid.
pub fn simulate_bessel_sup(config: &BesselConfig, gamma_star: f64) -> Result<NullDistribution> {
    if config.p == 0 {
        return Err(BreakError::InvalidConfig(
            "Bessel dimension must be positive".into(),
        ));
    }
    let range = trimmed_range(config.n_grid, gamma_star)?;
    let draws = map_reps(config.reps, |i| {
        let mut rng = stream(config.seed, i as u64);
        bessel_path(config.p, config.n_grid, range.clone(), &mut rng)
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max)
    });
    Ok(NullDistribution::from_draws(
        Functional::Sup,
        gamma_star,
        draws,
        format!(
            "bessel: p={} N={} reps={} seed={}",
            config.p, config.n_grid, config.reps, config.seed
        ),
    ))
}

/// Map a fixed-p critical value to the scale of the V-scaled Q functionals.
pub fn andrews_transform(c_alpha: f64, p: usize, v_hat: f64) -> f64 {
    (c_alpha - p as f64) * (v_hat / (2.0 * p as f64)).sqrt()
}

pub fn andrews_inverse(c_star: f64, p: usize, v_hat: f64) -> f64 {
    c_star * (2.0 * p as f64 / v_hat).sqrt() + p as f64
}
