// SPDX-License-Identifier: MIT OR Apache-2.0

//! Replicated rejection-rate experiments over kernels, functionals and
//! levels.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::dgp::{gen_dgp, DgpSpec};
use crate::break_process::{compute_break_process, BreakGrid};
use crate::design::DesignSpec;
use crate::error::{BreakError, Result};
use crate::har::{estimate, KernelSpec, ZetaMode};
use crate::null_sim::{
    andrews_transform, critical_values, simulate_bessel_sup, BesselConfig, LimitPathConfig,
};
use crate::regression::VarianceMode;
use crate::rng::{map_reps, stream};
use crate::test_stats::{statistic, CriticalValueTable, Functional};

/// First 16 hex digits of the SHA-256 of the canonical JSON encoding.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("config serialises");
    let digest = Sha256::digest(&json);
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CriticalValueSource {
    /// Tabulated limit quantiles (sup and avg only).
    Bundled,
    /// Quantiles of the simulated limit process.
    Simulate {
        n_grid: usize,
        reps: usize,
        seed: u64,
    },
    /// Fixed-dimension Bessel sup quantiles mapped to the Q scale.
    Bessel {
        n_grid: usize,
        reps: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dgp: DgpSpec,
    pub design: DesignSpec,
    pub gamma_star: f64,
    pub grid_step: f64,
    pub variance_mode: VarianceMode,
    pub zeta_mode: ZetaMode,
    pub kernels: Vec<KernelSpec>,
    pub functionals: Vec<Functional>,
    pub levels: Vec<f64>,
    pub critical_values: CriticalValueSource,
    pub reps: usize,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn new(dgp: DgpSpec, design: DesignSpec, gamma_star: f64) -> Self {
        Self {
            dgp,
            design,
            gamma_star,
            grid_step: 1.0 / 200.0,
            variance_mode: VarianceMode::default(),
            zeta_mode: ZetaMode::default(),
            kernels: vec![KernelSpec::parzen(14.0)],
            functionals: vec![Functional::Sup],
            levels: vec![0.05],
            critical_values: CriticalValueSource::Bundled,
            reps: 500,
            seed: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(BreakError::InvalidConfig("reps must be positive".into()));
        }
        if self.kernels.is_empty() || self.functionals.is_empty() || self.levels.is_empty() {
            return Err(BreakError::InvalidConfig(
                "kernels, functionals and levels must be nonempty".into(),
            ));
        }
        for f in &self.functionals {
            f.validate()?;
            if let Functional::ExpW { .. } = f {
                return Err(BreakError::FunctionalMismatch(
                    "ExpW has no limit null; use the envelope routine".into(),
                ));
            }
        }
        if self.levels.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return Err(BreakError::InvalidConfig("levels must lie in (0,1)".into()));
        }
        self.dgp.kind.validate()?;
        self.dgp.innovation.validate()?;
        BreakGrid::new(self.gamma_star, self.grid_step).map(|_| ())
    }

    pub fn hash(&self) -> String {
        config_hash(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub kernel: String,
    pub functional: Functional,
    pub level: f64,
    pub critical_value: f64,
    pub rejections: usize,
    pub valid: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSummary {
    pub kernel: String,
    pub mean_v_hat: f64,
    pub floored: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub dgp: String,
    pub n: usize,
    pub p: usize,
    pub reps: usize,
    pub seed: u64,
    pub config_hash: String,
    pub cells: Vec<Cell>,
    pub kernels: Vec<KernelSummary>,
    pub failures: usize,
    pub failure_examples: Vec<String>,
    /// Per replication, per kernel, per functional statistic (NaN on failure).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub statistics: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone)]
struct RepOutcome {
    p: usize,
    /// kernel-major, functional-minor
    stats: Vec<f64>,
    v_hat: Vec<f64>,
    floored: Vec<bool>,
}

fn run_rep(cfg: &ExperimentConfig, grid: &BreakGrid, rep: usize) -> Result<RepOutcome> {
    let mut rng = stream(cfg.seed, rep as u64);
    let sim = gen_dgp(&cfg.dgp, &mut rng)?;
    let (design, y) = cfg.design.build(&sim.sample)?;
    let bp = compute_break_process(&design, &y, grid, cfg.variance_mode)?;
    let mut out = RepOutcome {
        p: design.p(),
        stats: Vec::with_capacity(cfg.kernels.len() * cfg.functionals.len()),
        v_hat: Vec::new(),
        floored: Vec::new(),
    };
    for k in &cfg.kernels {
        let har = estimate(&design, &y, k, cfg.variance_mode, cfg.zeta_mode)?;
        for f in &cfg.functionals {
            out.stats.push(statistic(*f, &bp, &har));
        }
        out.v_hat.push(har.v_hat);
        out.floored.push(har.floored);
    }
    Ok(out)
}

fn critical_value(
    cfg: &ExperimentConfig,
    f: Functional,
    level: f64,
    p: usize,
    table: &CriticalValueTable,
) -> Result<f64> {
    match cfg.critical_values {
        CriticalValueSource::Bundled => match f {
            Functional::Sup | Functional::Avg => table.lookup(f, cfg.gamma_star, level),
            _ => {
                let null = critical_values(&LimitPathConfig::new(cfg.gamma_star, f, cfg.seed))?;
                Ok(null.critical_value(level))
            }
        },
        CriticalValueSource::Simulate { n_grid, reps, seed } => {
            let null = critical_values(&LimitPathConfig {
                n_grid,
                gamma_star: cfg.gamma_star,
                reps,
                seed,
                ..LimitPathConfig::new(cfg.gamma_star, f, seed)
            })?;
            Ok(null.critical_value(level))
        }
        CriticalValueSource::Bessel { n_grid, reps, seed } => {
            if f != Functional::Sup {
                return Err(BreakError::FunctionalMismatch(
                    "fixed-dimension critical values exist for sup only".into(),
                ));
            }
            let null = simulate_bessel_sup(
                &BesselConfig {
                    p,
                    n_grid,
                    reps,
                    seed,
                },
                cfg.gamma_star,
            )?;
            Ok(andrews_transform(null.critical_value(level), p, 1.0))
        }
    }
}

pub fn run_experiment(cfg: &ExperimentConfig, keep_statistics: bool) -> Result<ExperimentResult> {
    cfg.validate()?;
    let grid = BreakGrid::new(cfg.gamma_star, cfg.grid_step)?;
    let outcomes = map_reps(cfg.reps, |i| run_rep(cfg, &grid, i));
    let ok: Vec<&RepOutcome> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
    let failure_examples: Vec<String> = outcomes
        .iter()
        .filter_map(|o| o.as_ref().err().map(|e| e.to_string()))
        .take(5)
        .collect();
    let failures = cfg.reps - ok.len();
    let p = ok.first().map(|o| o.p).unwrap_or(0);
    let nf = cfg.functionals.len();
    let table = CriticalValueTable::bundled();

    let mut cells = Vec::new();
    for (ki, k) in cfg.kernels.iter().enumerate() {
        for (fi, f) in cfg.functionals.iter().enumerate() {
            for &level in &cfg.levels {
                let cv = if ok.is_empty() {
                    f64::NAN
                } else {
                    critical_value(cfg, *f, level, p, &table)?
                };
                let rejections = ok.iter().filter(|o| o.stats[ki * nf + fi] > cv).count();
                cells.push(Cell {
                    kernel: k.label(),
                    functional: *f,
                    level,
                    critical_value: cv,
                    rejections,
                    valid: ok.len(),
                    rate: if ok.is_empty() {
                        f64::NAN
                    } else {
                        rejections as f64 / ok.len() as f64
                    },
                });
            }
        }
    }
    let kernels = cfg
        .kernels
        .iter()
        .enumerate()
        .map(|(ki, k)| KernelSummary {
            kernel: k.label(),
            mean_v_hat: ok.iter().map(|o| o.v_hat[ki]).sum::<f64>() / ok.len().max(1) as f64,
            floored: ok.iter().filter(|o| o.floored[ki]).count(),
        })
        .collect();
    let statistics = keep_statistics.then(|| {
        outcomes
            .iter()
            .map(|o| match o {
                Ok(o) => o.stats.clone(),
                Err(_) => vec![f64::NAN; cfg.kernels.len() * nf],
            })
            .collect()
    });
    Ok(ExperimentResult {
        dgp: cfg.dgp.kind.to_string(),
        n: cfg.dgp.n,
        p,
        reps: cfg.reps,
        seed: cfg.seed,
        config_hash: cfg.hash(),
        cells,
        kernels,
        failures,
        failure_examples,
        statistics,
    })
}

pub const RESULT_CSV_HEADER: &str =
    "dgp,n,p,innovation,gamma_star,kernel,functional,level,critical_value,rate,rejections,valid,reps,seed,config_hash";

impl ExperimentResult {
    /// One row per cell, tagged for exact re-runs.
    pub fn csv_rows(&self, cfg: &ExperimentConfig) -> Vec<String> {
        self.cells
            .iter()
            .map(|c| {
                format!(
                    "{},{},{},{},{},{},{},{},{:.6},{:.4},{},{},{},{},{}",
                    self.dgp,
                    self.n,
                    self.p,
                    cfg.dgp.innovation.label(),
                    cfg.gamma_star,
                    c.kernel,
                    c.functional,
                    c.level,
                    c.critical_value,
                    c.rate,
                    c.rejections,
                    c.valid,
                    self.reps,
                    self.seed,
                    self.config_hash
                )
            })
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{} n={} p={} reps={} seed={} hash={}\n",
            self.dgp, self.n, self.p, self.reps, self.seed, self.config_hash
        );
        out.push_str(&format!(
            "{:<16} {:<10} {:>6} {:>10} {:>8}\n",
            "kernel", "test", "level", "cv", "rate"
        ));
        for c in &self.cells {
            out.push_str(&format!(
                "{:<16} {:<10} {:>6.2} {:>10.4} {:>8.4}\n",
                c.kernel,
                c.functional.to_string(),
                c.level,
                c.critical_value,
                c.rate
            ));
        }
        for k in &self.kernels {
            out.push_str(&format!(
                "mean V-hat [{}] = {:.4} (floored {})\n",
                k.kernel, k.mean_v_hat, k.floored
            ));
        }
        if self.failures > 0 {
            out.push_str(&format!("failed replications: {}\n", self.failures));
        }
        out
    }

    pub fn rate(&self, kernel: &str, functional: Functional, level: f64) -> Option<f64> {
        self.cells
            .iter()
            .find(|c| {
                c.kernel == kernel
                    && c.functional.matches(&functional)
                    && (c.level - level).abs() < 1e-12
            })
            .map(|c| c.rate)
    }
}
