// SPDX-License-Identifier: MIT OR Apache-2.0

//! Three operations for the browser page. Each returns a JSON string so the
//! page needs nothing beyond `JSON.parse`.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use strucbreak::break_process::{compute_break_process, BreakGrid};
use strucbreak::design::DesignSpec;
use strucbreak::har::{self, KernelSpec, ZetaMode};
use strucbreak::montecarlo::{gen_dgp, DgpKind, DgpSpec};
use strucbreak::null_sim::{
    critical_values, simulate_q_path, trimmed_range, LimitPathConfig, PathConstruction,
};
use strucbreak::regression::VarianceMode;
use strucbreak::rng::stream;
use strucbreak::test_stats::{statistic, sup_stat, CriticalValueTable, Functional};

#[derive(Serialize)]
struct SamplePath {
    gamma: Vec<f64>,
    q: Vec<f64>,
    v_hat: f64,
    statistic: f64,
    gamma_hat: f64,
    critical_value: f64,
    reject: bool,
    breaks: Vec<f64>,
}

#[derive(Serialize)]
struct LimitPath {
    gamma: Vec<f64>,
    q: Vec<f64>,
    sup: f64,
}

#[derive(Serialize)]
struct Quantile {
    functional: String,
    gamma_star: f64,
    level: f64,
    critical_value: f64,
    reps: usize,
}

#[derive(Serialize)]
struct Failure {
    error: String,
}

fn reply<T: Serialize>(r: Result<T, String>) -> String {
    match r {
        Ok(v) => serde_json::to_string(&v),
        Err(error) => serde_json::to_string(&Failure { error }),
    }
    .expect("serialisable")
}

/// Simulate a catalog design and return its recentred Wald path with the
/// sup test at 5% against the tabulated critical value.
#[wasm_bindgen]
pub fn sample_path(dgp: &str, n: usize, degree: usize, gamma_star: f64, kernel: &str, seed: u64) -> String {
    reply((|| {
        let kind: DgpKind = dgp.parse().map_err(|e: strucbreak::BreakError| e.to_string())?;
        let design = match kind {
            DgpKind::Autoregressive { .. } => DesignSpec::ar(degree.max(1)),
            _ => DesignSpec::polynomial(degree),
        };
        let kernel: KernelSpec = kernel.parse().map_err(|e: strucbreak::BreakError| e.to_string())?;
        let sim = gen_dgp(&DgpSpec::new(kind, n), &mut stream(seed, 0)).map_err(|e| e.to_string())?;
        let (x, y) = design.build(&sim.sample).map_err(|e| e.to_string())?;
        let grid = BreakGrid::with_default_step(gamma_star).map_err(|e| e.to_string())?;
        let mode = VarianceMode::EickerWhite;
        let bp = compute_break_process(&x, &y, &grid, mode).map_err(|e| e.to_string())?;
        let est = har::estimate(&x, &y, &kernel, mode, ZetaMode::OnesVector).map_err(|e| e.to_string())?;
        let cv = CriticalValueTable::bundled()
            .lookup(Functional::Sup, gamma_star, 0.05)
            .map_err(|e| e.to_string())?;
        let stat = statistic(Functional::Sup, &bp, &est);
        Ok(SamplePath {
            q: bp.q.iter().map(|q| q / est.v_hat.sqrt()).collect(),
            gamma: bp.grid.points.clone(),
            v_hat: est.v_hat,
            statistic: stat,
            gamma_hat: sup_stat(&bp, &est).1,
            critical_value: cv,
            reject: stat > cv,
            breaks: sim.breaks,
        })
    })())
}

/// One draw of the limit process on the trimmed grid.
#[wasm_bindgen]
pub fn limit_path(n_grid: usize, gamma_star: f64, seed: u64) -> String {
    reply((|| {
        if n_grid < 100 {
            return Err("grid resolution must be at least 100".to_string());
        }
        let range = trimmed_range(n_grid, gamma_star).map_err(|e| e.to_string())?;
        let path = simulate_q_path(n_grid, PathConstruction::Gaussian, &mut stream(seed, 0));
        let q = path.q_trimmed(range.clone());
        Ok(LimitPath {
            gamma: range.map(|k| k as f64 / n_grid as f64).collect(),
            sup: q.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            q,
        })
    })())
}

/// Simulated critical value of `sup`, `avg` or `expq(c)` at one level.
#[wasm_bindgen]
pub fn critical_value(functional: &str, gamma_star: f64, level: f64, reps: usize, seed: u64) -> String {
    reply((|| {
        let f: Functional = functional.parse().map_err(|e: strucbreak::BreakError| e.to_string())?;
        if !(level > 0.0 && level < 1.0) {
            return Err("level must lie in (0,1)".into());
        }
        let cfg = LimitPathConfig {
            n_grid: 1000,
            reps,
            ..LimitPathConfig::new(gamma_star, f, seed)
        };
        let null = critical_values(&cfg).map_err(|e| e.to_string())?;
        Ok(Quantile {
            functional: f.to_string(),
            gamma_star,
            level,
            critical_value: null.critical_value(level),
            reps,
        })
    })())
}
