// SPDX-License-Identifier: MIT OR Apache-2.0

//! The `test` pipeline: design, Wald process, V-hat, statistic, decision.

use serde::{Deserialize, Serialize};
use strucbreak::break_process::{compute_break_process, BreakGrid};
use strucbreak::design::RawSample;
use strucbreak::har::{self, KernelKind};
use strucbreak::montecarlo::config_hash;
use strucbreak::null_sim::{critical_values, LimitPathConfig};
use strucbreak::test_stats::{decide, statistic, sup_stat, Functional, TestReport, REPORT_SCHEMA_VERSION};

use crate::config::{CvChoice, ResolvedRun, RunConfig};
use crate::error::CliError;
use crate::ingest::ingest_csv;

pub const UNCORRECTED_WARNING: &str =
    "uncorrected: V-hat fixed at 1, higher-order serial dependence is ignored and the test can be badly oversized";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub config_hash: String,
    pub input: String,
    pub n_obs: usize,
    pub n_eff: usize,
    pub p: usize,
    pub design: String,
    pub gamma_star: f64,
    pub grid_step: f64,
    pub grid_points: usize,
    pub variance_mode: String,
    pub kernel: String,
    pub zeta_mode: String,
    pub bandwidth: Option<usize>,
    pub v_hat: f64,
    pub raw_v_hat: f64,
    pub uncorrected: bool,
    pub lse_break_fraction: Option<f64>,
    pub test: TestReport,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub gamma: f64,
    pub wald: f64,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestRun {
    pub report: RunReport,
    pub plot: Vec<PlotRow>,
}

fn label<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|j| j.as_str().map(str::to_string))
        .unwrap_or_default()
}

/// Read the input named in the configuration and run the test on it.
pub fn run_test(cfg: &RunConfig) -> Result<TestRun, CliError> {
    let resolved = cfg.resolve()?;
    let sample = ingest_csv(&resolved.input, &resolved.response, &resolved.covariates)?;
    run_on_sample(&sample, &resolved, &config_hash(cfg))
}

pub fn run_on_sample(
    sample: &RawSample,
    run: &ResolvedRun,
    hash: &str,
) -> Result<TestRun, CliError> {
    let (design, y) = run
        .design
        .build(sample)
        .map_err(|e| CliError::from_break("design", e))?;
    let grid = BreakGrid::new(run.gamma_star, run.grid_step)
        .map_err(|e| CliError::from_break("grid", e))?;
    let bp = compute_break_process(&design, &y, &grid, run.variance)
        .map_err(|e| CliError::from_break("break process", e))?;
    let est = har::estimate(&design, &y, &run.kernel, run.variance, run.zeta)
        .map_err(|e| CliError::from_break("har", e))?;
    let stat = statistic(run.functional, &bp, &est);

    let mut test = match &run.cv {
        CvChoice::Table(table, origin) if matches!(run.functional, Functional::Sup | Functional::Avg) => {
            let mut t = table
                .decide(stat, run.functional, run.gamma_star, &run.levels)
                .map_err(|e| CliError::from_break("critical values", e))?;
            t.critical_value_source = origin.clone();
            t
        }
        choice => {
            let mut lp = LimitPathConfig::new(run.gamma_star, run.functional, 1);
            if let CvChoice::Simulate {
                n_grid,
                reps,
                seed,
                construction,
            } = *choice
            {
                lp = LimitPathConfig {
                    n_grid,
                    reps,
                    seed,
                    construction,
                    ..lp
                };
            }
            let null = critical_values(&lp).map_err(|e| CliError::from_break("null simulation", e))?;
            decide(stat, run.functional, run.gamma_star, &null, &run.levels)
                .map_err(|e| CliError::from_break("decision", e))?
        }
    };
    test.v_hat = est.v_hat;
    if run.functional == Functional::Sup {
        test.gamma_hat = Some(sup_stat(&bp, &est).1);
    }

    let uncorrected = run.kernel.kind == KernelKind::None;
    let mut warnings = Vec::new();
    if uncorrected {
        warnings.push(UNCORRECTED_WARNING.to_string());
    }
    if est.floored {
        warnings.push(format!(
            "V-hat {:.3e} was floored at {:.0e}",
            est.raw_v_hat,
            har::V_HAT_FLOOR
        ));
    }
    test.warnings = warnings.clone();

    let plot = bp
        .grid
        .points
        .iter()
        .zip(bp.wald.iter().zip(&bp.q))
        .map(|(&gamma, (&wald, &q))| PlotRow { gamma, wald, q })
        .collect();
    let report = RunReport {
        schema_version: REPORT_SCHEMA_VERSION,
        config_hash: hash.to_string(),
        input: run.input.display().to_string(),
        n_obs: sample.n(),
        n_eff: design.n_eff(),
        p: design.p(),
        design: design_detail(&run.design),
        gamma_star: run.gamma_star,
        grid_step: run.grid_step,
        grid_points: bp.grid.len(),
        variance_mode: label(&run.variance),
        kernel: run.kernel.label(),
        zeta_mode: label(&run.zeta),
        bandwidth: (!uncorrected).then_some(est.bandwidth),
        v_hat: est.v_hat,
        raw_v_hat: est.raw_v_hat,
        uncorrected,
        lse_break_fraction: bp.lse_break_fraction(),
        test,
        warnings,
    };
    Ok(TestRun { report, plot })
}

fn design_detail(spec: &strucbreak::design::DesignSpec) -> String {
    use strucbreak::design::BasisKind;
    match spec.kind {
        BasisKind::PolynomialSieve { degree } => format!("polynomial degree {degree}"),
        BasisKind::ArLags { order } => format!("AR({order})"),
        BasisKind::RawColumns if spec.include_intercept => "raw columns with intercept".into(),
        BasisKind::RawColumns => "raw columns".into(),
    }
}

impl TestRun {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.report).expect("report serialises") + "\n"
    }

    pub fn to_plot_csv(&self) -> String {
        let mut out = String::from("gamma,wald,q\n");
        for r in &self.plot {
            out.push_str(&format!("{},{},{}\n", r.gamma, r.wald, r.q));
        }
        out
    }

    pub fn to_text(&self) -> String {
        let r = &self.report;
        let t = &r.test;
        let mut out = String::new();
        out.push_str(&format!("input        {}\n", r.input));
        out.push_str(&format!(
            "design       {} (p={}, n_eff={})\n",
            r.design, r.p, r.n_eff
        ));
        out.push_str(&format!(
            "trimming     [{}, {}] step {} ({} points)\n",
            r.gamma_star,
            1.0 - r.gamma_star,
            r.grid_step,
            r.grid_points
        ));
        out.push_str(&format!("variance     {}\n", r.variance_mode));
        match r.bandwidth {
            Some(bw) => out.push_str(&format!(
                "kernel       {} bandwidth {} zeta {}\n",
                r.kernel, bw, r.zeta_mode
            )),
            None => out.push_str("kernel       none\n"),
        }
        out.push_str(&format!("V-hat        {:.6}\n", r.v_hat));
        out.push_str(&format!("statistic    {} = {:.6}\n", t.functional, t.statistic));
        if let Some(g) = t.gamma_hat {
            out.push_str(&format!("argmax       {g:.4}\n"));
        }
        if let Some(g) = r.lse_break_fraction {
            out.push_str(&format!("LS break     {g:.4}\n"));
        }
        for d in &t.decisions {
            out.push_str(&format!(
                "level {:>5.3}  cv {:>9.4}  {}\n",
                d.level,
                d.critical_value,
                if d.reject { "reject" } else { "do not reject" }
            ));
        }
        if let Some(p) = t.p_value {
            out.push_str(&format!("p-value      {p:.4}\n"));
        }
        out.push_str(&format!("cv source    {}\n", t.critical_value_source));
        out.push_str(&format!("config hash  {}\n", r.config_hash));
        for w in &r.warnings {
            out.push_str(&format!("warning: {w}\n"));
        }
        out
    }
}
