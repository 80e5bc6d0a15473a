// SPDX-License-Identifier: MIT OR Apache-2.0

//! `critvals`, `mc` and `envelope`, each rendered to a string so the
//! binary and the tests share one code path.

use serde::Serialize;
use strucbreak::montecarlo::{
    find_preset, power_curve, run_experiment, EnvelopeConfig, ExperimentConfig, Preset,
    RESULT_CSV_HEADER,
};
use strucbreak::null_sim::{critical_value_table, critical_values, LimitPathConfig, PathConstruction};
use strucbreak::test_stats::Functional;

use crate::config::config_err;
use crate::error::CliError;

pub const TABULATED_TRIMMINGS: [f64; 13] = [
    0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45, 0.46, 0.47, 0.48, 0.49,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum TableFormat {
    Csv,
    Json,
    Text,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CritvalsRequest {
    pub n_grid: usize,
    pub reps: usize,
    pub seed: u64,
    pub gamma_stars: Vec<f64>,
    pub levels: Vec<f64>,
    pub construction: PathConstruction,
    /// `None` tabulates sup and avg together.
    pub functional: Option<Functional>,
}

#[derive(Serialize)]
struct QuantileRow {
    gamma_star: f64,
    level: f64,
    critical_value: f64,
}

pub fn critvals(req: &CritvalsRequest, format: TableFormat) -> Result<String, CliError> {
    let fail = |e| CliError::from_break("critvals", e);
    match req.functional {
        None => {
            let table = critical_value_table(
                req.n_grid,
                req.reps,
                req.seed,
                req.construction,
                &req.gamma_stars,
                &req.levels,
            )
            .map_err(fail)?;
            Ok(match format {
                TableFormat::Csv => table.to_csv(),
                TableFormat::Json => to_json(&table),
                TableFormat::Text => {
                    let mut out = format!(
                        "limit process: N={} reps={} seed={} paths={}\n{:>6} {:>6} {:>9} {:>9}\n",
                        req.n_grid, req.reps, req.seed, req.construction, "gamma*", "level", "sup", "avg"
                    );
                    for r in &table.rows {
                        out.push_str(&format!(
                            "{:>6.2} {:>6.2} {:>9.4} {:>9.4}\n",
                            r.gamma_star, r.level, r.sup_cv, r.avg_cv
                        ));
                    }
                    out
                }
            })
        }
        Some(functional) => {
            let mut rows = Vec::new();
            for &g in &req.gamma_stars {
                let null = critical_values(&LimitPathConfig {
                    n_grid: req.n_grid,
                    gamma_star: g,
                    reps: req.reps,
                    seed: req.seed,
                    functional,
                    construction: req.construction,
                })
                .map_err(fail)?;
                rows.extend(req.levels.iter().map(|&level| QuantileRow {
                    gamma_star: g,
                    level,
                    critical_value: null.critical_value(level),
                }));
            }
            Ok(match format {
                TableFormat::Json => to_json(&rows),
                TableFormat::Csv | TableFormat::Text => {
                    let mut out = format!("gamma_star,level,{functional}\n");
                    for r in &rows {
                        out.push_str(&format!(
                            "{:.2},{:.2},{:.4}\n",
                            r.gamma_star, r.level, r.critical_value
                        ));
                    }
                    out
                }
            })
        }
    }
}

fn to_json<T: Serialize + ?Sized>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serialisable") + "\n"
}

pub fn preset(name: &str) -> Result<Preset, CliError> {
    find_preset(name).ok_or_else(|| config_err(format!("unknown preset {name:?}")))
}

pub fn mc(cfg: &ExperimentConfig, expected: Option<&Preset>, format: TableFormat) -> Result<String, CliError> {
    let result = run_experiment(cfg, false).map_err(|e| CliError::from_break("mc", e))?;
    Ok(match format {
        TableFormat::Csv => {
            let mut out = String::from(RESULT_CSV_HEADER);
            out.push('\n');
            for row in result.csv_rows(cfg) {
                out.push_str(&row);
                out.push('\n');
            }
            out
        }
        TableFormat::Json => to_json(&result),
        TableFormat::Text => {
            let mut out = result.to_text();
            if let Some(p) = expected {
                out.push_str(&format!("published reference for {}:\n", p.name));
                for e in &p.expected {
                    let got = result
                        .rate(&e.kernel, e.functional, e.level)
                        .map(|r| format!("{r:.4}"))
                        .unwrap_or_else(|| "-".into());
                    out.push_str(&format!(
                        "  {:<16} {:<6} {:>5.2} published {:.4} here {}\n",
                        e.kernel,
                        e.functional.to_string(),
                        e.level,
                        e.rate,
                        got
                    ));
                }
            }
            out
        }
    })
}

pub fn envelope(cfg: &EnvelopeConfig, format: TableFormat) -> Result<String, CliError> {
    let curve = power_curve(cfg).map_err(|e| CliError::from_break("envelope", e))?;
    let crossing = curve.crossing();
    Ok(match format {
        TableFormat::Csv => {
            let mut out = String::from("c,power,critical_value\n");
            for ((c, p), cv) in curve.c.iter().zip(&curve.power).zip(&curve.critical_values) {
                out.push_str(&format!("{c:.2},{p:.4},{cv}\n"));
            }
            out
        }
        TableFormat::Json => {
            #[derive(Serialize)]
            struct Out<'a> {
                config: &'a EnvelopeConfig,
                crossing: Option<f64>,
                curve: &'a strucbreak::montecarlo::PowerCurve,
            }
            to_json(&Out {
                config: cfg,
                crossing: crossing.as_ref().ok().copied(),
                curve: &curve,
            })
        }
        TableFormat::Text => {
            let mut out = format!(
                "power envelope: n={} p={} gamma*={} reps={} null reps={} seed={} hash={}\n",
                cfg.n, curve.p, cfg.gamma_star, curve.valid_reps, curve.valid_null_reps, cfg.seed, curve.config_hash
            );
            match &crossing {
                Ok(c) => out.push_str(&format!("P(c) = 1/2 at c = {c:.3}\n")),
                Err(e) => out.push_str(&format!("no crossing: {e}\n")),
            }
            let stride = (curve.c.len() / 20).max(1);
            for i in (0..curve.c.len()).step_by(stride) {
                out.push_str(&format!("c {:>6.2}  power {:.4}\n", curve.c[i], curve.power[i]));
            }
            out
        }
    })
}
