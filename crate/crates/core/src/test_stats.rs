// SPDX-License-Identifier: MIT OR Apache-2.0

//! Reductions of a break process to scalar statistics, and decisions
//! against simulated or tabulated null distributions.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::break_process::{leftmost_extreme, BreakProcess};
use crate::error::{BreakError, Result};
use crate::har::HarEstimate;
use crate::null_sim::NullDistribution;

/// Default weight for the exponential statistic.
pub const DEFAULT_EXPQ_C: f64 = 15.0;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Functional {
    Sup,
    Avg,
    ExpQ { c: f64 },
    ExpW { c: f64 },
}

impl Functional {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Functional::ExpQ { c } | Functional::ExpW { c } if !(c > 0.0 && c.is_finite()) => Err(
                BreakError::InvalidConfig(format!("functional weight c must be positive, got {c}")),
            ),
            _ => Ok(()),
        }
    }

    /// Same functional, compared with a tolerance on `c`.
    pub fn matches(&self, other: &Functional) -> bool {
        match (self, other) {
            (Functional::Sup, Functional::Sup) | (Functional::Avg, Functional::Avg) => true,
            (Functional::ExpQ { c: a }, Functional::ExpQ { c: b })
            | (Functional::ExpW { c: a }, Functional::ExpW { c: b }) => {
                (a - b).abs() <= 1e-12 * a.abs().max(1.0)
            }
            _ => false,
        }
    }
}

impl fmt::Display for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Functional::Sup => write!(f, "sup"),
            Functional::Avg => write!(f, "avg"),
            Functional::ExpQ { c } => write!(f, "expq({c})"),
            Functional::ExpW { c } => write!(f, "expw({c})"),
        }
    }
}

impl std::str::FromStr for Functional {
    type Err = BreakError;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let parse_c = |rest: &str| -> Result<f64> {
            let inner = rest
                .strip_prefix('(')
                .and_then(|r| r.strip_suffix(')'))
                .unwrap_or(rest);
            if inner.is_empty() {
                return Ok(DEFAULT_EXPQ_C);
            }
            inner
                .parse::<f64>()
                .map_err(|_| BreakError::InvalidConfig(format!("bad functional weight in {s:?}")))
        };
        let f = if lower == "sup" {
            Functional::Sup
        } else if lower == "avg" || lower == "average" {
            Functional::Avg
        } else if let Some(rest) = lower.strip_prefix("expq") {
            Functional::ExpQ { c: parse_c(rest)? }
        } else if let Some(rest) = lower.strip_prefix("expw") {
            Functional::ExpW { c: parse_c(rest)? }
        } else {
            return Err(BreakError::InvalidConfig(format!(
                "unknown functional {s:?}"
            )));
        };
        f.validate()?;
        Ok(f)
    }
}

fn log_mean_exp(a: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = a.clone().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let (s, n) = a.fold((0.0, 0usize), |(s, n), v| (s + (v - m).exp(), n + 1));
    m + (s / n as f64).ln()
}

/// max of `q / sqrt(v)` and the index of its leftmost maximiser.
pub fn sup_of(q: &[f64], v_hat: f64) -> (f64, usize) {
    assert!(!q.is_empty(), "empty path");
    let idx = leftmost_extreme(q, |a, b| a > b).expect("nonempty");
    (q[idx] / v_hat.sqrt(), idx)
}

pub fn avg_of(q: &[f64], v_hat: f64) -> f64 {
    assert!(!q.is_empty(), "empty path");
    q.iter().sum::<f64>() / q.len() as f64 / v_hat.sqrt()
}

/// (sqrt2/c) log mean exp(c q / sqrt(2 v)), in log-sum-exp form.
pub fn expq_of(q: &[f64], v_hat: f64, c: f64) -> f64 {
    assert!(!q.is_empty(), "empty path");
    let s = c / (2.0 * v_hat).sqrt();
    std::f64::consts::SQRT_2 / c * log_mean_exp(q.iter().map(|v| s * v))
}

/// log ExpW for a Wald path of dimension `p`.
pub fn log_expw_of(wald: &[f64], p: usize, c: f64) -> f64 {
    assert!(!wald.is_empty(), "empty path");
    let r = c / (p as f64).sqrt();
    let w = 0.5 * r / (1.0 + r);
    -0.5 * p as f64 * r.ln_1p() + log_mean_exp(wald.iter().map(|v| w * v))
}

/// Apply a Q-based functional to a path with a given V-hat.
pub fn functional_of_q(f: Functional, q: &[f64], v_hat: f64) -> Result<f64> {
    match f {
        Functional::Sup => Ok(sup_of(q, v_hat).0),
        Functional::Avg => Ok(avg_of(q, v_hat)),
        Functional::ExpQ { c } => Ok(expq_of(q, v_hat, c)),
        Functional::ExpW { .. } => Err(BreakError::FunctionalMismatch(
            "ExpW is defined on the Wald path, not on Q".into(),
        )),
    }
}

pub fn sup_stat(bp: &BreakProcess, har: &HarEstimate) -> (f64, f64) {
    let (s, i) = sup_of(&bp.q, har.v_hat);
    (s, bp.grid.points[i])
}

pub fn avg_stat(bp: &BreakProcess, har: &HarEstimate) -> f64 {
    avg_of(&bp.q, har.v_hat)
}

pub fn expq_stat(bp: &BreakProcess, har: &HarEstimate, c: f64) -> f64 {
    expq_of(&bp.q, har.v_hat, c)
}

pub fn expw_stat(bp: &BreakProcess, c: f64) -> f64 {
    log_expw_of(&bp.wald, bp.p, c)
}

/// The statistic for any functional. ExpW ignores V-hat.
pub fn statistic(f: Functional, bp: &BreakProcess, har: &HarEstimate) -> f64 {
    match f {
        Functional::Sup => sup_stat(bp, har).0,
        Functional::Avg => avg_stat(bp, har),
        Functional::ExpQ { c } => expq_stat(bp, har, c),
        Functional::ExpW { c } => expw_stat(bp, c),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelDecision {
    pub level: f64,
    pub critical_value: f64,
    pub reject: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub schema_version: u32,
    pub functional: Functional,
    pub gamma_star: f64,
    pub statistic: f64,
    pub v_hat: f64,
    pub decisions: Vec<LevelDecision>,
    pub p_value: Option<f64>,
    pub gamma_hat: Option<f64>,
    pub critical_value_source: String,
    pub warnings: Vec<String>,
}

impl TestReport {
    pub fn rejects_at(&self, level: f64) -> Option<bool> {
        self.decisions
            .iter()
            .find(|d| (d.level - level).abs() < 1e-12)
            .map(|d| d.reject)
    }
}

fn check_levels(levels: &[f64]) -> Result<()> {
    if levels.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
        return Err(BreakError::InvalidConfig(format!(
            "levels must lie in (0,1): {levels:?}"
        )));
    }
    Ok(())
}

/// Decision against a simulated null for the same functional and trimming.
pub fn decide(
    stat: f64,
    functional: Functional,
    gamma_star: f64,
    null: &NullDistribution,
    levels: &[f64],
) -> Result<TestReport> {
    check_levels(levels)?;
    if !null.functional.matches(&functional) {
        return Err(BreakError::FunctionalMismatch(format!(
            "statistic is {functional}, null was simulated for {}",
            null.functional
        )));
    }
    if (null.gamma_star - gamma_star).abs() > 1e-12 {
        return Err(BreakError::FunctionalMismatch(format!(
            "statistic uses trimming {gamma_star}, null uses {}",
            null.gamma_star
        )));
    }
    let decisions = levels
        .iter()
        .map(|&level| {
            let cv = null.critical_value(level);
            LevelDecision {
                level,
                critical_value: cv,
                reject: stat > cv,
            }
        })
        .collect();
    Ok(TestReport {
        schema_version: REPORT_SCHEMA_VERSION,
        functional,
        gamma_star,
        statistic: stat,
        v_hat: f64::NAN,
        decisions,
        p_value: Some(null.p_value(stat)),
        gamma_hat: None,
        critical_value_source: null.origin.clone(),
        warnings: Vec::new(),
    })
}

/// Asymptotic critical values for the sup and average tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalValueRow {
    pub gamma_star: f64,
    pub level: f64,
    pub sup_cv: f64,
    pub avg_cv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalValueTable {
    pub rows: Vec<CriticalValueRow>,
}

const BUNDLED_TABLE: &str = include_str!("../data/critical_values.csv");
const TABLE_HEADER: &str = "gamma_star,level,sup_cv,avg_cv";

impl CriticalValueTable {
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_TABLE).expect("bundled table is well formed")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next() {
            Some(h) if h.trim() == TABLE_HEADER => {}
            other => {
                return Err(BreakError::InvalidConfig(format!(
                    "critical value table header must be {TABLE_HEADER:?}, got {other:?}"
                )))
            }
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let vals: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| BreakError::InvalidConfig(format!("table row {}: {line:?}", i + 2)))?;
            if vals.len() != 4 {
                return Err(BreakError::InvalidConfig(format!(
                    "table row {} has {} fields",
                    i + 2,
                    vals.len()
                )));
            }
            rows.push(CriticalValueRow {
                gamma_star: vals[0],
                level: vals[1],
                sup_cv: vals[2],
                avg_cv: vals[3],
            });
        }
        Ok(Self { rows })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(TABLE_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{:.2},{:.2},{:.4},{:.4}\n",
                r.gamma_star, r.level, r.sup_cv, r.avg_cv
            ));
        }
        out
    }

    pub fn lookup(&self, functional: Functional, gamma_star: f64, level: f64) -> Result<f64> {
        let row = self
            .rows
            .iter()
            .find(|r| (r.gamma_star - gamma_star).abs() < 1e-9 && (r.level - level).abs() < 1e-9)
            .ok_or_else(|| {
                BreakError::InvalidConfig(format!(
                    "no tabulated critical value for trimming {gamma_star} at level {level}"
                ))
            })?;
        match functional {
            Functional::Sup => Ok(row.sup_cv),
            Functional::Avg => Ok(row.avg_cv),
            other => Err(BreakError::FunctionalMismatch(format!(
                "tabulated values cover sup and avg only, not {other}"
            ))),
        }
    }

    pub fn decide(
        &self,
        stat: f64,
        functional: Functional,
        gamma_star: f64,
        levels: &[f64],
    ) -> Result<TestReport> {
        check_levels(levels)?;
        let decisions = levels
            .iter()
            .map(|&level| {
                let cv = self.lookup(functional, gamma_star, level)?;
                Ok(LevelDecision {
                    level,
                    critical_value: cv,
                    reject: stat > cv,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TestReport {
            schema_version: REPORT_SCHEMA_VERSION,
            functional,
            gamma_star,
            statistic: stat,
            v_hat: f64::NAN,
            decisions,
            p_value: None,
            gamma_hat: None,
            critical_value_source: "table".into(),
            warnings: Vec::new(),
        })
    }
}
