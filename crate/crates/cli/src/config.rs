// SPDX-License-Identifier: MIT OR Apache-2.0

//! Run configuration: a TOML file and command-line flags share one schema of
//! plain strings and numbers, resolved into typed settings in one place.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use strucbreak::design::DesignSpec;
use strucbreak::har::{KernelSpec, ZetaMode};
use strucbreak::montecarlo::{CriticalValueSource, DgpKind, DgpSpec, ExperimentConfig, InnovationSpec};
use strucbreak::null_sim::{PathConstruction, DEFAULT_N_GRID, DEFAULT_REPS};
use strucbreak::regression::VarianceMode;
use strucbreak::test_stats::{CriticalValueTable, Functional};

use crate::error::CliError;

/// Environment variable naming a critical-value table that replaces the
/// bundled one.
pub const CV_TABLE_ENV: &str = "STRUCBREAK_CV_TABLE";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum, Default)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    #[default]
    Text,
    Json,
    CsvPlotdata,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: PathBuf,
    pub response: String,
    pub covariates: Vec<String>,
    pub ar_order: Option<usize>,
    pub design: String,
    pub gamma_star: f64,
    pub grid_step: f64,
    pub variance: String,
    pub kernel: String,
    pub zeta: String,
    pub functional: String,
    pub levels: Vec<f64>,
    pub critical_values: String,
    pub cv_grid: usize,
    pub cv_reps: usize,
    pub cv_seed: u64,
    pub cv_paths: String,
    pub cv_table: Option<PathBuf>,
    pub format: OutputFormat,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: PathBuf::new(),
            response: "y".into(),
            covariates: Vec::new(),
            ar_order: None,
            design: "poly:2".into(),
            gamma_star: 0.35,
            grid_step: 1.0 / 200.0,
            variance: "eicker-white".into(),
            kernel: "parzen:14".into(),
            zeta: "ones-vector".into(),
            functional: "sup".into(),
            levels: vec![0.01, 0.05, 0.10],
            critical_values: "bundled".into(),
            cv_grid: DEFAULT_N_GRID,
            cv_reps: DEFAULT_REPS,
            cv_seed: 1,
            cv_paths: "gaussian".into(),
            cv_table: None,
            format: OutputFormat::Text,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CvChoice {
    Table(CriticalValueTable, String),
    Simulate {
        n_grid: usize,
        reps: usize,
        seed: u64,
        construction: PathConstruction,
    },
}

/// Typed, validated form of [`RunConfig`].
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedRun {
    pub input: PathBuf,
    pub response: String,
    pub covariates: Vec<String>,
    pub design: DesignSpec,
    pub gamma_star: f64,
    pub grid_step: f64,
    pub variance: VarianceMode,
    pub kernel: KernelSpec,
    pub zeta: ZetaMode,
    pub functional: Functional,
    pub levels: Vec<f64>,
    pub cv: CvChoice,
}

pub(crate) fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn parse<T>(what: &str, s: &str) -> Result<T, CliError>
where
    T: std::str::FromStr,
    T::Err: std::fmt::Display,
{
    s.parse::<T>()
        .map_err(|e| CliError::Config(format!("{what}: {e}")))
}

pub fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))
}

/// The table named by the flag, else by the environment, else the bundled one.
pub fn load_table(explicit: Option<&Path>) -> Result<(CriticalValueTable, String), CliError> {
    let path = explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(CV_TABLE_ENV).map(PathBuf::from));
    match path {
        None => Ok((CriticalValueTable::bundled(), "table: bundled".into())),
        Some(p) => {
            let text = std::fs::read_to_string(&p)
                .map_err(|e| config_err(format!("cannot read table {}: {e}", p.display())))?;
            let table = CriticalValueTable::parse(&text)
                .map_err(|e| CliError::from_break("critical values", e))?;
            Ok((table, format!("table: {}", p.display())))
        }
    }
}

impl RunConfig {
    pub fn resolve(&self) -> Result<ResolvedRun, CliError> {
        let design = match self.ar_order {
            Some(order) => {
                if !self.covariates.is_empty() {
                    return Err(config_err(
                        "an autoregression uses lags of the response; drop the covariate columns",
                    ));
                }
                DesignSpec::ar(order)
            }
            None => parse("design", &self.design)?,
        };
        if self.input.as_os_str().is_empty() {
            return Err(config_err("no input file given"));
        }
        let functional: Functional = parse("functional", &self.functional)?;
        if let Functional::ExpW { .. } = functional {
            return Err(config_err(
                "the ExpW null depends on the design; use sup, avg or expq here",
            ));
        }
        if self.levels.is_empty() || self.levels.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return Err(config_err(format!("levels must lie in (0,1): {:?}", self.levels)));
        }
        let cv = match self.critical_values.as_str() {
            "bundled" | "table" => {
                let (t, origin) = load_table(self.cv_table.as_deref())?;
                CvChoice::Table(t, origin)
            }
            "simulate" => CvChoice::Simulate {
                n_grid: self.cv_grid,
                reps: self.cv_reps,
                seed: self.cv_seed,
                construction: parse("cv-paths", &self.cv_paths)?,
            },
            other => {
                return Err(config_err(format!(
                    "critical values must be 'bundled' or 'simulate', got {other:?}"
                )))
            }
        };
        Ok(ResolvedRun {
            input: self.input.clone(),
            response: self.response.clone(),
            covariates: self.covariates.clone(),
            design,
            gamma_star: self.gamma_star,
            grid_step: self.grid_step,
            variance: parse("variance", &self.variance)?,
            kernel: parse("kernel", &self.kernel)?,
            zeta: parse("zeta", &self.zeta)?,
            functional,
            levels: self.levels.clone(),
            cv,
        })
    }
}

/// Monte Carlo experiment file: `dgp`, `n`, `reps`, `seed`, `design`,
/// grid, kernel list, tests and levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McFile {
    pub dgp: String,
    pub n: usize,
    pub innovation: String,
    pub design: String,
    pub gamma_star: f64,
    pub grid_step: f64,
    pub variance: String,
    pub zeta: String,
    pub kernels: Vec<String>,
    pub tests: Vec<String>,
    pub levels: Vec<f64>,
    pub critical_values: String,
    pub cv_grid: usize,
    pub cv_reps: usize,
    pub cv_seed: u64,
    pub reps: usize,
    pub seed: u64,
}

impl Default for McFile {
    fn default() -> Self {
        Self {
            dgp: "DGP1".into(),
            n: 300,
            innovation: "iid".into(),
            design: "poly:2".into(),
            gamma_star: 0.35,
            grid_step: 1.0 / 200.0,
            variance: "eicker-white".into(),
            zeta: "ones-vector".into(),
            kernels: vec!["parzen:14".into(), "none".into()],
            tests: vec!["sup".into()],
            levels: vec![0.05],
            critical_values: "bundled".into(),
            cv_grid: DEFAULT_N_GRID,
            cv_reps: DEFAULT_REPS,
            cv_seed: 1,
            reps: 500,
            seed: 1,
        }
    }
}

impl McFile {
    pub fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let kind: DgpKind = parse("dgp", &self.dgp)?;
        let innovation: InnovationSpec = parse("innovation", &self.innovation)?;
        let mut cfg = ExperimentConfig::new(
            DgpSpec::new(kind, self.n).with_innovation(innovation),
            parse("design", &self.design)?,
            self.gamma_star,
        );
        cfg.grid_step = self.grid_step;
        cfg.variance_mode = parse("variance", &self.variance)?;
        cfg.zeta_mode = parse("zeta", &self.zeta)?;
        cfg.kernels = self
            .kernels
            .iter()
            .map(|k| parse("kernel", k))
            .collect::<Result<_, _>>()?;
        cfg.functionals = self
            .tests
            .iter()
            .map(|t| parse("test", t))
            .collect::<Result<_, _>>()?;
        cfg.levels = self.levels.clone();
        cfg.critical_values = match self.critical_values.as_str() {
            "bundled" | "table" => CriticalValueSource::Bundled,
            "simulate" => CriticalValueSource::Simulate {
                n_grid: self.cv_grid,
                reps: self.cv_reps,
                seed: self.cv_seed,
            },
            "bessel" => CriticalValueSource::Bessel {
                n_grid: self.cv_grid,
                reps: self.cv_reps,
                seed: self.cv_seed,
            },
            other => {
                return Err(config_err(format!(
                    "critical values must be bundled, simulate or bessel, got {other:?}"
                )))
            }
        };
        cfg.reps = self.reps;
        cfg.seed = self.seed;
        cfg.validate()
            .map_err(|e| CliError::from_break("mc config", e))?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve_once_input_is_set() {
        let cfg = RunConfig {
            input: "data.csv".into(),
            covariates: vec!["z".into()],
            ..RunConfig::default()
        };
        let r = cfg.resolve().unwrap();
        assert_eq!(r.kernel, KernelSpec::parzen(14.0));
        assert_eq!(r.zeta, ZetaMode::OnesVector);
        assert!(matches!(r.cv, CvChoice::Table(..)));
    }

    #[test]
    fn ar_mode_excludes_covariates() {
        let cfg = RunConfig {
            input: "data.csv".into(),
            covariates: vec!["z".into()],
            ar_order: Some(4),
            ..RunConfig::default()
        };
        assert!(matches!(cfg.resolve(), Err(CliError::Config(_))));
    }

    #[test]
    fn toml_round_trip() {
        let text = r#"
            input = "x.csv"
            covariates = ["a", "b"]
            kernel = "bartlett:8"
            levels = [0.05]
            format = "csv-plotdata"
        "#;
        let cfg: RunConfig = toml::from_str(text).unwrap();
        assert_eq!(cfg.format, OutputFormat::CsvPlotdata);
        assert_eq!(cfg.resolve().unwrap().kernel, KernelSpec::bartlett(8.0));
        assert!(toml::from_str::<RunConfig>("colour = 1").is_err());
    }

    #[test]
    fn mc_file_resolves() {
        let m: McFile = toml::from_str(
            r#"
            dgp = "ARDGP1"
            design = "ar:8"
            gamma_star = 0.15
            kernels = ["parzen:36", "none"]
            tests = ["sup", "avg"]
        "#,
        )
        .unwrap();
        let cfg = m.resolve().unwrap();
        assert_eq!(cfg.kernels.len(), 2);
        assert_eq!(cfg.functionals, vec![Functional::Sup, Functional::Avg]);
        assert!(McFile {
            dgp: "DGP9".into(),
            ..McFile::default()
        }
        .resolve()
        .is_err());
    }
}
