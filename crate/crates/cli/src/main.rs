// SPDX-License-Identifier: MIT OR Apache-2.0

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use strucbreak::montecarlo::{all_presets, EnvelopeConfig};
use strucbreak::test_stats::Functional;

use strucbreak_cli::commands::{self, CritvalsRequest, TableFormat, TABULATED_TRIMMINGS};
use strucbreak_cli::config::{read_toml, McFile, OutputFormat, RunConfig};
use strucbreak_cli::pipeline::run_test;
use strucbreak_cli::CliError;

/// Structural break tests for regressions with many coefficients.
#[derive(Parser)]
#[command(name = "strucbreak", version)]
struct Cli {
    /// Worker threads for simulations (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write the primary output here instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test a CSV data set for a break at an unknown date.
    Test(TestArgs),
    /// Simulate critical values of the limit process.
    Critvals(CritvalsArgs),
    /// Run a Monte Carlo experiment.
    Mc(McArgs),
    /// Trace the power envelope used to choose the ExpQ weight.
    Envelope(EnvelopeArgs),
}

#[derive(Args)]
struct TestArgs {
    /// TOML file with any of the options below; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    response: Option<String>,
    /// Comma-separated covariate columns.
    #[arg(long, value_delimiter = ',')]
    covariates: Option<Vec<String>>,
    /// Fit an AR(order) to the response instead of using covariates.
    #[arg(long)]
    ar_order: Option<usize>,
    /// poly:DEGREE, raw or raw-nointercept.
    #[arg(long)]
    design: Option<String>,
    #[arg(long)]
    gamma_star: Option<f64>,
    #[arg(long)]
    grid_step: Option<f64>,
    /// eicker-white or homoskedastic.
    #[arg(long)]
    variance: Option<String>,
    /// parzen:A0, bartlett:A0 or none.
    #[arg(long)]
    kernel: Option<String>,
    /// ones-vector or last-obs.
    #[arg(long)]
    zeta: Option<String>,
    /// sup, avg or expq(C).
    #[arg(long)]
    functional: Option<String>,
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<f64>>,
    /// bundled or simulate.
    #[arg(long)]
    critical_values: Option<String>,
    #[arg(long)]
    cv_grid: Option<usize>,
    #[arg(long)]
    cv_reps: Option<usize>,
    #[arg(long)]
    cv_seed: Option<u64>,
    /// gaussian or ito.
    #[arg(long)]
    cv_paths: Option<String>,
    /// Critical-value table replacing the bundled one.
    #[arg(long)]
    cv_table: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
}

#[derive(Args)]
struct CritvalsArgs {
    #[arg(long, default_value_t = 3600)]
    grid: usize,
    #[arg(long, default_value_t = 10_000)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_delimiter = ',')]
    gamma_stars: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.05,0.10")]
    levels: Vec<f64>,
    /// gaussian or ito.
    #[arg(long, default_value = "gaussian")]
    paths: String,
    /// Quantiles of a single functional, e.g. expq(15).
    #[arg(long)]
    functional: Option<String>,
    #[arg(long, value_enum, default_value = "csv")]
    format: TableFormat,
}

#[derive(Args)]
struct McArgs {
    /// Named large-sample configuration.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// List the presets and exit.
    #[arg(long)]
    list_presets: bool,
    #[arg(long)]
    config: Option<PathBuf>,
    /// DGP1..DGP7, ARDGP1..ARDGP3, H0..H6 or RHO(rho,p).
    #[arg(long)]
    dgp: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    /// iid, arch or garch.
    #[arg(long)]
    innovation: Option<String>,
    #[arg(long)]
    design: Option<String>,
    #[arg(long)]
    gamma_star: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    kernels: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    tests: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<f64>>,
    #[arg(long)]
    variance: Option<String>,
    #[arg(long)]
    zeta: Option<String>,
    /// bundled, simulate or bessel.
    #[arg(long)]
    critical_values: Option<String>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value = "text")]
    format: TableFormat,
}

#[derive(Args)]
struct EnvelopeArgs {
    #[arg(long, default_value_t = 300)]
    n: usize,
    /// Polynomial degree of the sieve in two covariates.
    #[arg(long, default_value_t = 2)]
    degree: usize,
    #[arg(long, default_value_t = 0.35)]
    gamma_star: f64,
    #[arg(long, default_value_t = 300)]
    reps: usize,
    #[arg(long, default_value_t = 1000)]
    null_reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 0.05)]
    c_min: f64,
    #[arg(long, default_value_t = 20.0)]
    c_max: f64,
    #[arg(long, default_value_t = 0.05)]
    c_step: f64,
    #[arg(long, default_value_t = 0.05)]
    level: f64,
    #[arg(long, value_enum, default_value = "text")]
    format: TableFormat,
}

macro_rules! set {
    ($dst:expr, $src:expr) => {
        if let Some(v) = $src {
            $dst = v;
        }
    };
}

fn test_config(a: TestArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &a.config {
        Some(p) => read_toml::<RunConfig>(p)?,
        None => RunConfig::default(),
    };
    set!(cfg.input, a.input);
    set!(cfg.response, a.response);
    set!(cfg.covariates, a.covariates);
    if a.ar_order.is_some() {
        cfg.ar_order = a.ar_order;
    }
    set!(cfg.design, a.design);
    set!(cfg.gamma_star, a.gamma_star);
    set!(cfg.grid_step, a.grid_step);
    set!(cfg.variance, a.variance);
    set!(cfg.kernel, a.kernel);
    set!(cfg.zeta, a.zeta);
    set!(cfg.functional, a.functional);
    set!(cfg.levels, a.levels);
    set!(cfg.critical_values, a.critical_values);
    set!(cfg.cv_grid, a.cv_grid);
    set!(cfg.cv_reps, a.cv_reps);
    set!(cfg.cv_seed, a.cv_seed);
    set!(cfg.cv_paths, a.cv_paths);
    if a.cv_table.is_some() {
        cfg.cv_table = a.cv_table;
    }
    set!(cfg.format, a.format);
    Ok(cfg)
}

fn execute(command: Command) -> Result<String, CliError> {
    match command {
        Command::Test(a) => {
            let cfg = test_config(a)?;
            let run = run_test(&cfg)?;
            Ok(match cfg.format {
                OutputFormat::Text => run.to_text(),
                OutputFormat::Json => run.to_json(),
                OutputFormat::CsvPlotdata => run.to_plot_csv(),
            })
        }
        Command::Critvals(a) => {
            let parse_err = |e: strucbreak::BreakError| CliError::from_break("critvals", e);
            let req = CritvalsRequest {
                n_grid: a.grid,
                reps: a.reps,
                seed: a.seed,
                gamma_stars: a.gamma_stars.unwrap_or_else(|| TABULATED_TRIMMINGS.to_vec()),
                levels: a.levels,
                construction: a.paths.parse().map_err(parse_err)?,
                functional: a
                    .functional
                    .map(|f| f.parse::<Functional>())
                    .transpose()
                    .map_err(parse_err)?,
            };
            commands::critvals(&req, a.format)
        }
        Command::Mc(a) => {
            if a.list_presets {
                return Ok(all_presets()
                    .iter()
                    .map(|p| format!("{}\n", p.name))
                    .collect());
            }
            if let Some(name) = &a.preset {
                let p = commands::preset(name)?;
                let mut cfg = p.config.clone();
                set!(cfg.reps, a.reps);
                set!(cfg.seed, a.seed);
                return commands::mc(&cfg, Some(&p), a.format);
            }
            let mut file = match &a.config {
                Some(p) => read_toml::<McFile>(p)?,
                None => McFile::default(),
            };
            set!(file.dgp, a.dgp);
            set!(file.n, a.n);
            set!(file.innovation, a.innovation);
            set!(file.design, a.design);
            set!(file.gamma_star, a.gamma_star);
            set!(file.kernels, a.kernels);
            set!(file.tests, a.tests);
            set!(file.levels, a.levels);
            set!(file.variance, a.variance);
            set!(file.zeta, a.zeta);
            set!(file.critical_values, a.critical_values);
            set!(file.reps, a.reps);
            set!(file.seed, a.seed);
            commands::mc(&file.resolve()?, None, a.format)
        }
        Command::Envelope(a) => {
            let mut cfg = EnvelopeConfig::new(a.n, a.degree, a.gamma_star);
            cfg.reps = a.reps;
            cfg.null_reps = a.null_reps;
            cfg.seed = a.seed;
            cfg.c_min = a.c_min;
            cfg.c_max = a.c_max;
            cfg.c_step = a.c_step;
            cfg.level = a.level;
            commands::envelope(&cfg, a.format)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let result = execute(cli.command).and_then(|text| match &cli.output {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Output(format!("{}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Output(e.to_string())),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
