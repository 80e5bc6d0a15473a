// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::{Path, PathBuf};
use std::process::Command;

use strucbreak::montecarlo::{gen_dgp, DgpKind, DgpSpec};
use strucbreak::rng::stream;
use strucbreak_cli::config::RunConfig;
use strucbreak_cli::ingest::{ingest_csv, write_csv};
use strucbreak_cli::pipeline::{run_on_sample, UNCORRECTED_WARNING};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_strucbreak"))
}

fn names() -> Vec<String> {
    vec!["z1".into(), "z2".into()]
}

fn dgp_csv(dir: &Path, id: u8, n: usize, seed: u64) -> PathBuf {
    let sim = gen_dgp(&DgpSpec::new(DgpKind::Regression { id }, n), &mut stream(seed, 0)).unwrap();
    let path = dir.join(format!("dgp{id}_{seed}.csv"));
    write_csv(std::fs::File::create(&path).unwrap(), &sim.sample, "y", &names()).unwrap();
    path
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = bin().args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

#[test]
fn csv_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let sim = gen_dgp(&DgpSpec::new(DgpKind::Regression { id: 4 }, 257), &mut stream(3, 9)).unwrap();
    let mut sample = sim.sample;
    // awkward magnitudes survive too
    sample.y[0] = 1.0e-300 / 3.0;
    sample.y[1] = -std::f64::consts::PI * 1e250;
    sample.y[2] = 0.1 + 0.2;
    let path = dir.path().join("s.csv");
    write_csv(std::fs::File::create(&path).unwrap(), &sample, "y", &names()).unwrap();
    let back = ingest_csv(&path, "y", &names()).unwrap();
    assert_eq!(back.n(), sample.n());
    for (a, b) in sample.y.iter().zip(&back.y) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
    for (a, b) in sample.z.iter().zip(back.z.iter()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn json_report_schema() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dgp_csv(dir.path(), 2, 300, 1);
    let (code, out, err) = run(&[
        "test", "--input", csv.to_str().unwrap(), "--covariates", "z1,z2", "--format", "json",
    ]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["test"]["schema_version"], 1);
    for key in [
        "config_hash", "n_obs", "n_eff", "p", "gamma_star", "grid_points", "kernel", "bandwidth",
        "v_hat", "uncorrected", "test", "warnings",
    ] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    for key in ["statistic", "decisions", "gamma_hat", "critical_value_source", "v_hat"] {
        assert!(v["test"].get(key).is_some(), "missing test.{key}");
    }
    assert_eq!(v["p"], 6);
    assert_eq!(v["bandwidth"], 42);
    assert!(v["test"]["gamma_hat"].as_f64().is_some());
    assert_eq!(v["test"]["decisions"].as_array().unwrap().len(), 3);
}

#[test]
fn uncorrected_runs_are_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dgp_csv(dir.path(), 2, 300, 2);
    let (code, out, _) = run(&[
        "test", "--input", csv.to_str().unwrap(), "--covariates", "z1,z2", "--kernel", "none",
        "--format", "json",
    ]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["uncorrected"], true);
    assert_eq!(v["v_hat"], 1.0);
    assert_eq!(v["warnings"][0], UNCORRECTED_WARNING);
    let (_, text, _) = run(&[
        "test", "--input", csv.to_str().unwrap(), "--covariates", "z1,z2", "--kernel", "none",
    ]);
    assert!(text.contains("warning: uncorrected"));
}

#[test]
fn test_reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dgp_csv(dir.path(), 1, 200, 5);
    let args = [
        "test", "--input", csv.to_str().unwrap(), "--covariates", "z1,z2", "--functional",
        "expq(15)", "--critical-values", "simulate", "--cv-reps", "300", "--cv-grid", "400",
        "--format", "json",
    ];
    let a = run(&args).1;
    let b = run(&args).1;
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn critvals_do_not_depend_on_thread_count() {
    let base = ["critvals", "--grid", "400", "--reps", "400", "--gamma-stars", "0.15,0.35"];
    let one = bin().args(["--threads", "1"]).args(base).output().unwrap();
    let three = bin().args(["--threads", "3"]).args(base).output().unwrap();
    assert!(one.status.success());
    assert_eq!(one.stdout, three.stdout);
    let text = String::from_utf8(one.stdout).unwrap();
    assert!(text.starts_with("gamma_star,level,sup_cv,avg_cv\n"));
    assert_eq!(text.lines().count(), 1 + 2 * 3);
}

#[test]
fn mc_and_envelope_are_deterministic() {
    let mc = [
        "mc", "--dgp", "DGP1", "--n", "120", "--reps", "20", "--kernels", "parzen:14,none",
        "--format", "csv",
    ];
    let a = run(&mc);
    assert_eq!(a.0, 0, "{}", a.2);
    assert_eq!(a.1, run(&mc).1);
    assert_eq!(a.1.lines().count(), 3);
    let env = [
        "envelope", "--n", "120", "--reps", "20", "--null-reps", "40", "--c-max", "3", "--c-step",
        "0.5", "--format", "csv",
    ];
    let e = run(&env);
    assert_eq!(e.0, 0, "{}", e.2);
    assert_eq!(e.1, run(&env).1);
}

#[test]
fn exit_codes_separate_error_classes() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dgp_csv(dir.path(), 1, 100, 1);
    let input = csv.to_str().unwrap();
    // configuration
    assert_eq!(run(&["test", "--input", input, "--covariates", "z1", "--kernel", "tukey"]).0, 2);
    assert_eq!(run(&["test", "--input", input, "--covariates", "z1", "--ar-order", "2"]).0, 2);
    // data
    assert_eq!(run(&["test", "--input", input, "--covariates", "nope"]).0, 3);
    assert_eq!(run(&["test", "--input", "/no/such/file.csv"]).0, 3);
    // numerical: the same column twice is rank deficient
    assert_eq!(
        run(&["test", "--input", input, "--covariates", "z1,z1", "--design", "raw"]).0,
        4
    );
    // success
    assert_eq!(run(&["test", "--input", input, "--covariates", "z1,z2"]).0, 0);
}

#[test]
fn table_from_environment_replaces_bundled() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dgp_csv(dir.path(), 1, 150, 4);
    let table = dir.path().join("t.csv");
    std::fs::write(&table, "gamma_star,level,sup_cv,avg_cv\n0.35,0.05,123.0,99.0\n").unwrap();
    let out = bin()
        .env("STRUCBREAK_CV_TABLE", &table)
        .args(["test", "--input", csv.to_str().unwrap(), "--covariates", "z1,z2", "--levels", "0.05"])
        .output()
        .unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("123.0000"), "{text}");
    assert!(text.contains("do not reject"));
}

#[test]
fn toml_config_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dgp_csv(dir.path(), 1, 150, 6);
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        format!(
            "input = {:?}\ncovariates = [\"z1\", \"z2\"]\nkernel = \"bartlett:8\"\nformat = \"json\"\n",
            csv.to_str().unwrap()
        ),
    )
    .unwrap();
    let (code, out, _) = run(&["test", "--config", cfg.to_str().unwrap(), "--gamma-star", "0.15"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["kernel"], "bartlett(a0=8)");
    assert_eq!(v["gamma_star"], 0.15);
    let (code, plot, _) = run(&[
        "test", "--config", cfg.to_str().unwrap(), "--format", "csv-plotdata",
    ]);
    assert_eq!(code, 0);
    assert!(plot.starts_with("gamma,wald,q\n"));
    assert_eq!(plot.lines().count(), 1 + 61);
}

#[test]
fn dgp2_breaks_are_detected() {
    let cfg = RunConfig {
        input: "simulated".into(),
        covariates: names(),
        levels: vec![0.05],
        ..RunConfig::default()
    };
    let resolved = cfg.resolve().unwrap();
    let runs = 100;
    let rejections = (0..runs)
        .filter(|&i| {
            let sim = gen_dgp(&DgpSpec::new(DgpKind::Regression { id: 2 }, 500), &mut stream(2024, i))
                .unwrap();
            let r = run_on_sample(&sim.sample, &resolved, "scripted").unwrap();
            r.report.test.rejects_at(0.05).unwrap()
        })
        .count();
    assert!(rejections >= 95, "{rejections} of {runs}");
}
