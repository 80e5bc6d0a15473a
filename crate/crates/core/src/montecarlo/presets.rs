// SPDX-License-Identifier: MIT OR Apache-2.0

//! Named large-sample configurations with published reference rates.
//! These are too slow for routine test runs and are executed on request.

use serde::{Deserialize, Serialize};

use super::dgp::{DgpKind, DgpSpec, InnovationSpec};
use super::experiment::{CriticalValueSource, ExperimentConfig};
use crate::design::DesignSpec;
use crate::har::KernelSpec;
use crate::test_stats::Functional;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedRate {
    pub kernel: String,
    pub functional: Functional,
    pub level: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub name: String,
    pub config: ExperimentConfig,
    pub expected: Vec<ExpectedRate>,
}

// rows: innovation, p; columns: n in {1000, 2000, 2500} x {none, 6, 8, 10}
const ANDREWS_LARGE_N: [(&str, usize, [f64; 12]); 6] = [
    (
        "arch",
        6,
        [
            0.038, 0.024, 0.020, 0.016, 0.042, 0.032, 0.030, 0.024, 0.038, 0.034, 0.032, 0.024,
        ],
    ),
    (
        "arch",
        10,
        [
            0.116, 0.058, 0.050, 0.044, 0.076, 0.046, 0.040, 0.034, 0.084, 0.048, 0.046, 0.036,
        ],
    ),
    (
        "arch",
        15,
        [
            0.190, 0.116, 0.096, 0.086, 0.150, 0.096, 0.078, 0.070, 0.132, 0.086, 0.080, 0.074,
        ],
    ),
    (
        "garch",
        6,
        [
            0.030, 0.028, 0.024, 0.022, 0.066, 0.032, 0.028, 0.026, 0.040, 0.032, 0.028, 0.026,
        ],
    ),
    (
        "garch",
        10,
        [
            0.150, 0.046, 0.042, 0.040, 0.116, 0.052, 0.046, 0.044, 0.110, 0.058, 0.052, 0.046,
        ],
    ),
    (
        "garch",
        15,
        [
            0.398, 0.142, 0.114, 0.098, 0.272, 0.096, 0.082, 0.076, 0.296, 0.120, 0.098, 0.090,
        ],
    ),
];

// rows: rho; columns: sup (n=1000 p=20,30,40; n=1500 ...), avg (same order)
const PROPORTIONAL_SHIFT_WIDE: [(f64, [f64; 12]); 4] = [
    (
        0.00,
        [
            0.092, 0.084, 0.090, 0.050, 0.042, 0.058, 0.106, 0.112, 0.150, 0.048, 0.040, 0.056,
        ],
    ),
    (
        0.01,
        [
            0.218, 0.432, 0.620, 0.298, 0.470, 0.706, 0.636, 0.916, 0.998, 0.534, 0.816, 0.964,
        ],
    ),
    (
        0.02,
        [
            0.698, 0.956, 1.000, 0.786, 0.994, 1.000, 0.998, 1.000, 1.000, 0.996, 1.000, 1.000,
        ],
    ),
    (
        0.03,
        [
            0.974, 1.000, 1.000, 1.000, 1.000, 1.000, 1.000, 1.000, 1.000, 1.000, 1.000, 1.000,
        ],
    ),
];

fn andrews_presets() -> Vec<Preset> {
    let mut out = Vec::new();
    for (innov, p, rates) in ANDREWS_LARGE_N {
        let degree = match p {
            6 => 2,
            10 => 3,
            _ => 4,
        };
        for (ni, n) in [1000usize, 2000, 2500].into_iter().enumerate() {
            let innovation: InnovationSpec = innov.parse().expect("known innovation");
            let mut cfg = ExperimentConfig::new(
                DgpSpec::new(DgpKind::Regression { id: 1 }, n).with_innovation(innovation),
                DesignSpec::polynomial(degree),
                0.35,
            );
            cfg.kernels = vec![
                KernelSpec::uncorrected(),
                KernelSpec::bartlett(6.0),
                KernelSpec::bartlett(8.0),
                KernelSpec::bartlett(10.0),
            ];
            cfg.critical_values = CriticalValueSource::Bessel {
                n_grid: 3600,
                reps: 10_000,
                seed: 1,
            };
            let expected = cfg
                .kernels
                .iter()
                .enumerate()
                .map(|(ki, k)| ExpectedRate {
                    kernel: k.label(),
                    functional: Functional::Sup,
                    level: 0.05,
                    rate: rates[ni * 4 + ki],
                })
                .collect();
            out.push(Preset {
                name: format!("andrews-large-n-{innov}-p{p}-n{n}"),
                config: cfg,
                expected,
            });
        }
    }
    out
}

fn proportional_shift_presets() -> Vec<Preset> {
    let mut out = Vec::new();
    for (rho, rates) in PROPORTIONAL_SHIFT_WIDE {
        for (ni, n) in [1000usize, 1500].into_iter().enumerate() {
            for (pi, p) in [20usize, 30, 40].into_iter().enumerate() {
                let mut cfg = ExperimentConfig::new(
                    DgpSpec::new(DgpKind::ProportionalShift { rho, p }, n),
                    DesignSpec::raw(true),
                    0.15,
                );
                cfg.kernels = vec![KernelSpec::parzen(36.0)];
                cfg.functionals = vec![Functional::Sup, Functional::Avg];
                let k = cfg.kernels[0].label();
                let expected = [Functional::Sup, Functional::Avg]
                    .into_iter()
                    .enumerate()
                    .map(|(fi, f)| ExpectedRate {
                        kernel: k.clone(),
                        functional: f,
                        level: 0.05,
                        rate: rates[fi * 6 + ni * 3 + pi],
                    })
                    .collect();
                out.push(Preset {
                    name: format!("proportional-shift-rho{rho:.2}-p{p}-n{n}"),
                    config: cfg,
                    expected,
                });
            }
        }
    }
    out
}

pub fn all_presets() -> Vec<Preset> {
    let mut v = andrews_presets();
    v.extend(proportional_shift_presets());
    v
}

pub fn find_preset(name: &str) -> Option<Preset> {
    all_presets().into_iter().find(|p| p.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid_and_unique() {
        let all = all_presets();
        assert_eq!(all.len(), 18 + 24);
        let mut names: Vec<&str> = all.iter().map(|p| p.name.as_str()).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), all.len());
        for p in &all {
            p.config.validate().unwrap();
            assert!(p.config.dgp.n >= 1000);
            assert!(p.expected.iter().all(|e| (0.0..=1.0).contains(&e.rate)));
        }
    }

    #[test]
    fn lookup_by_name() {
        let p = find_preset("andrews-large-n-garch-p15-n2000").unwrap();
        assert_eq!(p.expected[0].rate, 0.272);
        assert_eq!(p.expected[1].rate, 0.096);
        let q = find_preset("proportional-shift-rho0.01-p20-n1000").unwrap();
        assert_eq!(q.expected[1].rate, 0.636);
        assert!(find_preset("nope").is_none());
    }
}
