// SPDX-License-Identifier: MIT OR Apache-2.0

//! Simulation designs: covariates, innovations and the catalog of
//! regression functions with and without breaks.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::design::RawSample;
use crate::error::{BreakError, Result};

pub const DEFAULT_BURN_IN: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InnovationKind {
    IidNormal,
    /// sigma_t^2 = omega + alpha v_{t-1}^2
    Arch1 {
        omega: f64,
        alpha: f64,
    },
    /// sigma_t^2 = omega + alpha v_{t-1}^2 + beta sigma_{t-1}^2
    Garch11 {
        omega: f64,
        alpha: f64,
        beta: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnovationSpec {
    pub kind: InnovationKind,
    pub burn_in: usize,
}

impl Default for InnovationSpec {
    fn default() -> Self {
        Self::iid()
    }
}

impl InnovationSpec {
    pub fn iid() -> Self {
        Self {
            kind: InnovationKind::IidNormal,
            burn_in: DEFAULT_BURN_IN,
        }
    }

    pub fn arch1() -> Self {
        Self {
            kind: InnovationKind::Arch1 {
                omega: 0.1,
                alpha: 0.5,
            },
            burn_in: DEFAULT_BURN_IN,
        }
    }

    pub fn garch11() -> Self {
        Self {
            kind: InnovationKind::Garch11 {
                omega: 0.1,
                alpha: 0.25,
                beta: 0.4,
            },
            burn_in: DEFAULT_BURN_IN,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.kind {
            InnovationKind::IidNormal => true,
            InnovationKind::Arch1 { omega, alpha } => omega > 0.0 && (0.0..1.0).contains(&alpha),
            InnovationKind::Garch11 { omega, alpha, beta } => {
                omega > 0.0 && alpha >= 0.0 && beta >= 0.0 && alpha + beta < 1.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(BreakError::InvalidConfig(format!(
                "innovation parameters violate stationarity: {:?}",
                self.kind
            )))
        }
    }

    pub fn unconditional_variance(&self) -> f64 {
        match self.kind {
            InnovationKind::IidNormal => 1.0,
            InnovationKind::Arch1 { omega, alpha } => omega / (1.0 - alpha),
            InnovationKind::Garch11 { omega, alpha, beta } => omega / (1.0 - alpha - beta),
        }
    }

    pub fn label(&self) -> &'static str {
        match self.kind {
            InnovationKind::IidNormal => "iid",
            InnovationKind::Arch1 { .. } => "arch",
            InnovationKind::Garch11 { .. } => "garch",
        }
    }
}

impl FromStr for InnovationSpec {
    type Err = BreakError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "iid" | "normal" => Ok(Self::iid()),
            "arch" | "arch1" => Ok(Self::arch1()),
            "garch" | "garch11" => Ok(Self::garch11()),
            other => Err(BreakError::InvalidConfig(format!(
                "unknown innovation {other:?}"
            ))),
        }
    }
}

/// n draws of the innovation process. Recursions start at the
/// unconditional variance and discard `burn_in` values.
pub fn gen_innovations<R: Rng + ?Sized>(spec: &InnovationSpec, n: usize, rng: &mut R) -> Vec<f64> {
    let mut eta = || rng.sample::<f64, _>(StandardNormal);
    match spec.kind {
        InnovationKind::IidNormal => (0..n).map(|_| eta()).collect(),
        InnovationKind::Arch1 { .. } | InnovationKind::Garch11 { .. } => {
            let (omega, alpha, beta) = match spec.kind {
                InnovationKind::Arch1 { omega, alpha } => (omega, alpha, 0.0),
                InnovationKind::Garch11 { omega, alpha, beta } => (omega, alpha, beta),
                InnovationKind::IidNormal => unreachable!(),
            };
            let mut s2 = spec.unconditional_variance();
            let mut v_prev2 = s2;
            let mut out = Vec::with_capacity(n);
            for t in 0..(spec.burn_in + n) {
                s2 = omega + alpha * v_prev2 + beta * s2;
                let v = s2.sqrt() * eta();
                v_prev2 = v * v;
                if t >= spec.burn_in {
                    out.push(v);
                }
            }
            out
        }
    }
}

/// Columns z2 = (w1 + w2)/2 and z3 = (w1 + w3)/2 with w iid U(0,5).
pub fn gen_covariates<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let u = Uniform::new(0.0, 5.0).expect("valid bounds");
    let mut z = DMatrix::zeros(n, 2);
    for t in 0..n {
        let w1: f64 = rng.sample(u);
        let w2: f64 = rng.sample(u);
        let w3: f64 = rng.sample(u);
        z[(t, 0)] = 0.5 * (w1 + w2);
        z[(t, 1)] = 0.5 * (w1 + w3);
    }
    z
}

/// Catalog entry of a simulation design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DgpKind {
    /// Nonparametric regression designs 1 to 7.
    Regression { id: u8 },
    /// Time series designs 1 to 3.
    Autoregressive { id: u8 },
    /// Intercept shift family; `ell = 0` is the no-break member.
    InterceptShift { ell: u8 },
    /// Proportional shift of all p coefficients by `rho` at mid sample.
    ProportionalShift { rho: f64, p: usize },
}

impl DgpKind {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            DgpKind::Regression { id } => (1..=7).contains(&id),
            DgpKind::Autoregressive { id } => (1..=3).contains(&id),
            DgpKind::InterceptShift { ell } => ell <= 6,
            DgpKind::ProportionalShift { rho, p } => rho.is_finite() && p >= 2,
        };
        if ok {
            Ok(())
        } else {
            Err(BreakError::CatalogUnknown(self.to_string()))
        }
    }
}

impl fmt::Display for DgpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DgpKind::Regression { id } => write!(f, "DGP{id}"),
            DgpKind::Autoregressive { id } => write!(f, "ARDGP{id}"),
            DgpKind::InterceptShift { ell } => write!(f, "H{ell}"),
            DgpKind::ProportionalShift { rho, p } => write!(f, "RHO({rho},{p})"),
        }
    }
}

impl FromStr for DgpKind {
    type Err = BreakError;

    /// Accepts `DGP1`..`DGP7`, `ARDGP1`..`ARDGP3`, `H0`..`H6` and
    /// `RHO(rho,p)`, case-insensitive.
    fn from_str(s: &str) -> Result<Self> {
        let up = s.trim().to_ascii_uppercase();
        let unknown = || BreakError::CatalogUnknown(s.to_string());
        let kind = if let Some(rest) = up.strip_prefix("ARDGP") {
            DgpKind::Autoregressive {
                id: rest.parse().map_err(|_| unknown())?,
            }
        } else if let Some(rest) = up.strip_prefix("DGP") {
            DgpKind::Regression {
                id: rest.parse().map_err(|_| unknown())?,
            }
        } else if let Some(rest) = up.strip_prefix("RHO(") {
            let inner = rest.strip_suffix(')').ok_or_else(unknown)?;
            let (a, b) = inner.split_once(',').ok_or_else(unknown)?;
            DgpKind::ProportionalShift {
                rho: a.trim().parse().map_err(|_| unknown())?,
                p: b.trim().parse().map_err(|_| unknown())?,
            }
        } else if let Some(rest) = up.strip_prefix('H') {
            DgpKind::InterceptShift {
                ell: rest.parse().map_err(|_| unknown())?,
            }
        } else {
            return Err(unknown());
        };
        kind.validate()?;
        Ok(kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub kind: DgpKind,
    pub n: usize,
    pub innovation: InnovationSpec,
}

impl DgpSpec {
    pub fn new(kind: DgpKind, n: usize) -> Self {
        Self {
            kind,
            n,
            innovation: InnovationSpec::iid(),
        }
    }

    pub fn with_innovation(mut self, innovation: InnovationSpec) -> Self {
        self.innovation = innovation;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedSample {
    pub sample: RawSample,
    /// True break fractions, empty under the null.
    pub breaks: Vec<f64>,
}

fn loglog(v: f64) -> f64 {
    v.ln().ln()
}

/// Regime index of observation t (0-based) given 1-based regime ends.
fn regime(t: usize, ends: &[usize]) -> usize {
    ends.iter().take_while(|&&e| t + 1 > e).count()
}

fn fractions(n: usize, ends: &[usize]) -> Vec<f64> {
    ends.iter().map(|e| *e as f64 / n as f64).collect()
}

/// MA(24) mean path of the time-series designs at time index `t` of `v`.
fn ma24(v: &[f64], t: usize) -> f64 {
    let mut s = 0.5;
    for j in 1..=24 {
        let c = if j <= 6 { 0.9 - j as f64 / 10.0 } else { 0.2 };
        s += c * v[t - j];
    }
    s
}

/// Simulate one sample of a catalog design.
pub fn gen_dgp<R: Rng + ?Sized>(spec: &DgpSpec, rng: &mut R) -> Result<SimulatedSample> {
    spec.kind.validate()?;
    spec.innovation.validate()?;
    let n = spec.n;
    if n < 8 {
        return Err(BreakError::SampleTooShort {
            required: 8,
            actual: n,
        });
    }
    let half = [n / 2];
    let thirds = [n / 3, 2 * n / 3];
    match spec.kind {
        DgpKind::Regression { id } => {
            let z = gen_covariates(n, rng);
            let v = gen_innovations(&spec.innovation, n, rng);
            let (y, ends) = {
                let idx = |t: usize| 2.0 + 2.0 * z[(t, 0)] + 2.0 * z[(t, 1)];
                let expo = |t: usize| (0.15 * idx(t)).exp();
                let ll = |t: usize, a: f64| a * loglog(idx(t));
                let recip = |t: usize| 1.0 + 0.3 * (z[(t, 0)].powi(-2) + z[(t, 1)].powf(-0.5));
                let trig = |t: usize| 1.0 + 0.5 * (z[(t, 0)].sin() + z[(t, 1)].cos());
                let (ends, mean): (&[usize], Box<dyn Fn(usize, usize) -> f64>) = match id {
                    1 => (&[], Box::new(|t, _| expo(t))),
                    2 => (&half, Box::new(|t, r| ll(t, [1.8, 0.2][r]))),
                    3 => (&thirds, Box::new(|t, r| ll(t, [1.8, 0.2, 5.2][r]))),
                    4 => (
                        &half,
                        Box::new(|t, r| if r == 0 { recip(t) } else { ll(t, 1.8) }),
                    ),
                    5 => (
                        &half,
                        Box::new(|t, r| if r == 0 { trig(t) } else { expo(t) }),
                    ),
                    6 => (
                        &thirds,
                        Box::new(|t, r| match r {
                            0 => recip(t),
                            1 => ll(t, 1.8),
                            _ => expo(t),
                        }),
                    ),
                    7 => (
                        &thirds,
                        Box::new(|t, r| match r {
                            0 => trig(t),
                            1 => expo(t),
                            _ => ll(t, 1.8),
                        }),
                    ),
                    _ => unreachable!("validated"),
                };
                let y: Vec<f64> = (0..n).map(|t| mean(t, regime(t, ends)) + v[t]).collect();
                (y, ends)
            };
            Ok(SimulatedSample {
                sample: RawSample::new(y, z)?,
                breaks: fractions(n, ends),
            })
        }
        DgpKind::InterceptShift { ell } => {
            let z = gen_covariates(n, rng);
            let v = gen_innovations(&spec.innovation, n, rng);
            let late = 1.0 + 0.2 * ell as f64;
            let y = (0..n)
                .map(|t| {
                    let a = if t < n / 2 { 1.0 } else { late };
                    1.8 * loglog(a + z[(t, 0)] + z[(t, 1)]) + v[t]
                })
                .collect();
            let breaks = if ell == 0 {
                vec![]
            } else {
                fractions(n, &half)
            };
            Ok(SimulatedSample {
                sample: RawSample::new(y, z)?,
                breaks,
            })
        }
        DgpKind::ProportionalShift { rho, p } => {
            let u = Uniform::new(0.0, 5.0).expect("valid bounds");
            let z = DMatrix::from_fn(n, p - 1, |_, _| rng.sample::<f64, _>(u));
            let v = gen_innovations(&spec.innovation, n, rng);
            let y = (0..n)
                .map(|t| {
                    let level = 1.0 + z.row(t).sum();
                    let scale = if t < n / 2 { 1.0 } else { 1.0 + rho };
                    level * scale + v[t]
                })
                .collect();
            let breaks = if rho == 0.0 {
                vec![]
            } else {
                fractions(n, &half)
            };
            Ok(SimulatedSample {
                sample: RawSample::new(y, z)?,
                breaks,
            })
        }
        DgpKind::Autoregressive { id } => {
            let lead = 24;
            let v = gen_innovations(&spec.innovation, n + lead, rng);
            let mut y = Vec::with_capacity(n);
            let ends: &[usize] = match id {
                1 => &[],
                2 => &half,
                _ => &thirds,
            };
            for t in 0..n {
                let s = t + lead;
                let val = match regime(t, ends) {
                    0 => ma24(&v, s),
                    1 => v[s],
                    _ => 1.0 + 0.4 * y[t - 1] + v[s],
                };
                y.push(val);
            }
            Ok(SimulatedSample {
                sample: RawSample::univariate(y)?,
                breaks: fractions(n, ends),
            })
        }
    }
}

/// Break vector 2^{1/4} tau p^{1/4} / sqrt(n) for a unit direction tau.
pub fn local_power_break(tau: &[f64], n: usize) -> Result<Vec<f64>> {
    let p = tau.len();
    let norm = tau.iter().map(|v| v * v).sum::<f64>().sqrt();
    if p == 0 || n == 0 || (norm - 1.0).abs() > 1e-9 {
        return Err(BreakError::InvalidConfig(
            "local break direction must be a unit vector".into(),
        ));
    }
    let scale = 2f64.powf(0.25) * (p as f64).powf(0.25) / (n as f64).sqrt();
    Ok(tau.iter().map(|v| v * scale).collect())
}
