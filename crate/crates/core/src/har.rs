// SPDX-License-Identifier: MIT OR Apache-2.0

//! Kernel long-run variance of the scalar series zeta_t, which estimates
//! the scale factor of the limit process under nonlinear serial dependence.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::design::DesignMatrix;
use crate::error::{BreakError, Result};
use crate::regression::{moment_matrices, ols, VarianceMode};

/// Lower bound applied to the estimate before it is used as a divisor.
pub const V_HAT_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Parzen,
    Bartlett,
    /// No correction, the factor is fixed at one.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub a0: f64,
}

impl KernelSpec {
    pub fn parzen(a0: f64) -> Self {
        Self {
            kind: KernelKind::Parzen,
            a0,
        }
    }

    pub fn bartlett(a0: f64) -> Self {
        Self {
            kind: KernelKind::Bartlett,
            a0,
        }
    }

    pub fn uncorrected() -> Self {
        Self {
            kind: KernelKind::None,
            a0: 1.0,
        }
    }

    pub fn label(&self) -> String {
        match self.kind {
            KernelKind::Parzen => format!("parzen(a0={})", self.a0),
            KernelKind::Bartlett => format!("bartlett(a0={})", self.a0),
            KernelKind::None => "none".to_string(),
        }
    }
}

/// Accepts `parzen`, `parzen:14`, `bartlett(8)` and `none`. A bare kernel
/// name takes a0 = 14 (Parzen) or 8 (Bartlett).
impl std::str::FromStr for KernelSpec {
    type Err = BreakError;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let (name, arg) = match lower.find([':', '(']) {
            Some(i) => (&lower[..i], lower[i + 1..].trim_end_matches(')')),
            None => (lower.as_str(), ""),
        };
        let a0 = |default: f64| -> Result<f64> {
            if arg.is_empty() {
                return Ok(default);
            }
            match arg.trim().parse::<f64>() {
                Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
                _ => Err(BreakError::InvalidConfig(format!("bad bandwidth factor in {s:?}"))),
            }
        };
        match name.trim() {
            "parzen" => Ok(KernelSpec::parzen(a0(14.0)?)),
            "bartlett" => Ok(KernelSpec::bartlett(a0(8.0)?)),
            "none" | "uncorrected" => Ok(KernelSpec::uncorrected()),
            _ => Err(BreakError::InvalidConfig(format!("unknown kernel {s:?}"))),
        }
    }
}

pub fn kernel_value(kind: KernelKind, x: f64) -> f64 {
    let a = x.abs();
    match kind {
        KernelKind::Bartlett => (1.0 - a).max(0.0),
        KernelKind::Parzen => {
            if a <= 0.5 {
                1.0 - 6.0 * a * a + 6.0 * a * a * a
            } else if a <= 1.0 {
                2.0 * (1.0 - a).powi(3)
            } else {
                0.0
            }
        }
        KernelKind::None => {
            if a == 0.0 {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// Largest integer r with r^root <= n.
fn integer_root(n: usize, root: u32) -> usize {
    let mut r = (n as f64).powf(1.0 / root as f64).floor() as usize;
    while r > 0 && r.pow(root) > n {
        r -= 1;
    }
    while (r + 1).pow(root) <= n {
        r += 1;
    }
    r
}

/// a0 * [n^(1/5)] for Parzen and a0 * [n^(1/3)] for Bartlett.
pub fn bandwidth(spec: &KernelSpec, n_eff: usize) -> usize {
    let base = match spec.kind {
        KernelKind::Parzen => integer_root(n_eff, 5),
        KernelKind::Bartlett => integer_root(n_eff, 3),
        KernelKind::None => 1,
    };
    ((spec.a0 * base as f64).floor() as usize).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ZetaMode {
    /// zeta_t = p^{-1/2} xi_n' xi_t
    LastObs,
    /// zeta_t = p^{-1/2} sum_i xi_{ti}
    #[default]
    OnesVector,
}

impl std::str::FromStr for ZetaMode {
    type Err = BreakError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "last_obs" | "last" => Ok(ZetaMode::LastObs),
            "ones_vector" | "ones" => Ok(ZetaMode::OnesVector),
            _ => Err(BreakError::InvalidConfig(format!("unknown zeta mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarEstimate {
    pub v_hat: f64,
    pub bandwidth: usize,
    pub kernel: KernelSpec,
    pub zeta_mode: ZetaMode,
    /// Set when the raw estimate fell below the floor.
    pub floored: bool,
    pub raw_v_hat: f64,
    #[serde(skip)]
    pub zeta: Vec<f64>,
}

impl HarEstimate {
    /// The uncorrected factor, exactly one.
    pub fn unit() -> Self {
        Self {
            v_hat: 1.0,
            bandwidth: 1,
            kernel: KernelSpec::uncorrected(),
            zeta_mode: ZetaMode::default(),
            floored: false,
            raw_v_hat: 1.0,
            zeta: Vec::new(),
        }
    }
}

/// Symmetric inverse square root with eigenvalues floored at
/// 1e-12 times the largest.
pub fn inverse_sqrt_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = m.clone().symmetric_eigen();
    let top = eig.eigenvalues.max();
    if !(top > 0.0) || !top.is_finite() {
        return Err(BreakError::SingularOmega);
    }
    let floor = 1e-12 * top;
    let d = eig.eigenvalues.map(|l| 1.0 / l.max(floor).sqrt());
    let u = &eig.eigenvectors;
    Ok(u * DMatrix::from_diagonal(&d) * u.transpose())
}

/// The scalar series zeta-hat built from xi_t = Omega^{-1/2} x_t e_t.
pub fn zeta_series(
    x: &DMatrix<f64>,
    eps_hat: &DVector<f64>,
    omega_hat: &DMatrix<f64>,
    mode: ZetaMode,
) -> Result<Vec<f64>> {
    let (n, p) = x.shape();
    assert_eq!(eps_hat.len(), n);
    let root = inverse_sqrt_psd(omega_hat)?;
    let mut xi = x * &root;
    for (mut row, e) in xi.row_iter_mut().zip(eps_hat.iter()) {
        row *= *e;
    }
    let scale = 1.0 / (p as f64).sqrt();
    let zeta = match mode {
        ZetaMode::LastObs => {
            let last = xi.row(n - 1).transpose();
            (&xi * last).iter().map(|v| v * scale).collect()
        }
        ZetaMode::OnesVector => xi.row_iter().map(|r| r.sum() * scale).collect(),
    };
    Ok(zeta)
}

/// Sample autocovariance with divisor n for every lag.
pub fn autocovariance(zeta: &[f64], lag: usize) -> f64 {
    let n = zeta.len();
    if lag >= n {
        return 0.0;
    }
    let s: f64 = zeta[..n - lag]
        .iter()
        .zip(&zeta[lag..])
        .map(|(a, b)| a * b)
        .sum();
    s / n as f64
}

/// Kernel-weighted sum of autocovariances, floored at [`V_HAT_FLOOR`].
pub fn v_hat(zeta: &[f64], spec: &KernelSpec, n_eff: usize) -> HarEstimate {
    if spec.kind == KernelKind::None {
        return HarEstimate {
            zeta: zeta.to_vec(),
            ..HarEstimate::unit()
        };
    }
    let bw = bandwidth(spec, n_eff);
    let mut raw = autocovariance(zeta, 0);
    for j in 1..zeta.len() {
        let w = kernel_value(spec.kind, j as f64 / bw as f64);
        if w == 0.0 {
            // both kernels vanish beyond the bandwidth
            break;
        }
        raw += 2.0 * w * autocovariance(zeta, j);
    }
    let floored = !(raw >= V_HAT_FLOOR);
    HarEstimate {
        v_hat: if floored { V_HAT_FLOOR } else { raw },
        bandwidth: bw,
        kernel: *spec,
        zeta_mode: ZetaMode::default(),
        floored,
        raw_v_hat: raw,
        zeta: zeta.to_vec(),
    }
}

/// Full-sample no-break regression, Omega-hat in the given variance mode,
/// then zeta-hat and its kernel long-run variance.
pub fn estimate(
    design: &DesignMatrix,
    y: &[f64],
    spec: &KernelSpec,
    variance: VarianceMode,
    zeta_mode: ZetaMode,
) -> Result<HarEstimate> {
    if spec.kind == KernelKind::None {
        return Ok(HarEstimate {
            zeta_mode,
            ..HarEstimate::unit()
        });
    }
    let yv = DVector::from_column_slice(y);
    let fit = ols(design.matrix(), &yv)?;
    let mm = moment_matrices(design.matrix(), &fit.residuals, variance);
    let zeta = zeta_series(design.matrix(), &fit.residuals, &mm.omega_hat, zeta_mode)?;
    let mut est = v_hat(&zeta, spec, design.n_eff());
    est.zeta_mode = zeta_mode;
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn parses_kernel_specs() {
        assert_eq!("parzen:36".parse::<KernelSpec>().unwrap(), KernelSpec::parzen(36.0));
        assert_eq!("Bartlett(6)".parse::<KernelSpec>().unwrap(), KernelSpec::bartlett(6.0));
        assert_eq!("bartlett".parse::<KernelSpec>().unwrap(), KernelSpec::bartlett(8.0));
        assert_eq!("none".parse::<KernelSpec>().unwrap().kind, KernelKind::None);
        assert!("parzen:-1".parse::<KernelSpec>().is_err());
        assert!("tukey".parse::<KernelSpec>().is_err());
        assert_eq!("last-obs".parse::<ZetaMode>().unwrap(), ZetaMode::LastObs);
        assert_eq!("ones".parse::<ZetaMode>().unwrap(), ZetaMode::OnesVector);
    }


    #[test]
    fn kernel_values() {
        for k in [KernelKind::Parzen, KernelKind::Bartlett] {
            assert_eq!(kernel_value(k, 0.0), 1.0);
        }
        assert_eq!(kernel_value(KernelKind::Bartlett, 0.5), 0.5);
        assert_eq!(kernel_value(KernelKind::Parzen, 1.2), 0.0);
        assert!((kernel_value(KernelKind::Parzen, 0.25) - 0.71875).abs() < 1e-15);
    }

    #[test]
    fn kernel_properties_on_dense_grid() {
        for k in [KernelKind::Parzen, KernelKind::Bartlett] {
            for i in -3000..=3000 {
                let x = i as f64 / 1000.0;
                let v = kernel_value(k, x);
                assert!(v.abs() <= 1.0);
                assert_eq!(v, kernel_value(k, -x));
            }
            // continuity at the Parzen knot
            let l = kernel_value(k, 0.5 - 1e-12);
            let r = kernel_value(k, 0.5 + 1e-12);
            assert!((l - r).abs() < 1e-9);
        }
    }

    #[test]
    fn bandwidths() {
        assert_eq!(bandwidth(&KernelSpec::parzen(14.0), 300), 42);
        assert_eq!(bandwidth(&KernelSpec::bartlett(8.0), 300), 48);
        assert_eq!(bandwidth(&KernelSpec::parzen(1.0), 1), 1);
        // exact powers must not lose a unit to rounding
        assert_eq!(bandwidth(&KernelSpec::parzen(1.0), 32), 2);
        assert_eq!(bandwidth(&KernelSpec::bartlett(1.0), 1000), 10);
        assert_eq!(bandwidth(&KernelSpec::bartlett(1.0), 999), 9);
    }

    #[test]
    fn scalar_reduction() {
        let x = DMatrix::from_element(6, 1, 1.0);
        let e = DVector::from_vec(vec![0.5, -1.0, 2.0, 0.3, -0.2, 1.5]);
        let omega = DMatrix::from_element(1, 1, 1.0);
        let last = zeta_series(&x, &e, &omega, ZetaMode::LastObs).unwrap();
        let ones = zeta_series(&x, &e, &omega, ZetaMode::OnesVector).unwrap();
        for t in 0..6 {
            assert!((last[t] - 1.5 * e[t]).abs() < 1e-15);
            assert!((ones[t] - e[t]).abs() < 1e-15);
        }
    }

    #[test]
    fn last_obs_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (n, p) = (40, 3);
        let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let e = DVector::from_element(n, 1.0);
        let omega = x.transpose() * &x / n as f64;
        let z = zeta_series(&x, &e, &omega, ZetaMode::LastObs).unwrap();
        // x_n' Omega^-1 x_t / sqrt(p) with an explicit inverse
        let inv = omega.clone().try_inverse().unwrap();
        let xn = x.row(n - 1).transpose();
        for t in 0..n {
            let oracle = (xn.transpose() * &inv * x.row(t).transpose())[0] / (p as f64).sqrt();
            assert!((z[t] - oracle).abs() < 1e-10);
        }
        assert!(matches!(
            zeta_series(&x, &e, &DMatrix::zeros(p, p), ZetaMode::LastObs),
            Err(BreakError::SingularOmega)
        ));
    }

    #[test]
    fn none_kernel_is_exactly_one() {
        let est = v_hat(&[3.0, -2.0, 5.0], &KernelSpec::uncorrected(), 3);
        assert_eq!(est.v_hat, 1.0);
    }

    #[test]
    fn ones_series_matches_double_loop() {
        let n = 200;
        let zeta = vec![1.0; n];
        let spec = KernelSpec::bartlett(3.0);
        let bw = bandwidth(&spec, n);
        let est = v_hat(&zeta, &spec, n);
        // closed form sum_j k(j/bw)(n-|j|)/n
        let closed: f64 = (-(n as i64)..=(n as i64))
            .map(|j| {
                kernel_value(spec.kind, j as f64 / bw as f64) * (n as f64 - j.abs() as f64)
                    / n as f64
            })
            .sum();
        assert!((est.v_hat - closed).abs() < 1e-12);
    }

    #[test]
    fn autocovariances_are_symmetric_by_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let z: Vec<f64> = (0..50).map(|_| rng.sample(StandardNormal)).collect();
        let rev: Vec<f64> = z.iter().rev().cloned().collect();
        for j in 0..10 {
            // Gamma(-j) computed as sum z_{t} z_{t-j} equals Gamma(j)
            let backward: f64 = (j..50).map(|t| z[t] * z[t - j]).sum::<f64>() / 50.0;
            assert!((autocovariance(&z, j) - backward).abs() < 1e-14);
            assert!((autocovariance(&rev, j) - autocovariance(&z, j)).abs() < 1e-12);
        }
    }

    proptest::proptest! {
        #[test]
        fn kernel_estimates_nonnegative_before_floor(seed in 0u64..1000, n in 5usize..120, a0 in 1.0f64..20.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let z: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal) + 0.3).collect();
            for k in [KernelSpec::parzen(a0), KernelSpec::bartlett(a0)] {
                let est = v_hat(&z, &k, n);
                proptest::prop_assert!(est.raw_v_hat >= -1e-12);
            }
        }

        #[test]
        fn residual_scaling(seed in 0u64..200, c in 0.2f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (n, p) = (60, 3);
            let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
            let e = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let omega = x.transpose() * &x / n as f64;
            let spec = KernelSpec::parzen(4.0);
            for (mode, power) in [(ZetaMode::LastObs, 4), (ZetaMode::OnesVector, 2)] {
                let v1 = v_hat(&zeta_series(&x, &e, &omega, mode).unwrap(), &spec, n).raw_v_hat;
                let v2 = v_hat(&zeta_series(&x, &(&e * c), &omega, mode).unwrap(), &spec, n).raw_v_hat;
                let expect = v1 * c.powi(power);
                proptest::prop_assert!((v2 - expect).abs() <= 1e-10 * expect.abs().max(1e-300));
            }
        }
    }
}
