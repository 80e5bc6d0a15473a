// SPDX-License-Identifier: MIT OR Apache-2.0

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use strucbreak::break_process::{compute_break_process, BreakGrid};
use strucbreak::design::{DesignSpec, RawSample};
use strucbreak::har::{self, KernelSpec, ZetaMode};
use strucbreak::null_sim::{simulate_q_path, PathConstruction};
use strucbreak::regression::VarianceMode;
use strucbreak::rng::stream;
use strucbreak::test_stats::{expq_of, log_expw_of};

fn gaussian_sample(n: usize, k: usize, seed: u64) -> RawSample {
    let mut rng = stream(seed, 0);
    let z = DMatrix::from_fn(n, k, |_, _| rng.sample::<f64, _>(StandardNormal));
    let y = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    RawSample::new(y, z).unwrap()
}

#[test]
fn exp_identity_gap_shrinks_with_dimension() {
    // exp((c/sqrt2) ExpQ - c^2/4) against ExpW with V-hat = 1. At one grid
    // point the log gap expands to -c^3/(3 sqrt p) + c^2 q/sqrt(2p) + ..., so
    // the mean absolute log gap is compared across dimensions.
    let c = 2.0;
    let grid = BreakGrid::with_default_step(0.35).unwrap();
    let mut gaps = Vec::new();
    for p in [6usize, 10, 15, 30] {
        let mut total = 0.0;
        let reps = 40;
        for rep in 0..reps {
            let sample = gaussian_sample(1500, p - 1, 100 * p as u64 + rep);
            let (x, y) = DesignSpec::raw(true).build(&sample).unwrap();
            let bp = compute_break_process(&x, &y, &grid, VarianceMode::Homoskedastic).unwrap();
            let lhs = c / std::f64::consts::SQRT_2 * expq_of(&bp.q, 1.0, c) - c * c / 4.0;
            let rhs = log_expw_of(&bp.wald, p, c);
            total += (lhs - rhs).abs();
        }
        gaps.push(total / reps as f64);
    }
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
}

#[test]
fn polynomial_sieve_is_invariant_to_affine_covariate_maps() {
    // an affine map of z leaves the span of the degree-d monomials unchanged
    let grid = BreakGrid::with_default_step(0.15).unwrap();
    let sample = gaussian_sample(400, 2, 11);
    let a = DMatrix::from_row_slice(2, 2, &[2.0, -0.5, 0.3, 1.5]);
    let mut z2 = &sample.z * a;
    for mut row in z2.row_iter_mut() {
        row[0] += 3.0;
        row[1] -= 1.0;
    }
    let moved = RawSample::new(sample.y.clone(), z2).unwrap();
    for mode in [VarianceMode::EickerWhite, VarianceMode::Homoskedastic] {
        let run = |s: &RawSample| {
            let (x, y) = DesignSpec::polynomial(2).build(s).unwrap();
            let bp = compute_break_process(&x, &y, &grid, mode).unwrap();
            let v = har::estimate(&x, &y, &KernelSpec::parzen(4.0), mode, ZetaMode::LastObs)
                .unwrap()
                .v_hat;
            (bp.wald, v)
        };
        let (w1, v1) = run(&sample);
        let (w2, v2) = run(&moved);
        for (a, b) in w1.iter().zip(&w2) {
            assert!((a - b).abs() <= 1e-7 * a.abs().max(1.0), "{a} vs {b}");
        }
        assert!((v1 - v2).abs() <= 1e-7 * v1.abs());
    }
}

#[test]
fn limit_covariance_examples() {
    let reps = 20_000;
    let paths: Vec<_> = (0..reps)
        .map(|i| simulate_q_path(1000, PathConstruction::Gaussian, &mut stream(31, i)))
        .collect();
    let cov = |f: &dyn Fn(usize) -> (f64, f64)| {
        let (mut sx, mut sy, mut sxy) = (0.0, 0.0, 0.0);
        for i in 0..reps as usize {
            let (x, y) = f(i);
            sx += x;
            sy += y;
            sxy += x * y;
        }
        let n = reps as f64;
        sxy / n - sx * sy / (n * n)
    };
    assert!((cov(&|i| (paths[i].w[1000], paths[i].w[1000])) - 1.0).abs() < 0.03);
    assert!(cov(&|i| (paths[i].w[300], paths[i].w_bar[600])).abs() < 0.02);
    assert!((cov(&|i| (paths[i].w[600], paths[i].w_bar[300])) - 0.09).abs() < 0.02);
    for k in [200, 500, 800] {
        let mean = paths.iter().map(|p| p.q_at(k)).sum::<f64>() / reps as f64;
        assert!(mean.abs() < 0.03);
    }
}
