//! Correlation quantities checked against brute-force sums.

use stt_core::liouville::NoiseMode;
use stt_core::noise::{build_correlation_matrix, correlation_function, CorrelationSource, CorrelationSpec, SpectralDensity};
use stt_core::C64;

fn ohmic(mode: NoiseMode) -> CorrelationSpec {
    CorrelationSpec::new(mode, 1.0, CorrelationSource::Spectral(SpectralDensity::ohmic(1.0).unwrap())).unwrap()
}

/// Midpoint rule on an `n × n` grid over two slices.
fn midpoint_block(f: impl Fn(f64) -> f64, tau: f64, k: usize, l: usize, n: usize) -> f64 {
    let h = tau / n as f64;
    let (s0, r0) = ((k - 1) as f64 * tau, (l - 1) as f64 * tau);
    let mut acc = 0.0;
    for i in 0..n {
        let s = s0 + (i as f64 + 0.5) * h;
        for j in 0..n {
            acc += f(s - (r0 + (j as f64 + 0.5) * h));
        }
    }
    acc * h * h
}

#[test]
fn extrinsic_blocks_match_midpoint_double_sum() {
    let tau = 0.25;
    let g = build_correlation_matrix(&ohmic(NoiseMode::Extrinsic), tau, 4, 3).unwrap();
    let corr = |t: f64| 1.0 / (1.0 + t * t);
    for (k, l) in [(1, 1), (2, 1), (3, 1), (4, 1), (1, 3)] {
        let want = midpoint_block(corr, tau, k, l, 1000);
        let got = g.block(k, l)[(0, 0)];
        assert!((got - C64::new(want, 0.0)).norm() < 1e-6, "({k},{l}): {got} vs {want}");
    }
}

#[test]
fn intrinsic_correlation_matches_riemann_sum() {
    let t = 0.5f64;
    let dw = 1e-4f64;
    let (mut re, mut im) = (0.0f64, 0.0f64);
    let mut w = 0.5 * dw;
    while w < 50.0 {
        let j = w * (-w).exp();
        re += j / (0.5 * w).tanh() * (w * t).cos();
        im -= j * (w * t).sin();
        w += dw;
    }
    let want = C64::new(re * dw, im * dw);
    let got = correlation_function(&ohmic(NoiseMode::Intrinsic), t).unwrap();
    assert!((got - want).norm() < 1e-8, "{got} vs {want}");
}
