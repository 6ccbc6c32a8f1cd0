//! Noise statistics and their discretization into correlation matrices.
//!
//! Extrinsic noise is one real Gaussian field per coupling. Intrinsic noise
//! is a pair `(ξ, ν)` whose causal cross-correlation encodes detailed balance;
//! its two channels couple through the commutator and anticommutator
//! superoperators respectively.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::linalg::{c, CMat, C64};
use crate::liouville::NoiseMode;
use crate::quad::AdaptiveQuad;

/// Absolute tolerance of `S(t)` / `C(t)` evaluations.
pub const CORRELATION_TOL: f64 = 1e-12;
const LAG_TOL: f64 = 1e-13;
const OHMIC_CUTOFF_MULTIPLE: f64 = 60.0;

#[derive(Clone, Debug, PartialEq)]
pub enum SpectralDensity {
    /// `J(ω) = amplitude · ω · exp(−ω/ωc)`.
    OhmicExponential { omega_c: f64, amplitude: f64 },
    /// Linear interpolation of `(ω, J)` samples, zero outside the table.
    Tabulated { omega: Vec<f64>, values: Vec<f64> },
}

impl SpectralDensity {
    pub fn ohmic(omega_c: f64) -> Result<Self> {
        Self::ohmic_scaled(omega_c, 1.0)
    }

    pub fn ohmic_scaled(omega_c: f64, amplitude: f64) -> Result<Self> {
        if !(omega_c > 0.0 && omega_c.is_finite()) {
            return Err(Error::InvalidParameter(format!("cutoff frequency must be positive, got {omega_c}")));
        }
        if !(amplitude >= 0.0 && amplitude.is_finite()) {
            return Err(Error::InvalidParameter(format!("amplitude must be non-negative, got {amplitude}")));
        }
        Ok(Self::OhmicExponential { omega_c, amplitude })
    }

    pub fn tabulated(omega: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if omega.len() != values.len() || omega.len() < 2 {
            return Err(Error::InvalidParameter("tabulated density needs at least two (ω, J) rows".into()));
        }
        if omega.windows(2).any(|w| w[1] <= w[0]) || omega[0] < 0.0 {
            return Err(Error::InvalidParameter("tabulated ω must be non-negative and strictly increasing".into()));
        }
        if values.iter().any(|&j| j < 0.0 || !j.is_finite()) {
            return Err(Error::InvalidParameter("spectral density must be non-negative".into()));
        }
        Ok(Self::Tabulated { omega, values })
    }

    pub fn eval(&self, w: f64) -> f64 {
        match self {
            Self::OhmicExponential { omega_c, amplitude } => {
                if w <= 0.0 {
                    0.0
                } else {
                    amplitude * w * (-w / omega_c).exp()
                }
            }
            Self::Tabulated { omega, values } => interpolate(omega, values, w),
        }
    }

    /// `J(ω)/ω`, continued to `ω = 0` by its limit.
    fn over_omega(&self, w: f64) -> f64 {
        match self {
            Self::OhmicExponential { omega_c, amplitude } => amplitude * (-w / omega_c).exp(),
            Self::Tabulated { omega, values } => {
                if w > 1e-12 {
                    interpolate(omega, values, w) / w
                } else {
                    let (w1, j1) = if omega[0] > 0.0 { (omega[0], values[0]) } else { (omega[1], values[1]) };
                    j1 / w1
                }
            }
        }
    }

    fn upper_limit(&self) -> f64 {
        match self {
            Self::OhmicExponential { omega_c, .. } => OHMIC_CUTOFF_MULTIPLE * omega_c,
            Self::Tabulated { omega, .. } => omega[omega.len() - 1],
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self {
            Self::OhmicExponential { omega_c, .. } => {
                let mut pts = vec![0.0];
                let mut x = *omega_c;
                while x < self.upper_limit() {
                    pts.push(x);
                    x *= 2.0;
                }
                pts.push(self.upper_limit());
                pts
            }
            Self::Tabulated { omega, .. } => {
                let mut pts = vec![0.0];
                pts.extend(omega.iter().copied().filter(|&w| w > 0.0));
                pts
            }
        }
    }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x < xs[0] || x > xs[xs.len() - 1] {
        return 0.0;
    }
    let k = xs.partition_point(|&v| v <= x).clamp(1, xs.len() - 1);
    let (x0, x1) = (xs[k - 1], xs[k]);
    let t = (x - x0) / (x1 - x0);
    ys[k - 1] * (1.0 - t) + ys[k] * t
}

/// `x coth(x)` with its series near zero.
fn x_coth_x(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 + x2 / 3.0 - x2 * x2 / 45.0
    } else {
        x / x.tanh()
    }
}

pub type CorrelationFn = Arc<dyn Fn(f64) -> C64 + Send + Sync>;

#[derive(Clone)]
pub enum CorrelationSource {
    Spectral(SpectralDensity),
    /// `⟨ξ(t)ξ(s)⟩ = γ δ(t − s)`.
    White { gamma: f64 },
    /// User-supplied `C(t)`; for intrinsic noise this is `S(t)`.
    Analytic(CorrelationFn),
}

impl fmt::Debug for CorrelationSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Spectral(j) => f.debug_tuple("Spectral").field(j).finish(),
            Self::White { gamma } => f.debug_struct("White").field("gamma", gamma).finish(),
            Self::Analytic(_) => f.write_str("Analytic(..)"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CorrelationSpec {
    pub mode: NoiseMode,
    pub beta: f64,
    pub source: CorrelationSource,
}

impl CorrelationSpec {
    pub fn new(mode: NoiseMode, beta: f64, source: CorrelationSource) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(Error::InvalidParameter(format!("β must be positive, got {beta}")));
        }
        if let CorrelationSource::White { gamma } = source {
            if !(gamma >= 0.0) {
                return Err(Error::InvalidParameter(format!("γ must be non-negative, got {gamma}")));
            }
            if mode == NoiseMode::Intrinsic {
                return Err(Error::InvalidParameter("white noise is only defined for extrinsic fields".into()));
            }
        }
        Ok(Self { mode, beta, source })
    }

    pub fn channels(&self) -> usize {
        self.mode.channels().len()
    }
}

/// `C(t)` for extrinsic noise, `S(t) = S′(t) + iS″(t)` for intrinsic noise.
pub fn correlation_function(spec: &CorrelationSpec, t: f64) -> Result<C64> {
    if !t.is_finite() {
        return Err(Error::InvalidParameter(format!("time must be finite, got {t}")));
    }
    let beta = spec.beta;
    match (&spec.source, spec.mode) {
        (CorrelationSource::White { .. }, _) => Err(Error::InvalidParameter(
            "white noise has no pointwise correlation function".into(),
        )),
        (CorrelationSource::Analytic(f), _) => Ok(f(t)),
        (CorrelationSource::Spectral(SpectralDensity::OhmicExponential { omega_c, amplitude }), NoiseMode::Extrinsic) => {
            let x = omega_c * t;
            Ok(c(amplitude * omega_c / (beta * (1.0 + x * x)), 0.0))
        }
        (CorrelationSource::Spectral(j), NoiseMode::Extrinsic) => {
            let q = AdaptiveQuad::new(16, CORRELATION_TOL);
            integrate_panels(&q, &j.breakpoints(), |w| c(j.over_omega(w) * (w * t).cos() / beta, 0.0))
        }
        (CorrelationSource::Spectral(j), NoiseMode::Intrinsic) => {
            let q = AdaptiveQuad::new(16, CORRELATION_TOL);
            integrate_panels(&q, &j.breakpoints(), |w| {
                // J coth(βω/2) = (J/ω) · (2/β) · x coth x with x = βω/2
                let even = j.over_omega(w) * (2.0 / beta) * x_coth_x(0.5 * beta * w);
                c(even * (w * t).cos(), -j.eval(w) * (w * t).sin())
            })
        }
    }
}

fn integrate_panels<F: FnMut(f64) -> C64>(q: &AdaptiveQuad, pts: &[f64], mut f: F) -> Result<C64> {
    let mut acc = C64::new(0.0, 0.0);
    for w in pts.windows(2) {
        acc += q.integrate(w[0], w[1], &mut f)?;
    }
    Ok(acc)
}

/// `∫∫ f(s − s′)` over `s ∈ [t_{k−1}, t_k]`, `s′ ∈ [t_{l−1}, t_l]` with
/// `Δ = k − l`, reduced to one dimension: `∫ f(u) max(0, τ − |u − Δτ|) du`.
/// With `causal`, only `u > 0` contributes.
fn lag_integral<F: FnMut(f64) -> Result<C64>>(tau: f64, delta: i64, causal: bool, mut f: F) -> Result<C64> {
    let center = delta as f64 * tau;
    let q = AdaptiveQuad::new(16, LAG_TOL * tau);
    let mut failure = None;
    let mut wrapped = |u: f64| match f(u) {
        Ok(v) => v * (tau - (u - center).abs()),
        Err(e) => {
            failure.get_or_insert(e);
            C64::new(0.0, 0.0)
        }
    };
    let mut total = C64::new(0.0, 0.0);
    for (lo, hi) in [(center - tau, center), (center, center + tau)] {
        let (lo, hi) = if causal { (lo.max(0.0), hi.max(0.0)) } else { (lo, hi) };
        if hi > lo {
            total += q.integrate(lo, hi, &mut wrapped)?;
        }
    }
    match failure {
        Some(e) => Err(e),
        None => Ok(total),
    }
}

/// Discretized noise covariance with finite memory.
///
/// `forward[Δ]` holds the `c×c` block `G_{l+Δ, l}` and `backward[Δ]` holds
/// `G_{l, l+Δ}`; blocks with lag beyond `memory` vanish. `table[Δ]` is the
/// causal symmetrized block `G̃_Δ` such that
/// `½ Σ_{k,l} w_kᵀ G_{k,l} w_l = Σ_n Σ_Δ w_nᵀ G̃_Δ w_{n−Δ}`.
#[derive(Clone, Debug)]
pub struct CorrelationMatrix {
    pub tau: f64,
    pub n_steps: usize,
    pub memory: usize,
    pub channels: usize,
    forward: Vec<CMat>,
    backward: Vec<CMat>,
    table: Vec<CMat>,
}

impl CorrelationMatrix {
    pub fn from_lag_blocks(
        tau: f64,
        n_steps: usize,
        memory: usize,
        forward: Vec<CMat>,
        backward: Vec<CMat>,
    ) -> Result<Self> {
        validate_discretization(tau, n_steps, memory)?;
        if forward.len() != memory + 1 || backward.len() != memory + 1 {
            return Err(Error::Shape(format!("expected {} lag blocks", memory + 1)));
        }
        let channels = forward[0].nrows();
        if forward.iter().chain(&backward).any(|b| b.shape() != (channels, channels)) {
            return Err(Error::Shape("lag blocks must share one square shape".into()));
        }
        let mut table = Vec::with_capacity(memory + 1);
        table.push(&forward[0] * c(0.5, 0.0));
        for d in 1..=memory {
            table.push((&forward[d] + backward[d].transpose()) * c(0.5, 0.0));
        }
        Ok(Self { tau, n_steps, memory, channels, forward, backward, table })
    }

    /// `G_{k,l}` for 1-based slice indices.
    pub fn block(&self, k: usize, l: usize) -> CMat {
        let lag = k.abs_diff(l);
        if lag > self.memory {
            return CMat::zeros(self.channels, self.channels);
        }
        if k >= l {
            self.forward[lag].clone()
        } else {
            self.backward[lag].clone()
        }
    }

    /// `G̃_Δ`, zero beyond the memory length.
    pub fn symmetrized(&self, delta: usize) -> CMat {
        self.table.get(delta).cloned().unwrap_or_else(|| CMat::zeros(self.channels, self.channels))
    }

    pub fn table(&self) -> &[CMat] {
        &self.table
    }

    /// Full `(cN)×(cN)` matrix, slice-major and channel-minor.
    pub fn dense(&self) -> CMat {
        let (n, ch) = (self.n_steps, self.channels);
        let mut g = CMat::zeros(n * ch, n * ch);
        for k in 1..=n {
            for l in 1..=n {
                let b = self.block(k, l);
                g.view_mut(((k - 1) * ch, (l - 1) * ch), (ch, ch)).copy_from(&b);
            }
        }
        g
    }

    /// `½ Σ_{k,l} w_kᵀ G_{k,l} w_l`; `w[k−1]` holds the channel values of slice `k`.
    pub fn quadratic_form(&self, w: &[Vec<f64>]) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for k in 1..=w.len() {
            for l in 1..=w.len() {
                acc += bilinear(&self.block(k, l), &w[k - 1], &w[l - 1]);
            }
        }
        acc * 0.5
    }

    /// `Σ_n Σ_Δ w_nᵀ G̃_Δ w_{n−Δ}`.
    pub fn causal_exponent(&self, w: &[Vec<f64>]) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for n in 0..w.len() {
            for d in 0..=self.memory.min(n) {
                acc += bilinear(&self.table[d], &w[n], &w[n - d]);
            }
        }
        acc
    }

    /// Influence kernel `exp(−½ wᵀ G w)`.
    pub fn kernel(&self, w: &[Vec<f64>]) -> C64 {
        (-self.quadratic_form(w)).exp()
    }
}

fn bilinear(g: &CMat, a: &[f64], b: &[f64]) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            acc += g[(i, j)] * (a[i] * b[j]);
        }
    }
    acc
}

fn validate_discretization(tau: f64, n_steps: usize, memory: usize) -> Result<()> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidParameter(format!("τ must be positive, got {tau}")));
    }
    if n_steps == 0 || memory + 1 > n_steps {
        return Err(Error::InvalidParameter(format!(
            "memory length {memory} needs at least {} steps, got {n_steps}",
            memory + 1
        )));
    }
    Ok(())
}

/// Discretizes `spec` on `N` slices of width `τ` with memory length `M`.
pub fn build_correlation_matrix(spec: &CorrelationSpec, tau: f64, n_steps: usize, memory: usize) -> Result<CorrelationMatrix> {
    validate_discretization(tau, n_steps, memory)?;
    let ch = spec.channels();
    let mut forward = Vec::with_capacity(memory + 1);
    let mut backward = Vec::with_capacity(memory + 1);
    if let CorrelationSource::White { gamma } = spec.source {
        for d in 0..=memory {
            let v = if d == 0 { gamma * tau } else { 0.0 };
            forward.push(CMat::from_element(1, 1, c(v, 0.0)));
            backward.push(CMat::from_element(1, 1, c(v, 0.0)));
        }
        return CorrelationMatrix::from_lag_blocks(tau, n_steps, memory, forward, backward);
    }
    let re = |t: f64| correlation_function(spec, t).map(|z| c(z.re, 0.0));
    let im = |t: f64| correlation_function(spec, t).map(|z| c(0.0, 2.0 * z.im));
    for d in 0..=memory as i64 {
        let mut fwd = CMat::zeros(ch, ch);
        let mut bwd = CMat::zeros(ch, ch);
        match spec.mode {
            NoiseMode::Extrinsic => {
                let g = lag_integral(tau, d, false, |t| correlation_function(spec, t))?;
                fwd[(0, 0)] = g;
                bwd[(0, 0)] = g;
            }
            NoiseMode::Intrinsic => {
                // ⟨ξξ⟩ = S′, ⟨ξν⟩ = 2iθ(t)S″, ⟨νξ⟩ = ⟨νν⟩ = 0
                let gxx = lag_integral(tau, d, false, re)?;
                fwd[(0, 0)] = gxx;
                bwd[(0, 0)] = gxx;
                fwd[(0, 1)] = lag_integral(tau, d, true, im)?;
                bwd[(0, 1)] = lag_integral(tau, -d, true, im)?;
            }
        }
        forward.push(fwd);
        backward.push(bwd);
    }
    CorrelationMatrix::from_lag_blocks(tau, n_steps, memory, forward, backward)
}

/// Declared cross-correlation between global channels `a` and `b`:
/// `forward[Δ] = G^{ab}_{l+Δ, l}` and `backward[Δ] = G^{ab}_{l, l+Δ}`.
/// The mirrored block `G^{ba}_{k,l} = G^{ab}_{l,k}` is implied.
#[derive(Clone, Debug)]
pub struct CrossCorrelation {
    pub a: usize,
    pub b: usize,
    pub forward: Vec<C64>,
    pub backward: Vec<C64>,
}

/// Block assembly of several noise sources; channels are concatenated in
/// block order and interlaced per slice.
pub fn assemble_multinoise(blocks: &[CorrelationMatrix], cross: &[CrossCorrelation]) -> Result<CorrelationMatrix> {
    let first = blocks.first().ok_or_else(|| Error::InvalidParameter("no noise blocks".into()))?;
    if blocks.len() == 1 && cross.is_empty() {
        return Ok(first.clone());
    }
    let (tau, n, m) = (first.tau, first.n_steps, first.memory);
    if blocks.iter().any(|b| b.tau != tau || b.n_steps != n || b.memory != m) {
        return Err(Error::InvalidParameter("noise blocks use different discretizations".into()));
    }
    let total: usize = blocks.iter().map(|b| b.channels).sum();
    let mut forward = vec![CMat::zeros(total, total); m + 1];
    let mut backward = vec![CMat::zeros(total, total); m + 1];
    let mut off = 0;
    for b in blocks {
        for d in 0..=m {
            forward[d].view_mut((off, off), (b.channels, b.channels)).copy_from(&b.forward[d]);
            backward[d].view_mut((off, off), (b.channels, b.channels)).copy_from(&b.backward[d]);
        }
        off += b.channels;
    }
    for x in cross {
        if x.a >= total || x.b >= total || x.a == x.b {
            return Err(Error::InvalidParameter(format!("invalid cross-correlation channels ({}, {})", x.a, x.b)));
        }
        if x.forward.len() != m + 1 || x.backward.len() != m + 1 {
            return Err(Error::Shape(format!("cross-correlation needs {} lags", m + 1)));
        }
        for d in 0..=m {
            forward[d][(x.a, x.b)] = x.forward[d];
            backward[d][(x.a, x.b)] = x.backward[d];
            forward[d][(x.b, x.a)] = x.backward[d];
            backward[d][(x.b, x.a)] = x.forward[d];
        }
    }
    CorrelationMatrix::from_lag_blocks(tau, n, m, forward, backward)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ohmic(mode: NoiseMode) -> CorrelationSpec {
        CorrelationSpec::new(mode, 1.0, CorrelationSource::Spectral(SpectralDensity::ohmic(1.0).unwrap())).unwrap()
    }

    #[test]
    fn extrinsic_ohmic_at_zero_is_one() {
        let v = correlation_function(&ohmic(NoiseMode::Extrinsic), 0.0).unwrap();
        assert!((v - c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn extrinsic_closed_form_matches_quadrature() {
        let tab: Vec<f64> = (0..=30000).map(|k| k as f64 * 0.002).collect();
        let vals: Vec<f64> = tab.iter().map(|w| w * (-w).exp()).collect();
        let tabulated = CorrelationSpec::new(
            NoiseMode::Extrinsic,
            1.0,
            CorrelationSource::Spectral(SpectralDensity::tabulated(tab, vals).unwrap()),
        )
        .unwrap();
        for t in [0.0, 0.3, 1.7] {
            let a = correlation_function(&ohmic(NoiseMode::Extrinsic), t).unwrap();
            let b = correlation_function(&tabulated, t).unwrap();
            assert!((a - b).norm() < 1e-4, "t={t}: {a} vs {b}");
        }
    }

    #[test]
    fn intrinsic_imaginary_part_vanishes_at_zero() {
        let v = correlation_function(&ohmic(NoiseMode::Intrinsic), 0.0).unwrap();
        assert!(v.im.abs() < 1e-14);
        // ∫ ω e^{-ω} coth(ω/2) dω is finite and exceeds 2/β·∫ e^{-ω}
        assert!(v.re > 2.0);
    }

    #[test]
    fn intrinsic_symmetry() {
        let spec = ohmic(NoiseMode::Intrinsic);
        for t in [0.2, 0.9, 3.0] {
            let p = correlation_function(&spec, t).unwrap();
            let m = correlation_function(&spec, -t).unwrap();
            assert!((p.re - m.re).abs() < 1e-11);
            assert!((p.im + m.im).abs() < 1e-11);
        }
    }

    #[test]
    fn white_noise_is_diagonal() {
        let spec = CorrelationSpec::new(NoiseMode::Extrinsic, 1.0, CorrelationSource::White { gamma: 0.7 }).unwrap();
        let g = build_correlation_matrix(&spec, 0.1, 5, 4).unwrap();
        let dense = g.dense();
        assert!((dense - CMat::identity(5, 5) * c(0.07, 0.0)).iter().all(|z| z.norm() < 1e-15));
        assert!((g.symmetrized(0)[(0, 0)] - c(0.035, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn zero_density_gives_zero_matrix() {
        let spec = CorrelationSpec::new(
            NoiseMode::Intrinsic,
            1.0,
            CorrelationSource::Spectral(SpectralDensity::ohmic_scaled(1.0, 0.0).unwrap()),
        )
        .unwrap();
        let g = build_correlation_matrix(&spec, 0.25, 3, 2).unwrap();
        assert!(g.dense().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn memory_longer_than_run_is_rejected() {
        assert!(build_correlation_matrix(&ohmic(NoiseMode::Extrinsic), 0.25, 3, 3).is_err());
        assert!(build_correlation_matrix(&ohmic(NoiseMode::Extrinsic), 0.0, 3, 1).is_err());
    }

    #[test]
    fn intrinsic_blocks_are_causal() {
        let g = build_correlation_matrix(&ohmic(NoiseMode::Intrinsic), 0.25, 4, 3).unwrap();
        for k in 1..=4 {
            for l in 1..=4 {
                let b = g.block(k, l);
                assert_eq!(b[(1, 0)], c(0.0, 0.0));
                assert_eq!(b[(1, 1)], c(0.0, 0.0));
                if k < l {
                    assert_eq!(b[(0, 1)], c(0.0, 0.0));
                }
                assert!(b[(0, 0)].im.abs() < 1e-15);
                assert!(b[(0, 1)].re.abs() < 1e-15);
            }
        }
    }

    #[test]
    fn rejects_invalid_specs() {
        assert!(CorrelationSpec::new(NoiseMode::Extrinsic, 0.0, CorrelationSource::White { gamma: 1.0 }).is_err());
        assert!(CorrelationSpec::new(NoiseMode::Intrinsic, 1.0, CorrelationSource::White { gamma: 1.0 }).is_err());
        assert!(SpectralDensity::tabulated(vec![0.0, 1.0], vec![0.0, -1.0]).is_err());
        assert!(SpectralDensity::ohmic(0.0).is_err());
    }
}
