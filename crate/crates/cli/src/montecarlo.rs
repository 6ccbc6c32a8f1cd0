//! Trajectory averaging of the stochastic Liouville equation.
//!
//! Each trajectory integrates `dρ/dt = −i[H0 + ξV, ρ] − iν{V, ρ}` with
//! piecewise-constant fields sampled at the midpoints of a fine grid:
//! `ρ ← e^{−iΔ(H0 + (ξ+ν)V)} ρ e^{iΔ(H0 + (ξ−ν)V)}`.
//!
//! Extrinsic noise has `ν = 0` and real `ξ` with covariance `C(t)`. Intrinsic
//! noise uses a complex white `ν` and `ξ = ξ₀ + i∫₀^∞ S″(u) ν*(t−u) du`, with
//! `ξ₀` real of covariance `S′`, so that `⟨ξξ⟩ = S′`, `⟨νν⟩ = 0` and
//! `⟨ξ(t)ν(t′)⟩ = iθ(t−t′)S″(t−t′)`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use stt_core::linalg::{c, expm};
use stt_core::liouville::{HilbertSystem, NoiseMode};
use stt_core::noise::{correlation_function, CorrelationSource, CorrelationSpec};
use stt_core::{CMat, C64};

use crate::error::CliError;

/// Negative circulant eigenvalues below this fraction of the largest are
/// clipped to zero. Slowly decaying covariances leave a small negative
/// remainder from the truncated tail at any embedding size.
const CLIP: f64 = 1e-6;
/// Embedding sizes tried: `2(n−1)` rounded up to a power of two, then doubled.
const MAX_REFINE: usize = 6;

/// Stationary Gaussian sequence `x_0..x_{n−1}` with `⟨x_j x_k⟩ = c(|j−k|)`
/// by circulant embedding.
pub struct CirculantSampler {
    n: usize,
    /// `sqrt(λ_k / m)` of the embedding circulant.
    scale: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl CirculantSampler {
    /// `cov(j)` must be defined for every lag up to the embedding size.
    pub fn new(n: usize, mut cov: impl FnMut(usize) -> Result<f64, CliError>) -> Result<Self, CliError> {
        let mut m = (2 * n.max(2) - 2).next_power_of_two();
        let mut planner = FftPlanner::new();
        let mut lags: Vec<f64> = Vec::new();
        let mut worst = 0.0;
        for _ in 0..MAX_REFINE {
            while lags.len() <= m / 2 {
                lags.push(cov(lags.len())?);
            }
            let mut row: Vec<C64> = (0..m).map(|j| c(lags[j.min(m - j)], 0.0)).collect();
            let fft = planner.plan_fft_forward(m);
            fft.process(&mut row);
            let top = row.iter().map(|z| z.re).fold(0.0f64, f64::max);
            let min = row.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
            if min >= -CLIP * top.max(f64::MIN_POSITIVE) {
                let scale = row.iter().map(|z| (z.re.max(0.0) / m as f64).sqrt()).collect();
                return Ok(Self { n, scale, fft });
            }
            worst = min;
            m *= 2;
        }
        Err(CliError::Numerical(format!(
            "embedded covariance is not positive semi-definite (minimum eigenvalue {worst:e}); refine the time grid"
        )))
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut buf: Vec<C64> = self
            .scale
            .iter()
            .map(|&s| c(s * rng.sample::<f64, _>(StandardNormal), s * rng.sample::<f64, _>(StandardNormal)))
            .collect();
        self.fft.process(&mut buf);
        buf[..self.n].iter().map(|z| z.re).collect()
    }
}

/// Field values on the fine midpoints of one trajectory.
#[derive(Clone, Debug)]
pub struct Fields {
    pub xi: Vec<C64>,
    /// Empty for extrinsic noise.
    pub nu: Vec<C64>,
}

enum Source {
    White { sd: f64 },
    Colored(CirculantSampler),
    Intrinsic {
        even: CirculantSampler,
        /// FFT of the zero-padded causal response `iS″(kΔ)Δ`.
        response: Vec<C64>,
        fwd: Arc<dyn Fft<f64>>,
        inv: Arc<dyn Fft<f64>>,
    },
}

pub struct FieldGenerator {
    pub n: usize,
    pub dt: f64,
    source: Source,
}

impl FieldGenerator {
    pub fn new(spec: &CorrelationSpec, dt: f64, n: usize) -> Result<Self, CliError> {
        if !(dt > 0.0) || n == 0 {
            return Err(CliError::Config("time grid must have positive spacing and length".into()));
        }
        let source = match (&spec.source, spec.mode) {
            (CorrelationSource::White { gamma }, _) => Source::White { sd: (gamma / dt).sqrt() },
            (_, NoiseMode::Extrinsic) => {
                Source::Colored(CirculantSampler::new(n, |j| Ok(correlation_function(spec, j as f64 * dt)?.re))?)
            }
            (_, NoiseMode::Intrinsic) => {
                let even = CirculantSampler::new(n, |j| Ok(correlation_function(spec, j as f64 * dt)?.re))?;
                let len = (2 * n).next_power_of_two();
                let mut planner = FftPlanner::new();
                let fwd = planner.plan_fft_forward(len);
                let inv = planner.plan_fft_inverse(len);
                let mut response = vec![c(0.0, 0.0); len];
                for (k, r) in response.iter_mut().enumerate().take(n) {
                    *r = c(0.0, correlation_function(spec, k as f64 * dt)?.im * dt);
                }
                fwd.process(&mut response);
                Source::Intrinsic { even, response, fwd, inv }
            }
        };
        Ok(Self { n, dt, source })
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Fields {
        match &self.source {
            Source::White { sd } => Fields {
                xi: (0..self.n).map(|_| c(sd * rng.sample::<f64, _>(StandardNormal), 0.0)).collect(),
                nu: Vec::new(),
            },
            Source::Colored(s) => Fields { xi: s.sample(rng).into_iter().map(|x| c(x, 0.0)).collect(), nu: Vec::new() },
            Source::Intrinsic { even, response, fwd, inv } => {
                let sd = (0.5 / self.dt).sqrt();
                let nu: Vec<C64> = (0..self.n)
                    .map(|_| c(sd * rng.sample::<f64, _>(StandardNormal), sd * rng.sample::<f64, _>(StandardNormal)))
                    .collect();
                let len = response.len();
                let mut buf = vec![c(0.0, 0.0); len];
                for (b, z) in buf.iter_mut().zip(&nu) {
                    *b = z.conj();
                }
                fwd.process(&mut buf);
                for (b, r) in buf.iter_mut().zip(response) {
                    *b *= r;
                }
                inv.process(&mut buf);
                let norm = 1.0 / len as f64;
                let x0 = even.sample(rng);
                let xi = x0.iter().zip(&buf).map(|(&a, &b)| c(a, 0.0) + b * norm).collect();
                Fields { xi, nu }
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct McSettings {
    pub n_traj: usize,
    pub tau: f64,
    pub n_steps: usize,
    /// Fine steps per `tau`.
    pub substeps: usize,
    pub seed: u64,
}

/// Ensemble averages with standard errors on `t_k = kτ`.
#[derive(Clone, Debug, PartialEq)]
pub struct McResult {
    pub names: Vec<String>,
    pub times: Vec<f64>,
    pub mean: Vec<Vec<f64>>,
    pub stderr: Vec<Vec<f64>>,
    pub trace: Vec<f64>,
}

impl McResult {
    pub fn column(&self, name: &str) -> Option<(Vec<f64>, Vec<f64>)> {
        let i = self.names.iter().position(|n| n == name)?;
        Some((self.mean.iter().map(|r| r[i]).collect(), self.stderr.iter().map(|r| r[i]).collect()))
    }
}

/// Averages `n_traj` trajectories. Trajectory `i` draws from ChaCha stream
/// `i` of `seed`, and results are reduced in trajectory order, so the output
/// does not depend on the number of worker threads.
pub fn sle_monte_carlo(
    sys: &HilbertSystem,
    spec: &CorrelationSpec,
    rho0: &CMat,
    observables: &[(String, CMat)],
    settings: &McSettings,
) -> Result<McResult, CliError> {
    if sys.coupling_count() != 1 {
        return Err(CliError::Config("trajectory sampling supports a single noise coupling".into()));
    }
    if settings.n_traj == 0 || settings.substeps == 0 {
        return Err(CliError::Config("need at least one trajectory and one substep".into()));
    }
    let d = sys.physical_dim();
    let h0 = sys.h0().view((0, 0), (d, d)).into_owned();
    let v = sys.coupling(0).view((0, 0), (d, d)).into_owned();
    let dt = settings.tau / settings.substeps as f64;
    let n_fine = settings.n_steps * settings.substeps;
    let gen = FieldGenerator::new(spec, dt, n_fine.max(1))?;
    let n_rec = settings.n_steps + 1;
    let n_obs = observables.len();
    let i = c(0.0, 1.0);

    let run = |traj: usize| -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
        rng.set_stream(traj as u64);
        let f = gen.sample(&mut rng);
        let mut rho = rho0.clone();
        // observables then trace, per recorded time
        let mut out = Vec::with_capacity(n_rec * (n_obs + 1));
        let push = |rho: &CMat, out: &mut Vec<f64>| {
            out.extend(observables.iter().map(|(_, a)| (a * rho).trace().re));
            out.push(rho.trace().re);
        };
        push(&rho, &mut out);
        for k in 0..n_fine {
            let nu = f.nu.get(k).copied().unwrap_or(c(0.0, 0.0));
            let left = expm(&((&h0 + &v * (f.xi[k] + nu)) * (-i * dt)));
            let right = expm(&((&h0 + &v * (f.xi[k] - nu)) * (i * dt)));
            rho = left * rho * right;
            if (k + 1) % settings.substeps == 0 {
                push(&rho, &mut out);
            }
        }
        out
    };
    let per_traj: Vec<Vec<f64>> = (0..settings.n_traj).into_par_iter().map(run).collect();

    let width = n_obs + 1;
    let n = settings.n_traj as f64;
    let mut mean = vec![0.0; n_rec * width];
    for t in &per_traj {
        for (m, &x) in mean.iter_mut().zip(t) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; n_rec * width];
    for t in &per_traj {
        for ((v, &x), &m) in var.iter_mut().zip(t).zip(&mean) {
            *v += (x - m) * (x - m);
        }
    }
    let se: Vec<f64> =
        var.iter().map(|v| if settings.n_traj > 1 { (v / (n - 1.0) / n).sqrt() } else { 0.0 }).collect();
    Ok(McResult {
        names: observables.iter().map(|(n, _)| n.clone()).collect(),
        times: (0..n_rec).map(|k| k as f64 * settings.tau).collect(),
        mean: (0..n_rec).map(|k| mean[k * width..k * width + n_obs].to_vec()).collect(),
        stderr: (0..n_rec).map(|k| se[k * width..k * width + n_obs].to_vec()).collect(),
        trace: (0..n_rec).map(|k| mean[k * width + n_obs]).collect(),
    })
}
