//! Memory and bond-dimension growth of chain propagation with system size.

use std::time::Instant;

use stt_core::liouville::build_liouville;
use stt_core::noise::build_correlation_matrix;
use stt_core::propagator::Dynamics;
use stt_core::stt::{train_linking_set, KernelFactors, LinkingSet};

use crate::config::{KernelSource, RunConfig};
use crate::error::CliError;
use crate::models::Model;

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingRow {
    pub d: usize,
    /// Largest footprint of the propagated state plus cached fugacities.
    pub peak_bytes: f64,
    pub mean_bytes: f64,
    pub max_bond: f64,
    /// Resident set size of the whole process after the run (Linux only).
    pub rss_bytes: f64,
    pub seconds: f64,
    /// `ok` or the error that stopped this size.
    pub status: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares `y ≈ slope·x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<Fit> {
    let n = x.len() as f64;
    if x.len() < 2 || x.len() != y.len() {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(Fit { slope, intercept: my - slope * mx, r2 })
}

fn rss_bytes() -> f64 {
    std::fs::read_to_string("/proc/self/statm")
        .ok()
        .and_then(|s| s.split_whitespace().nth(1).and_then(|p| p.parse::<f64>().ok()))
        .map_or(f64::NAN, |pages| pages * 4096.0)
}

/// Propagates the chain model for every size in `cfg.benchmark.dims`.
///
/// The noise couples only through `±α` site energies, so every size shares
/// one set of transfer functions; it is trained once.
pub fn run_scaling(cfg: &RunConfig) -> Result<Vec<ScalingRow>, CliError> {
    let spec = cfg.correlation_spec()?;
    let mode = cfg.noise_mode();
    let tau = cfg.discretization.tau;
    let memory = cfg.discretization.memory;
    let policy = cfg.svd_policy()?;
    let s = &cfg.system;
    let steps = cfg.benchmark.n_steps;
    let g = build_correlation_matrix(&spec, tau, (memory + 1).max(steps), memory)?;

    let mut linking: Option<LinkingSet> = None;
    let mut rows = Vec::new();
    for &d in &cfg.benchmark.dims {
        let t0 = Instant::now();
        let model = Model::chain(d, s.epsilon, s.omega, s.alpha, 0);
        let result = (|| -> Result<(f64, f64, f64), CliError> {
            let ls = build_liouville(&model.system, mode)?;
            let kernel = match cfg.stt.kernel {
                KernelSource::Exact => KernelFactors::exact(&ls, &g, cfg.stt.exact_budget)?,
                KernelSource::Trained => {
                    if linking.is_none() {
                        let (set, _) = train_linking_set(&ls, &g, cfg.stt.n_basis, &cfg.training_config())?;
                        linking = Some(set);
                    }
                    KernelFactors::from_linking(linking.as_ref().expect("trained above"), &ls)?.rounded(cfg.stt.kernel_eps)?
                }
            };
            let dynamics = Dynamics::new(&ls, tau, kernel, policy)?;
            let obs = model.select(&["msd".into()])?;
            let series = dynamics.propagate(&model.rho0, steps, &obs, cfg.output.renormalize)?;
            let bytes: Vec<f64> = series.bond_log.iter().skip(1).map(|&(_, _, b)| b as f64).collect();
            let peak = bytes.iter().copied().fold(0.0, f64::max);
            let mean = bytes.iter().sum::<f64>() / bytes.len().max(1) as f64;
            let bond = series.bond_log.iter().map(|&(_, b, _)| b).max().unwrap_or(0) as f64;
            Ok((peak, mean, bond))
        })();
        let seconds = t0.elapsed().as_secs_f64();
        let row = match result {
            Ok((peak, mean, bond)) => ScalingRow {
                d,
                peak_bytes: peak,
                mean_bytes: mean,
                max_bond: bond,
                rss_bytes: rss_bytes(),
                seconds,
                status: "ok".into(),
            },
            Err(e) => {
                log::warn!("d = {d}: {e}");
                ScalingRow {
                    d,
                    peak_bytes: f64::NAN,
                    mean_bytes: f64::NAN,
                    max_bond: f64::NAN,
                    rss_bytes: rss_bytes(),
                    seconds,
                    status: e.to_string().replace(',', ";"),
                }
            }
        };
        log::info!("d = {d}: peak {} bytes, bond {} ({:.1} s)", row.peak_bytes, row.max_bond, row.seconds);
        rows.push(row);
    }
    Ok(rows)
}

/// Linear fit of mean memory against `d` and the log-log growth exponent,
/// over the sizes that completed.
pub fn scaling_fits(rows: &[ScalingRow]) -> (Option<Fit>, Option<Fit>) {
    let ok: Vec<&ScalingRow> = rows.iter().filter(|r| r.status == "ok").collect();
    let x: Vec<f64> = ok.iter().map(|r| r.d as f64).collect();
    let y: Vec<f64> = ok.iter().map(|r| r.mean_bytes).collect();
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    (linear_fit(&x, &y), linear_fit(&lx, &ly))
}
