//! The four subcommands. Each writes its outputs plus the resolved config
//! into the output directory.

use std::fs;
use std::path::{Path, PathBuf};

use stt_core::linalg::{devectorize, hermitian_deviation, vectorize, CVec};
use stt_core::liouville::{build_liouville, free_propagator, LiouvilleSystem};
use stt_core::noise::{build_correlation_matrix, CorrelationMatrix};
use stt_core::oracle::{path_sum, PATH_BUDGET};
use stt_core::propagator::{Dynamics, ObservableSeries};
use stt_core::stt::{train_linking_set, KernelFactors, TrainingCurve};
use stt_core::CMat;

use crate::config::{hex, KernelSource, RunConfig};
use crate::error::CliError;
use crate::io::{read_linking, write_bonds, write_curve, write_linking, write_series, write_table};
use crate::montecarlo::{sle_monte_carlo, McResult, McSettings};
use crate::scaling::{run_scaling, scaling_fits, ScalingRow};

pub const LINKING_FILE: &str = "linking.sttlink";
pub const CONFIG_FILE: &str = "config.toml";

fn prepare(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = cfg.output.directory.clone();
    fs::create_dir_all(&dir).map_err(|e| CliError::Resource(format!("{}: {e}", dir.display())))?;
    fs::write(dir.join(CONFIG_FILE), cfg.to_toml())?;
    Ok(dir)
}

fn liouville(cfg: &RunConfig) -> Result<LiouvilleSystem, CliError> {
    Ok(build_liouville(&cfg.hilbert_system()?, cfg.noise_mode())?)
}

/// Correlation table covering one memory window.
fn window(cfg: &RunConfig) -> Result<CorrelationMatrix, CliError> {
    let m = cfg.discretization.memory;
    Ok(build_correlation_matrix(&cfg.correlation_spec()?, cfg.discretization.tau, m + 1, m)?)
}

fn hash_line(cfg: &RunConfig) -> String {
    format!("config_hash={}", cfg.config_hash())
}

/// Fits `T_1..T_{M+1}` and writes the linking matrices and one training
/// curve per transfer function.
pub fn cmd_train(cfg: &RunConfig) -> Result<Vec<TrainingCurve>, CliError> {
    let dir = prepare(cfg)?;
    let ls = liouville(cfg)?;
    let g = window(cfg)?;
    let (set, curves) = train_linking_set(&ls, &g, cfg.stt.n_basis, &cfg.training_config())?;
    write_linking(&dir.join(LINKING_FILE), &set, &cfg.training_hash()?)?;
    for (j, curve) in curves.iter().enumerate() {
        write_curve(&dir.join(format!("training_T{}.csv", j + 1)), curve)?;
        log::info!("T_{}: loss {:e} after {} steps", j + 1, curve.final_loss, curve.steps);
    }
    Ok(curves)
}

/// Kernel factors as configured: exact, or read from `linking` (default:
/// the output directory) after checking its config hash.
pub fn kernel_factors(cfg: &RunConfig, ls: &LiouvilleSystem, linking: Option<&Path>) -> Result<KernelFactors, CliError> {
    match cfg.stt.kernel {
        KernelSource::Exact => Ok(KernelFactors::exact(ls, &window(cfg)?, cfg.stt.exact_budget)?),
        KernelSource::Trained => {
            let path = linking.map(Path::to_path_buf).unwrap_or_else(|| cfg.output.directory.join(LINKING_FILE));
            if !path.exists() {
                return Err(CliError::Config(format!("{} not found; run `train` first", path.display())));
            }
            let (set, hash) = read_linking(&path)?;
            let want = cfg.training_hash()?;
            if hash != want {
                return Err(CliError::Config(format!(
                    "{} was trained for config {} but this run needs {}",
                    path.display(),
                    hex(&hash),
                    hex(&want)
                )));
            }
            Ok(KernelFactors::from_linking(&set, ls)?.rounded(cfg.stt.kernel_eps)?)
        }
    }
}

/// Propagates the configured initial state and writes `observables.csv`
/// and `bonds.csv`.
pub fn cmd_propagate(cfg: &RunConfig, linking: Option<&Path>) -> Result<ObservableSeries, CliError> {
    let dir = prepare(cfg)?;
    let ls = liouville(cfg)?;
    let model = cfg.model()?;
    let kernel = kernel_factors(cfg, &ls, linking)?;
    let dynamics = Dynamics::new(&ls, cfg.discretization.tau, kernel, cfg.svd_policy()?)?;
    let obs = model.select(&cfg.output.observables)?;
    let series = dynamics.propagate(&model.rho0, cfg.discretization.n_steps, &obs, cfg.output.renormalize)?;
    write_series(&dir.join("observables.csv"), &series, Some(&hash_line(cfg)))?;
    write_bonds(&dir.join("bonds.csv"), &series.bond_log)?;
    Ok(series)
}

/// Observables from brute-force path sums for `N = 0..=steps`.
pub fn path_sum_series(cfg: &RunConfig, steps: usize) -> Result<ObservableSeries, CliError> {
    let ls = liouville(cfg)?;
    let model = cfg.model()?;
    let obs = model.select(&cfg.output.observables)?;
    let tau = cfg.discretization.tau;
    let fp = free_propagator(&ls, tau)?;
    let d = ls.dim();
    let phys = ls.physical_dim();
    let mut rho0 = CMat::zeros(d, d);
    rho0.view_mut((0, 0), (phys, phys)).copy_from(&model.rho0);
    let v0 = vectorize(&rho0)?;
    let g = if steps > 0 {
        Some(build_correlation_matrix(&cfg.correlation_spec()?, tau, steps, cfg.discretization.memory.min(steps - 1))?)
    } else {
        None
    };
    let mut s = ObservableSeries { names: obs.iter().map(|(n, _)| n.clone()).collect(), ..Default::default() };
    for n in 0..=steps {
        let rho = match &g {
            Some(g) if n > 0 => devectorize(&CVec::from_column_slice((path_sum(&fp, g, n, PATH_BUDGET)? * &v0).as_slice()), d)?,
            _ => rho0.clone(),
        };
        let block = rho.view((0, 0), (phys, phys)).into_owned();
        s.times.push(n as f64 * tau);
        s.values.push(obs.iter().map(|(_, a)| (a * &block).trace().re).collect());
        s.trace_dev.push((block.trace().re - 1.0).abs().max(block.trace().im.abs()));
        s.herm_dev.push(hermitian_deviation(&block));
    }
    Ok(s)
}

pub fn monte_carlo(cfg: &RunConfig) -> Result<McResult, CliError> {
    let model = cfg.model()?;
    let obs = model.select(&cfg.output.observables)?;
    let tau = cfg.discretization.tau;
    let t_max = cfg.oracle.t_max.unwrap_or(cfg.discretization.n_steps as f64 * tau);
    let settings = McSettings {
        n_traj: cfg.oracle.n_traj,
        tau,
        n_steps: (t_max / tau).round() as usize,
        substeps: cfg.oracle.substeps,
        seed: cfg.output.seed,
    };
    sle_monte_carlo(&model.system, &cfg.correlation_spec()?, &model.rho0, &obs, &settings)
}

/// Writes `path_sum.csv` and, when enabled, `monte_carlo.csv`; both start
/// with a `# config_hash=...` line.
pub fn cmd_oracle(cfg: &RunConfig) -> Result<(ObservableSeries, Option<McResult>), CliError> {
    let dir = prepare(cfg)?;
    let ps = path_sum_series(cfg, cfg.oracle.path_steps)?;
    write_series(&dir.join("path_sum.csv"), &ps, Some(&hash_line(cfg)))?;
    let mc = if cfg.oracle.monte_carlo {
        let r = monte_carlo(cfg)?;
        let mut header = vec!["t".to_string()];
        for n in &r.names {
            header.push(n.clone());
            header.push(format!("{n}_se"));
        }
        header.push("trace".into());
        let rows: Vec<Vec<f64>> = (0..r.times.len())
            .map(|k| {
                let mut row = vec![r.times[k]];
                for i in 0..r.names.len() {
                    row.push(r.mean[k][i]);
                    row.push(r.stderr[k][i]);
                }
                row.push(r.trace[k]);
                row
            })
            .collect();
        let refs: Vec<&str> = header.iter().map(String::as_str).collect();
        write_table(&dir.join("monte_carlo.csv"), &refs, &rows, Some(&hash_line(cfg)))?;
        Some(r)
    } else {
        None
    };
    Ok((ps, mc))
}

/// Runs the chain over `benchmark.dims` and writes `scaling.csv`, whose
/// first line carries the linear and log-log fits of mean tensor memory.
pub fn cmd_benchmark_scaling(cfg: &RunConfig) -> Result<Vec<ScalingRow>, CliError> {
    let dir = prepare(cfg)?;
    let rows = run_scaling(cfg)?;
    let (lin, ll) = scaling_fits(&rows);
    let fmt = |f: &Option<crate::scaling::Fit>, what: &str| match f {
        Some(f) => format!("{what}_slope={:e} {what}_r2={:e}", f.slope, f.r2),
        None => format!("{what}_slope=nan {what}_r2=nan"),
    };
    let comment = format!("{} {} {}", hash_line(cfg), fmt(&lin, "linear"), fmt(&ll, "loglog"));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["d", "peak_bytes", "mean_bytes", "max_bond", "status"])?;
    for r in &rows {
        w.write_record([
            r.d.to_string(),
            format!("{:e}", r.peak_bytes),
            format!("{:e}", r.mean_bytes),
            format!("{:e}", r.max_bond),
            r.status.clone(),
        ])?;
    }
    let body = w.into_inner().map_err(|e| CliError::Resource(e.to_string()))?;
    let mut text = format!("# {comment}\n").into_bytes();
    text.extend(body);
    fs::write(dir.join("scaling.csv"), text)?;
    // wall time and process RSS vary between runs; kept apart
    let res: Vec<Vec<f64>> = rows.iter().map(|r| vec![r.d as f64, r.rss_bytes, r.seconds]).collect();
    write_table(&dir.join("scaling_resources.csv"), &["d", "rss_bytes", "seconds"], &res, None)?;
    Ok(rows)
}
