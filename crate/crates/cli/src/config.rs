//! Run configuration: one TOML document with fixed sections.
//!
//! Every physical quantity is expressed in units of the tunnelling / hopping
//! amplitude with ħ = k_B = 1. Unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use stt_core::liouville::{HilbertSystem, NoiseMode};
use stt_core::noise::{CorrelationSource, CorrelationSpec, SpectralDensity};
use stt_core::stt::{Optimizer, TrainingConfig};
use stt_core::tt::SvdPolicy;
use stt_core::CMat;

use crate::error::CliError;
use crate::io::{read_matrix, read_spectral_density};
use crate::models::Model;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemSection,
    pub noise: NoiseSection,
    pub discretization: Discretization,
    pub stt: SttSection,
    pub output: OutputSection,
    pub oracle: OracleSection,
    pub benchmark: BenchmarkSection,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    SpinBoson,
    Chain,
    Custom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSection {
    pub model: ModelKind,
    /// Number of states; fixed to 2 for the spin-boson model.
    pub d: usize,
    pub omega: f64,
    pub epsilon: f64,
    pub alpha: f64,
    /// Custom model: whitespace separated `re im` pairs, one row per line.
    pub h0_file: Option<PathBuf>,
    pub v_file: Option<PathBuf>,
    /// Custom model initial state; defaults to the first basis state.
    pub rho0_file: Option<PathBuf>,
    /// Chain model: site carrying the initial excitation (0-based).
    pub initial_site: usize,
}

impl Default for SystemSection {
    fn default() -> Self {
        Self {
            model: ModelKind::SpinBoson,
            d: 2,
            omega: 1.0,
            epsilon: 0.5,
            alpha: 0.75,
            h0_file: None,
            v_file: None,
            rho0_file: None,
            initial_site: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Extrinsic,
    Intrinsic,
}

impl From<Mode> for NoiseMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Extrinsic => NoiseMode::Extrinsic,
            Mode::Intrinsic => NoiseMode::Intrinsic,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    Ohmic,
    White,
    Tabulated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub mode: Mode,
    pub kind: NoiseKind,
    pub beta: f64,
    pub omega_c: f64,
    pub amplitude: f64,
    /// White-noise strength, `⟨ξ(t)ξ(s)⟩ = γ δ(t − s)`.
    pub gamma: f64,
    /// Two-column `ω J(ω)` table for `kind = "tabulated"`.
    pub spectral_file: Option<PathBuf>,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            mode: Mode::Intrinsic,
            kind: NoiseKind::Ohmic,
            beta: 1.0,
            omega_c: 1.0,
            amplitude: 1.0,
            gamma: 1.0,
            spectral_file: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Discretization {
    pub tau: f64,
    pub n_steps: usize,
    pub memory: usize,
}

impl Default for Discretization {
    fn default() -> Self {
        Self { tau: 0.25, n_steps: 60, memory: 4 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelSource {
    /// Linking matrices fitted by `train`.
    Trained,
    /// Kernel factors evaluated directly from the correlation table.
    Exact,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    Sweep,
    Sgd,
    Momentum,
    Adam,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SttSection {
    pub kernel: KernelSource,
    pub n_basis: usize,
    /// Interior bond dimension of every transfer train.
    pub bond: usize,
    pub batch: usize,
    pub learning_rate: f64,
    pub decay: f64,
    pub decay_every: usize,
    pub max_steps: usize,
    pub target_loss: f64,
    pub optimizer: OptimizerKind,
    pub steps_per_core: usize,
    pub momentum: f64,
    pub init_sigma: f64,
    pub eps_svd: f64,
    pub max_bond: Option<usize>,
    /// Tolerance for rounding trained kernel factors over eigentable entries.
    pub kernel_eps: f64,
    /// Largest dense slot dimension accepted for exact kernel factors.
    pub exact_budget: usize,
}

impl Default for SttSection {
    fn default() -> Self {
        let t = TrainingConfig::default();
        Self {
            kernel: KernelSource::Trained,
            n_basis: 10,
            bond: t.bond,
            batch: t.batch,
            learning_rate: t.learning_rate,
            decay: t.decay,
            decay_every: t.decay_every,
            max_steps: t.max_steps,
            target_loss: t.target_loss,
            optimizer: OptimizerKind::Sweep,
            steps_per_core: 20,
            momentum: 0.9,
            init_sigma: t.init_sigma,
            eps_svd: 1e-8,
            max_bond: None,
            kernel_eps: 1e-6,
            exact_budget: 1_000_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub directory: PathBuf,
    /// Observable names; empty selects the model defaults.
    pub observables: Vec<String>,
    pub seed: u64,
    /// Divide the state by its trace after every step.
    pub renormalize: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { directory: PathBuf::from("out"), observables: Vec::new(), seed: 7, renormalize: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSection {
    /// Steps of the brute-force path sum.
    pub path_steps: usize,
    pub monte_carlo: bool,
    pub n_traj: usize,
    /// Integrator substeps per `tau`.
    pub substeps: usize,
    /// Defaults to `n_steps * tau`.
    pub t_max: Option<f64>,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self { path_steps: 4, monte_carlo: true, n_traj: 10_000, substeps: 10, t_max: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkSection {
    pub dims: Vec<usize>,
    pub n_steps: usize,
}

impl Default for BenchmarkSection {
    fn default() -> Self {
        Self { dims: vec![2, 4, 8, 16], n_steps: 20 }
    }
}

/// Everything that determines the trained linking matrices.
#[derive(Serialize)]
struct TrainingKey<'a> {
    system: &'a SystemSection,
    noise: &'a NoiseSection,
    tau: f64,
    memory: usize,
    stt: (usize, usize, usize, f64, f64, usize, usize, f64, OptimizerKind, usize, f64, f64),
    seed: u64,
    files: Vec<String>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config; relative file references are resolved against its
    /// directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(dir) = path.parent() {
            cfg.resolve_paths(dir);
        }
        Ok(cfg)
    }

    fn resolve_paths(&mut self, dir: &Path) {
        for p in [
            &mut self.system.h0_file,
            &mut self.system.v_file,
            &mut self.system.rho0_file,
            &mut self.noise.spectral_file,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        let s = &self.system;
        match s.model {
            ModelKind::SpinBoson if s.d != 2 => return bad(format!("spin-boson model has d = 2, got {}", s.d)),
            ModelKind::Chain if s.d < 2 => return bad("chain needs at least two sites".into()),
            ModelKind::Chain if s.initial_site >= s.d => return bad(format!("initial_site {} outside the chain", s.initial_site)),
            ModelKind::Custom if s.h0_file.is_none() || s.v_file.is_none() => {
                return bad("custom model needs h0_file and v_file".into())
            }
            _ => {}
        }
        if s.model != ModelKind::Custom && s.rho0_file.is_some() {
            return bad("rho0_file is only read for the custom model".into());
        }
        for (name, v) in [("omega", s.omega), ("epsilon", s.epsilon), ("alpha", s.alpha)] {
            if !v.is_finite() {
                return bad(format!("system.{name} must be finite"));
            }
        }
        let n = &self.noise;
        if !(n.beta > 0.0) || !n.beta.is_finite() {
            return bad(format!("noise.beta must be positive, got {}", n.beta));
        }
        match n.kind {
            NoiseKind::Ohmic if !(n.omega_c > 0.0) => return bad("noise.omega_c must be positive".into()),
            NoiseKind::Ohmic if !(n.amplitude >= 0.0) => return bad("noise.amplitude must be non-negative".into()),
            NoiseKind::White if !(n.gamma >= 0.0) => return bad("noise.gamma must be non-negative".into()),
            NoiseKind::White if n.mode == Mode::Intrinsic => {
                return bad("white noise is only defined for extrinsic mode".into())
            }
            NoiseKind::Tabulated if n.spectral_file.is_none() => return bad("tabulated noise needs spectral_file".into()),
            _ => {}
        }
        let dz = &self.discretization;
        if !(dz.tau > 0.0) || !dz.tau.is_finite() {
            return bad(format!("discretization.tau must be positive, got {}", dz.tau));
        }
        if dz.n_steps == 0 {
            return bad("discretization.n_steps must be positive".into());
        }
        let t = &self.stt;
        if t.n_basis == 0 || t.bond == 0 || t.batch == 0 {
            return bad("stt.n_basis, stt.bond and stt.batch must be positive".into());
        }
        if !(t.eps_svd > 0.0 && t.eps_svd < 1.0) {
            return bad(format!("stt.eps_svd must lie in (0, 1), got {}", t.eps_svd));
        }
        if !(t.kernel_eps > 0.0 && t.kernel_eps < 1.0) {
            return bad(format!("stt.kernel_eps must lie in (0, 1), got {}", t.kernel_eps));
        }
        if !(t.learning_rate > 0.0) || !(t.target_loss >= 0.0) {
            return bad("stt.learning_rate must be positive and stt.target_loss non-negative".into());
        }
        if t.optimizer == OptimizerKind::Sweep && t.steps_per_core == 0 {
            return bad("stt.steps_per_core must be positive".into());
        }
        if t.max_bond == Some(0) {
            return bad("stt.max_bond must be positive".into());
        }
        let o = &self.oracle;
        if o.substeps == 0 || o.n_traj == 0 {
            return bad("oracle.substeps and oracle.n_traj must be positive".into());
        }
        if let Some(tm) = o.t_max {
            if !(tm > 0.0) {
                return bad("oracle.t_max must be positive".into());
            }
        }
        if self.benchmark.dims.iter().any(|&d| d < 2 || !d.is_power_of_two() || d > 32) {
            return bad("benchmark.dims must be powers of two between 2 and 32".into());
        }
        Ok(())
    }

    pub fn model(&self) -> Result<Model, CliError> {
        let s = &self.system;
        match s.model {
            ModelKind::SpinBoson => Ok(Model::spin_boson(s.omega, s.epsilon, s.alpha)),
            ModelKind::Chain => Ok(Model::chain(s.d, s.epsilon, s.omega, s.alpha, s.initial_site)),
            ModelKind::Custom => {
                let h0 = read_matrix(s.h0_file.as_deref().expect("validated"))?;
                let v = read_matrix(s.v_file.as_deref().expect("validated"))?;
                let rho0 = match &s.rho0_file {
                    Some(p) => Some(read_matrix(p)?),
                    None => None,
                };
                Model::custom(h0, v, rho0)
            }
        }
    }

    pub fn hilbert_system(&self) -> Result<HilbertSystem, CliError> {
        Ok(self.model()?.system)
    }

    pub fn noise_mode(&self) -> NoiseMode {
        self.noise.mode.into()
    }

    pub fn correlation_spec(&self) -> Result<CorrelationSpec, CliError> {
        let n = &self.noise;
        let source = match n.kind {
            NoiseKind::Ohmic => CorrelationSource::Spectral(SpectralDensity::ohmic_scaled(n.omega_c, n.amplitude)?),
            NoiseKind::White => CorrelationSource::White { gamma: n.gamma },
            NoiseKind::Tabulated => {
                let (w, j) = read_spectral_density(n.spectral_file.as_deref().expect("validated"))?;
                CorrelationSource::Spectral(SpectralDensity::tabulated(w, j)?)
            }
        };
        Ok(CorrelationSpec::new(n.mode.into(), n.beta, source)?)
    }

    pub fn training_config(&self) -> TrainingConfig {
        let t = &self.stt;
        let optimizer = match t.optimizer {
            OptimizerKind::Sweep => Optimizer::Sweep { steps_per_core: t.steps_per_core },
            OptimizerKind::Sgd => Optimizer::Sgd,
            OptimizerKind::Momentum => Optimizer::Momentum { beta: t.momentum },
            OptimizerKind::Adam => Optimizer::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 },
        };
        TrainingConfig {
            batch: t.batch,
            learning_rate: t.learning_rate,
            decay: t.decay,
            decay_every: t.decay_every,
            max_steps: t.max_steps,
            target_loss: t.target_loss,
            seed: self.output.seed,
            optimizer,
            init_sigma: t.init_sigma,
            bond: t.bond,
            ..TrainingConfig::default()
        }
    }

    pub fn svd_policy(&self) -> Result<SvdPolicy, CliError> {
        let p = SvdPolicy::new(self.stt.eps_svd)?;
        Ok(match self.stt.max_bond {
            Some(b) => p.with_max_bond(b),
            None => p,
        })
    }

    /// Initial density matrix for the configured model.
    pub fn initial_state(&self) -> Result<CMat, CliError> {
        Ok(self.model()?.rho0)
    }

    /// SHA-256 over everything the trained linking matrices depend on,
    /// including the contents of referenced input files.
    pub fn training_hash(&self) -> Result<[u8; 32], CliError> {
        let t = &self.stt;
        let mut files = Vec::new();
        for p in [&self.system.h0_file, &self.system.v_file, &self.noise.spectral_file].into_iter().flatten() {
            let bytes = fs::read(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            files.push(hex(&Sha256::digest(&bytes)));
        }
        let mut system = self.system.clone();
        let mut noise = self.noise.clone();
        // paths do not matter, contents do
        system.h0_file = None;
        system.v_file = None;
        system.rho0_file = None;
        system.initial_site = 0;
        noise.spectral_file = None;
        let key = TrainingKey {
            system: &system,
            noise: &noise,
            tau: self.discretization.tau,
            memory: self.discretization.memory,
            stt: (
                t.n_basis,
                t.bond,
                t.batch,
                t.learning_rate,
                t.decay,
                t.decay_every,
                t.max_steps,
                t.target_loss,
                t.optimizer,
                t.steps_per_core,
                t.momentum,
                t.init_sigma,
            ),
            seed: self.output.seed,
            files,
        };
        let text = toml::to_string(&key).expect("key is serializable");
        Ok(Sha256::digest(text.as_bytes()).into())
    }

    /// SHA-256 of the resolved configuration.
    /// SHA-256 of the resolved config, ignoring where outputs are written.
    pub fn config_hash(&self) -> String {
        let mut c = self.clone();
        c.output.directory = PathBuf::new();
        hex(&Sha256::digest(c.to_toml().as_bytes()))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
