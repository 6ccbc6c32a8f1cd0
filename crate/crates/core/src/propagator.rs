//! Fugacities, the relaxation operator and density-matrix propagation.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{c, devectorize, expm, hermitian_deviation, vectorize, CMat, C64};
use crate::liouville::{free_propagator, tensorize_propagator, LiouvilleSystem};
use crate::stt::KernelFactors;
use crate::tt::{contract_trailing, mpo_add, mpo_from_dense, recompress, tensor_append, zip_up, SvdPolicy, TensorTrain};

/// `Z_n = Σ_e 𝒢0(e) ⊗ K_n(e)` as an MPO over the system sites followed by one
/// site per kernel slot. Terms are summed in eigentable order and
/// recompressed after every addition.
pub fn build_fugacity(terms: &[TensorTrain], kernel: &KernelFactors, n: usize, policy: &SvdPolicy) -> Result<TensorTrain> {
    if terms.len() != kernel.entries() {
        return Err(Error::Shape(format!(
            "{} propagator terms but kernel covers {} entries",
            terms.len(),
            kernel.entries()
        )));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("slices are numbered from one".into()));
    }
    let sum_policy = SvdPolicy { eps: policy.eps, max_bond: None };
    let mut acc: Option<TensorTrain> = None;
    for (e, term) in terms.iter().enumerate() {
        let mut t = term.clone();
        for slot in 0..kernel.slots() {
            t = tensor_append(&t, kernel.slot_factor(slot, n, e));
        }
        acc = Some(match acc {
            None => recompress(&t, &sum_policy),
            Some(a) => recompress(&mpo_add(&a, &t)?, &sum_policy),
        });
    }
    let z = acc.ok_or_else(|| Error::Shape("empty eigentable".into()))?;
    check_bonds(&z, policy)?;
    Ok(z)
}

fn check_bonds(tt: &TensorTrain, policy: &SvdPolicy) -> Result<()> {
    if let Some(limit) = policy.max_bond {
        let found = tt.max_bond();
        if found > limit {
            return Err(Error::BondLimit { found, limit, bonds: tt.bond_dims() });
        }
    }
    Ok(())
}

/// Row vectors closing every kernel slot after slice `k`.
pub fn slot_caps(kernel: &KernelFactors, k: usize) -> Vec<CMat> {
    (0..kernel.slots()).map(|s| kernel.cap(s, k)).collect()
}

/// `Φ_N = Z_N ⋯ Z_1` with its slots still open.
#[derive(Clone, Debug)]
pub struct Propagator {
    pub mpo: TensorTrain,
    pub n_steps: usize,
    pub tau: f64,
    pub memory: usize,
    /// `(step, max bond, bytes)` after each contraction.
    pub bond_log: Vec<(usize, usize, usize)>,
    caps: Vec<CMat>,
}

impl Propagator {
    /// Dense `d²×d²` operator with the kernel slots closed.
    pub fn to_dense(&self) -> Result<CMat> {
        Ok(contract_trailing(&self.mpo, &self.caps)?.to_dense_matrix())
    }
}

/// Left-to-right zip-up of `Z_N ⋯ Z_1`, recompressed after every factor;
/// `fugacities[k]` is `Z_{k+1}`.
pub fn build_propagator(
    fugacities: &[TensorTrain],
    kernel: &KernelFactors,
    tau: f64,
    policy: &SvdPolicy,
) -> Result<Propagator> {
    let first = fugacities.first().ok_or_else(|| Error::InvalidParameter("no fugacities".into()))?;
    let mut phi = first.clone();
    let mut bond_log = vec![(1, phi.max_bond(), phi.bytes())];
    for (k, z) in fugacities.iter().enumerate().skip(1) {
        phi = recompress(&zip_up(z, &phi, policy)?, policy);
        check_bonds(&phi, policy)?;
        bond_log.push((k + 1, phi.max_bond(), phi.bytes()));
    }
    let n_steps = fugacities.len();
    // Φ consumes unit slot inputs, so close its outputs only.
    Ok(Propagator {
        mpo: phi,
        n_steps,
        tau,
        memory: kernel.memory,
        bond_log,
        caps: slot_caps(kernel, n_steps),
    })
}

/// Expectation values and diagnostics on `t_k = kτ`, `k = 0..=N`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ObservableSeries {
    pub names: Vec<String>,
    pub times: Vec<f64>,
    /// `values[k][i]` is observable `i` at `times[k]`.
    pub values: Vec<Vec<f64>>,
    pub trace_dev: Vec<f64>,
    pub herm_dev: Vec<f64>,
    /// `(step, max bond, bytes)` of the propagated state and cached fugacities.
    pub bond_log: Vec<(usize, usize, usize)>,
}

impl ObservableSeries {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.names.iter().position(|n| n == name)?;
        Some(self.values.iter().map(|row| row[i]).collect())
    }
}

/// Free-propagator terms plus kernel factors for one discretization.
#[derive(Clone, Debug)]
pub struct Dynamics {
    pub tau: f64,
    pub qubits: usize,
    pub physical_dim: usize,
    pub terms: Vec<TensorTrain>,
    pub kernel: KernelFactors,
    pub policy: SvdPolicy,
}

impl Dynamics {
    pub fn new(ls: &LiouvilleSystem, tau: f64, kernel: KernelFactors, policy: SvdPolicy) -> Result<Self> {
        let fp = free_propagator(ls, tau)?;
        let terms = tensorize_propagator(&fp, policy.eps)?;
        Ok(Self { tau, qubits: ls.qubits(), physical_dim: ls.physical_dim(), terms, kernel, policy })
    }

    pub fn fugacity(&self, n: usize) -> Result<TensorTrain> {
        build_fugacity(&self.terms, &self.kernel, n, &self.policy)
    }

    /// Fugacities `Z_1..Z_N`; steady-state ones are shared by slice index
    /// modulo `M+1`.
    pub fn fugacities(&self, n_steps: usize) -> Result<Vec<TensorTrain>> {
        let mut cache = FugacityCache::default();
        (1..=n_steps).map(|n| cache.get(self, n).cloned()).collect()
    }

    pub fn propagator(&self, n_steps: usize) -> Result<Propagator> {
        build_propagator(&self.fugacities(n_steps)?, &self.kernel, self.tau, &self.policy)
    }

    /// Applies `Z_k` to the running state for `k = 1..=N` and records the
    /// observables after every step.
    pub fn propagate(&self, rho0: &CMat, n_steps: usize, observables: &[(String, CMat)], renormalize: bool) -> Result<ObservableSeries> {
        let d = 1usize << self.qubits;
        check_density_matrix(rho0, self.physical_dim)?;
        let rho = pad(rho0, d);
        let obs: Vec<(String, CMat)> = observables
            .iter()
            .map(|(n, a)| {
                if a.shape() != (self.physical_dim, self.physical_dim) {
                    return Err(Error::Shape(format!("observable {n} has shape {:?}", a.shape())));
                }
                Ok((n.clone(), pad(a, d)))
            })
            .collect::<Result<_>>()?;
        let vecr = vectorize(&rho)?;
        let col = CMat::from_column_slice(d * d, 1, vecr.as_slice());
        let sites = 2 * self.qubits;
        let mut state = mpo_from_dense(&col, &vec![2; sites], &vec![1; sites], &SvdPolicy { eps: 1e-15, max_bond: None })?;
        for _ in 0..self.kernel.slots() {
            state = tensor_append(&state, &CMat::identity(1, 1));
        }
        let mut series = ObservableSeries { names: obs.iter().map(|(n, _)| n.clone()).collect(), ..Default::default() };
        record(&mut series, 0.0, &rho, &obs, self.physical_dim);
        series.bond_log.push((0, state.max_bond(), state.bytes()));
        let mut cache = FugacityCache::default();
        for k in 1..=n_steps {
            let z = cache.get(self, k)?;
            // zip-up truncates against non-orthogonal right blocks, so its
            // bonds can exceed the true ranks; a canonical sweep trims them
            state = recompress(&zip_up(z, &state, &self.policy)?, &self.policy);
            check_bonds(&state, &self.policy)?;
            let closed = contract_trailing(&state, &slot_caps(&self.kernel, k))?;
            let v = closed.to_dense_vector();
            let mut r = devectorize(&crate::linalg::CVec::from_vec(v), d)?;
            if renormalize {
                let tr = r.trace();
                if tr.norm() > 0.0 {
                    r /= tr;
                    state.scale(C64::new(1.0, 0.0) / tr);
                }
            }
            record(&mut series, k as f64 * self.tau, &r, &obs, self.physical_dim);
            series.bond_log.push((k, state.max_bond(), state.bytes() + cache.bytes()));
        }
        Ok(series)
    }
}

#[derive(Default)]
struct FugacityCache {
    early: Vec<TensorTrain>,
    steady: Vec<Option<TensorTrain>>,
}

impl FugacityCache {
    fn get(&mut self, dynamics: &Dynamics, n: usize) -> Result<&TensorTrain> {
        let period = dynamics.kernel.memory + 1;
        if n < period {
            while self.early.len() < n {
                let z = dynamics.fugacity(self.early.len() + 1)?;
                self.early.push(z);
            }
            return Ok(&self.early[n - 1]);
        }
        if self.steady.is_empty() {
            self.steady = vec![None; period];
        }
        let slot = n % period;
        if self.steady[slot].is_none() {
            self.steady[slot] = Some(dynamics.fugacity(n)?);
        }
        Ok(self.steady[slot].as_ref().expect("filled above"))
    }

    fn bytes(&self) -> usize {
        self.early.iter().chain(self.steady.iter().flatten()).map(TensorTrain::bytes).sum()
    }
}

fn pad(m: &CMat, d: usize) -> CMat {
    let mut out = CMat::zeros(d, d);
    out.view_mut((0, 0), m.shape()).copy_from(m);
    out
}

fn record(series: &mut ObservableSeries, t: f64, rho: &CMat, obs: &[(String, CMat)], phys: usize) {
    let block = rho.view((0, 0), (phys, phys)).into_owned();
    series.times.push(t);
    series.values.push(obs.iter().map(|(_, a)| (a * rho).trace().re).collect());
    series.trace_dev.push((block.trace() - c(1.0, 0.0)).norm());
    series.herm_dev.push(hermitian_deviation(rho));
}

/// Checks Hermiticity, unit trace and positivity within `1e-10`.
pub fn check_density_matrix(rho: &CMat, dim: usize) -> Result<()> {
    if rho.shape() != (dim, dim) {
        return Err(Error::NotDensityMatrix(format!("expected {dim}x{dim}, got {:?}", rho.shape())));
    }
    let herm = hermitian_deviation(rho);
    if herm > 1e-10 {
        return Err(Error::NotDensityMatrix(format!("not Hermitian (deviation {herm:e})")));
    }
    let tr = rho.trace();
    if (tr - c(1.0, 0.0)).norm() > 1e-10 {
        return Err(Error::NotDensityMatrix(format!("trace {tr} differs from one")));
    }
    let h = (rho + rho.adjoint()) * c(0.5, 0.0);
    let min = h.symmetric_eigen().eigenvalues.iter().fold(f64::INFINITY, |m, &x| m.min(x));
    if min < -1e-10 {
        return Err(Error::NotDensityMatrix(format!("negative eigenvalue {min:e}")));
    }
    Ok(())
}

/// `exp(−itL0 − tγ L1²/2)` for the first noise channel.
pub fn markov_propagator(ls: &LiouvilleSystem, gamma: f64, t: f64) -> Result<CMat> {
    if !(gamma >= 0.0) {
        return Err(Error::InvalidParameter(format!("γ must be non-negative, got {gamma}")));
    }
    let l1 = ls.channel_superop(0);
    let gen = ls.l0() * c(0.0, -t) - (l1 * l1) * c(0.5 * t * gamma, 0.0);
    Ok(expm(&gen))
}
