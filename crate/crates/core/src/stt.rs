//! Spectral tensor trains for the influence kernel.
//!
//! The kernel factorizes into transfer functions
//! `T_n = exp(−Σ_δ w_nᵀ G̃_δ w_{n−δ})`, one per time slice, where `w_n` holds the
//! channel frequencies of slice `n`. Each `T_j` (`j = 1..=M+1`) is fitted by a
//! tensor train whose cores are Chebyshev series in one frequency variable.
//! Variables are ordered slice-major (newest slice first) and channel-minor.
//!
//! [`KernelFactors`] turns a set of transfer trains into per-slice matrices
//! that the propagator appends to free-propagator terms. Wire `m` carries
//! `T_m` across slices `max(1, m−M)..=m` and lives on slot `m mod (M+1)`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};
use crate::liouville::LiouvilleSystem;
use crate::noise::CorrelationMatrix;
use crate::tt::{recompress, tt_svd, Core, SvdPolicy, TensorTrain};

/// Chebyshev polynomials of the first kind on a frequency interval.
#[derive(Clone, Debug, PartialEq)]
pub struct ChebyshevBasis {
    pub n_basis: usize,
    pub lo: f64,
    pub hi: f64,
}

impl ChebyshevBasis {
    /// A degenerate interval is widened by one unit on each side.
    pub fn new(n_basis: usize, lo: f64, hi: f64) -> Result<Self> {
        if n_basis == 0 {
            return Err(Error::InvalidParameter("basis size must be positive".into()));
        }
        if !(lo.is_finite() && hi.is_finite()) || hi < lo {
            return Err(Error::InvalidParameter(format!("invalid frequency interval [{lo}, {hi}]")));
        }
        let (lo, hi) = if hi - lo < 1e-12 { (lo - 1.0, hi + 1.0) } else { (lo, hi) };
        Ok(Self { n_basis, lo, hi })
    }

    pub fn to_unit(&self, w: f64) -> f64 {
        (2.0 * w - (self.hi + self.lo)) / (self.hi - self.lo)
    }

    pub fn to_freq(&self, x: f64) -> f64 {
        0.5 * (x * (self.hi - self.lo) + self.hi + self.lo)
    }

    /// Chebyshev zeros on `[-1, 1]`.
    pub fn nodes(&self) -> Vec<f64> {
        let n = self.n_basis as f64;
        (0..self.n_basis).map(|i| (PI * (i as f64 + 0.5) / n).cos()).collect()
    }

    pub fn node_freqs(&self) -> Vec<f64> {
        self.nodes().into_iter().map(|x| self.to_freq(x)).collect()
    }

    /// `ψ_0(x), …, ψ_{n−1}(x)` by the three-term recurrence.
    pub fn eval(&self, x: f64) -> Vec<f64> {
        chebyshev_values(self.n_basis, x)
    }
}

/// `exp(−Σ_δ w_0ᵀ G̃_δ w_δ)` with `slices[δ]` the channel frequencies of the
/// slice `δ` steps in the past.
pub fn transfer_exact(table: &[CMat], slices: &[&[f64]]) -> C64 {
    let mut expo = C64::new(0.0, 0.0);
    let w0 = slices[0];
    for (d, wd) in slices.iter().enumerate().take(table.len()) {
        let g = &table[d];
        for a in 0..g.nrows() {
            for b in 0..g.ncols() {
                expo += g[(a, b)] * (w0[a] * wd[b]);
            }
        }
    }
    (-expo).exp()
}

/// A tensor train whose cores are Chebyshev series: the core of variable `v`
/// at `x` is `Σ_k A_v^{(k)} ψ_k(x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransferTrain {
    pub n_basis: usize,
    /// `bonds[v]` is the left bond of variable `v`; `bonds[n_vars]` is one.
    pub bonds: Vec<usize>,
    /// `coeffs[v]` is row-major `[k][l][r]`.
    pub coeffs: Vec<Vec<C64>>,
}

impl TransferTrain {
    pub fn zeros(n_basis: usize, n_vars: usize, bond: usize) -> Self {
        let mut bonds = vec![bond.max(1); n_vars + 1];
        bonds[0] = 1;
        bonds[n_vars] = 1;
        let coeffs = (0..n_vars).map(|v| vec![C64::new(0.0, 0.0); n_basis * bonds[v] * bonds[v + 1]]).collect();
        Self { n_basis, bonds, coeffs }
    }

    /// Constant-one train: `A^{(0)}` carries ones on the diagonal.
    pub fn constant_one(n_basis: usize, n_vars: usize, bond: usize) -> Self {
        let mut t = Self::zeros(n_basis, n_vars, bond);
        for v in 0..n_vars {
            let (l, r) = (t.bonds[v], t.bonds[v + 1]);
            for i in 0..l.min(r) {
                t.coeffs[v][i * r + i] = C64::new(1.0, 0.0);
            }
        }
        t
    }

    /// Constant-one train plus complex Gaussian noise of width `sigma` on
    /// every coefficient.
    pub fn initialized(n_basis: usize, n_vars: usize, bond: usize, sigma: f64, rng: &mut ChaCha8Rng) -> Self {
        let mut t = Self::constant_one(n_basis, n_vars, bond);
        if sigma > 0.0 {
            let normal = Normal::new(0.0, sigma).expect("finite sigma");
            for core in t.coeffs.iter_mut() {
                for z in core.iter_mut() {
                    *z += C64::new(normal.sample(rng), normal.sample(rng));
                }
            }
        }
        t
    }

    pub fn n_vars(&self) -> usize {
        self.coeffs.len()
    }

    pub fn parameter_count(&self) -> usize {
        self.coeffs.iter().map(Vec::len).sum()
    }

    /// Core matrix `Σ_k A_v^{(k)} ψ_k` for precomputed basis values.
    pub fn core_from_basis(&self, v: usize, psi: &[f64]) -> Vec<C64> {
        let (l, r) = (self.bonds[v], self.bonds[v + 1]);
        let size = l * r;
        let mut out = vec![C64::new(0.0, 0.0); size];
        let stack = &self.coeffs[v];
        for (k, &p) in psi.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(&stack[k * size..(k + 1) * size]) {
                *o += a * p;
            }
        }
        out
    }

    pub fn core_matrix(&self, v: usize, basis: &ChebyshevBasis, x: f64) -> CMat {
        let data = self.core_from_basis(v, &basis.eval(x));
        CMat::from_row_slice(self.bonds[v], self.bonds[v + 1], &data)
    }

    /// Value at unit-interval coordinates `xs` (one per variable).
    pub fn evaluate(&self, xs: &[f64]) -> C64 {
        let mut left = vec![C64::new(1.0, 0.0)];
        for (v, &x) in xs.iter().enumerate() {
            let psi = chebyshev_values(self.n_basis, x);
            let core = self.core_from_basis(v, &psi);
            left = row_times(&left, &core, self.bonds[v + 1]);
        }
        left[0]
    }
}

fn chebyshev_values(n: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; n];
    out[0] = 1.0;
    if n > 1 {
        out[1] = x;
    }
    for k in 2..n {
        out[k] = 2.0 * x * out[k - 1] - out[k - 2];
    }
    out
}

#[inline]
fn row_times(row: &[C64], m: &[C64], cols: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); cols];
    for (l, &a) in row.iter().enumerate() {
        if a == C64::new(0.0, 0.0) {
            continue;
        }
        for (o, b) in out.iter_mut().zip(&m[l * cols..(l + 1) * cols]) {
            *o += a * b;
        }
    }
    out
}

#[inline]
fn times_col(m: &[C64], rows: usize, col: &[C64]) -> Vec<C64> {
    let cols = col.len();
    (0..rows)
        .map(|l| m[l * cols..(l + 1) * cols].iter().zip(col).map(|(a, b)| a * b).sum())
        .collect()
}

/// Exact `T_j` on the tensor grid of Chebyshev nodes.
#[derive(Clone, Debug)]
pub struct TransferTarget {
    pub slices: usize,
    pub channels: usize,
    table: Vec<CMat>,
    node_freqs: Vec<Vec<f64>>,
}

impl TransferTarget {
    pub fn new(g: &CorrelationMatrix, slices: usize, bases: &[ChebyshevBasis]) -> Result<Self> {
        if slices == 0 || slices > g.memory + 1 {
            return Err(Error::InvalidParameter(format!(
                "transfer function index {slices} outside 1..={}",
                g.memory + 1
            )));
        }
        if bases.len() != g.channels {
            return Err(Error::Shape(format!("{} bases for {} channels", bases.len(), g.channels)));
        }
        Ok(Self {
            slices,
            channels: g.channels,
            table: g.table()[..slices].to_vec(),
            node_freqs: bases.iter().map(ChebyshevBasis::node_freqs).collect(),
        })
    }

    pub fn n_vars(&self) -> usize {
        self.slices * self.channels
    }

    /// Value at a grid point given by node indices per variable.
    pub fn at_nodes(&self, idx: &[usize]) -> C64 {
        let c = self.channels;
        let w: Vec<Vec<f64>> = (0..self.slices)
            .map(|p| (0..c).map(|ch| self.node_freqs[ch][idx[p * c + ch]]).collect())
            .collect();
        let refs: Vec<&[f64]> = w.iter().map(Vec::as_slice).collect();
        transfer_exact(&self.table, &refs)
    }

    pub fn is_constant_one(&self) -> bool {
        self.table.iter().all(|g| g.iter().all(|z| z.norm() == 0.0))
    }
}

/// Grid points drawn i.i.d. from the product Gauss–Chebyshev measure over the
/// node grid. The quadrature weights of the Chebyshev zeros are uniform, so
/// each coordinate is a uniform draw over the nodes.
pub fn sample_training_points(n_basis: usize, n_vars: usize, batch: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    (0..batch).map(|_| (0..n_vars).map(|_| rng.random_range(0..n_basis)).collect()).collect()
}

/// Every grid point, first variable most significant.
pub fn full_grid(n_basis: usize, n_vars: usize) -> Vec<Vec<usize>> {
    let total = n_basis.pow(n_vars as u32);
    (0..total)
        .map(|mut flat| {
            let mut idx = vec![0; n_vars];
            for v in (0..n_vars).rev() {
                idx[v] = flat % n_basis;
                flat /= n_basis;
            }
            idx
        })
        .collect()
}

/// Core matrices of every variable at every node, refreshed once per step.
struct NodeCache {
    mats: Vec<Vec<Vec<C64>>>,
}

impl NodeCache {
    fn new(train: &TransferTrain, psi: &[Vec<f64>]) -> Self {
        let mats = (0..train.n_vars())
            .map(|v| psi.iter().map(|p| train.core_from_basis(v, p)).collect())
            .collect();
        Self { mats }
    }
}

fn node_psi(n_basis: usize) -> Vec<Vec<f64>> {
    let basis = ChebyshevBasis { n_basis, lo: -1.0, hi: 1.0 };
    basis.nodes().into_iter().map(|x| basis.eval(x)).collect()
}

/// Mean squared modulus of the residual over `points`.
pub fn loss(train: &TransferTrain, target: &TransferTarget, points: &[Vec<usize>]) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::InvalidParameter("loss needs at least one sample".into()));
    }
    let cache = NodeCache::new(train, &node_psi(train.n_basis));
    let total: f64 = points.iter().map(|idx| (forward(train, &cache, idx) - target.at_nodes(idx)).norm_sqr()).sum();
    Ok(total / points.len() as f64)
}

fn forward(train: &TransferTrain, cache: &NodeCache, idx: &[usize]) -> C64 {
    let mut left = vec![C64::new(1.0, 0.0)];
    for (v, &i) in idx.iter().enumerate() {
        left = row_times(&left, &cache.mats[v][i], train.bonds[v + 1]);
    }
    left[0]
}

/// Loss and its gradient. For each coefficient `a = x + iy` the returned
/// complex number is `∂Λ/∂x + i ∂Λ/∂y`.
pub fn loss_and_gradient(
    train: &TransferTrain,
    target_values: &[C64],
    points: &[Vec<usize>],
) -> (f64, Vec<Vec<C64>>) {
    let psi = node_psi(train.n_basis);
    let cache = NodeCache::new(train, &psi);
    let nv = train.n_vars();
    let nb = train.n_basis;
    // gradient with respect to each node matrix
    let mut node_grad: Vec<Vec<Vec<C64>>> = (0..nv)
        .map(|v| vec![vec![C64::new(0.0, 0.0); train.bonds[v] * train.bonds[v + 1]]; nb])
        .collect();
    let mut total = 0.0;
    let mut lefts: Vec<Vec<C64>> = Vec::with_capacity(nv + 1);
    for (idx, &target) in points.iter().zip(target_values) {
        lefts.clear();
        lefts.push(vec![C64::new(1.0, 0.0)]);
        for (v, &i) in idx.iter().enumerate() {
            let next = row_times(&lefts[v], &cache.mats[v][i], train.bonds[v + 1]);
            lefts.push(next);
        }
        let res = lefts[nv][0] - target;
        total += res.norm_sqr();
        let mut right = vec![C64::new(1.0, 0.0)];
        for v in (0..nv).rev() {
            let (l, r) = (train.bonds[v], train.bonds[v + 1]);
            let g = &mut node_grad[v][idx[v]];
            for a in 0..l {
                let la = (res * lefts[v][a].conj()) as C64;
                if la == C64::new(0.0, 0.0) {
                    continue;
                }
                for b in 0..r {
                    g[a * r + b] += la * right[b].conj();
                }
            }
            right = times_col(&cache.mats[v][idx[v]], l, &right);
        }
    }
    let scale = 2.0 / points.len() as f64;
    let grads = (0..nv)
        .map(|v| {
            let size = train.bonds[v] * train.bonds[v + 1];
            let mut out = vec![C64::new(0.0, 0.0); nb * size];
            for (i, p) in psi.iter().enumerate() {
                let g = &node_grad[v][i];
                for k in 0..nb {
                    let w = p[k] * scale;
                    for (o, x) in out[k * size..(k + 1) * size].iter_mut().zip(g) {
                        *o += x * w;
                    }
                }
            }
            out
        })
        .collect();
    (total / points.len() as f64, grads)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Optimizer {
    /// Plain gradient steps, learning rate multiplied by `decay` every
    /// `decay_every` steps.
    Sgd,
    Momentum { beta: f64 },
    Adam { beta1: f64, beta2: f64, eps: f64 },
    /// Gauge-fixed sweeps: the other cores are kept orthonormal with respect
    /// to the node measure and only the centre core takes gradient steps,
    /// scaled by the inverse of its expected curvature. The centre moves
    /// after `steps_per_core` steps.
    Sweep { steps_per_core: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingConfig {
    pub batch: usize,
    pub learning_rate: f64,
    pub decay: f64,
    pub decay_every: usize,
    pub max_steps: usize,
    pub target_loss: f64,
    pub seed: u64,
    pub optimizer: Optimizer,
    pub init_sigma: f64,
    pub bond: usize,
    /// Monitor points; the full grid is used when it is no larger.
    pub monitor_size: usize,
    pub check_every: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            batch: 256,
            learning_rate: 0.5,
            decay: 0.5,
            decay_every: 0,
            max_steps: 20000,
            target_loss: 1e-12,
            seed: 7,
            optimizer: Optimizer::Sweep { steps_per_core: 20 },
            init_sigma: 1e-2,
            bond: 10,
            monitor_size: 4096,
            check_every: 25,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingCurve {
    /// `(step, mini-batch loss)`.
    pub points: Vec<(usize, f64)>,
    pub final_loss: f64,
    pub steps: usize,
}

/// Fits `target` by gradient descent on the Chebyshev coefficients.
pub fn train(target: &TransferTarget, n_basis: usize, cfg: &TrainingConfig) -> Result<(TransferTrain, TrainingCurve)> {
    if cfg.batch == 0 || cfg.check_every == 0 {
        return Err(Error::InvalidParameter("batch and check interval must be positive".into()));
    }
    let nv = target.n_vars();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (target.slices as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    if target.is_constant_one() {
        let t = TransferTrain::constant_one(n_basis, nv, cfg.bond);
        return Ok((t, TrainingCurve { points: vec![(0, 0.0)], final_loss: 0.0, steps: 0 }));
    }
    let mut model = TransferTrain::initialized(n_basis, nv, cfg.bond, cfg.init_sigma, &mut rng);
    let grid = (n_basis as f64).powi(nv as i32);
    let monitor: Vec<Vec<usize>> = if grid <= cfg.monitor_size as f64 {
        full_grid(n_basis, nv)
    } else {
        sample_training_points(n_basis, nv, cfg.monitor_size, &mut rng)
    };
    let monitor_targets: Vec<C64> = monitor.iter().map(|p| target.at_nodes(p)).collect();
    let full_batch = grid <= cfg.batch as f64;
    if let Optimizer::Sweep { steps_per_core } = cfg.optimizer {
        let run = SweepRun { target, cfg, steps_per_core: steps_per_core.max(1), full_batch };
        return run.train(model, &monitor, &monitor_targets, &mut rng);
    }

    let mut m1: Vec<Vec<C64>> = model.coeffs.iter().map(|c| vec![C64::new(0.0, 0.0); c.len()]).collect();
    let mut m2: Vec<Vec<C64>> = m1.clone();
    let mut curve = Vec::with_capacity(cfg.max_steps.min(100_000));
    let mut lr = cfg.learning_rate;
    let mut final_loss = f64::INFINITY;
    let mut steps = 0;
    for step in 0..cfg.max_steps {
        if step > 0 && cfg.decay_every > 0 && step % cfg.decay_every == 0 {
            lr *= cfg.decay;
        }
        let (batch, targets) = if full_batch {
            (monitor.clone(), monitor_targets.clone())
        } else {
            let b = sample_training_points(n_basis, nv, cfg.batch, &mut rng);
            let t = b.iter().map(|p| target.at_nodes(p)).collect();
            (b, t)
        };
        let (l, grads) = loss_and_gradient(&model, &targets, &batch);
        if !l.is_finite() {
            return Err(Error::Diverged { step, loss: l });
        }
        curve.push((step, l));
        steps = step + 1;
        apply_update(&mut model, &grads, &mut m1, &mut m2, cfg.optimizer, lr, step + 1);
        if (step + 1) % cfg.check_every == 0 || step + 1 == cfg.max_steps {
            let ml = monitor_loss(&model, &monitor_targets, &monitor);
            if !ml.is_finite() {
                return Err(Error::Diverged { step, loss: ml });
            }
            final_loss = ml;
            if ml <= cfg.target_loss {
                break;
            }
        }
    }
    if !final_loss.is_finite() {
        final_loss = monitor_loss(&model, &monitor_targets, &monitor);
    }
    Ok((model, TrainingCurve { points: curve, final_loss, steps }))
}

struct SweepRun<'a> {
    target: &'a TransferTarget,
    cfg: &'a TrainingConfig,
    steps_per_core: usize,
    full_batch: bool,
}

/// Core values at the Chebyshev nodes, `nodes[v][i]` row-major `bonds[v] × bonds[v+1]`.
struct NodeTrain {
    n: usize,
    bonds: Vec<usize>,
    nodes: Vec<Vec<Vec<C64>>>,
}

impl NodeTrain {
    fn from_train(t: &TransferTrain) -> Self {
        let cache = NodeCache::new(t, &node_psi(t.n_basis));
        Self { n: t.n_basis, bonds: t.bonds.clone(), nodes: cache.mats }
    }

    /// Discrete Chebyshev transform back to coefficient stacks.
    fn to_train(&self) -> TransferTrain {
        let psi = node_psi(self.n);
        let nv = self.nodes.len();
        let coeffs = (0..nv)
            .map(|v| {
                let size = self.bonds[v] * self.bonds[v + 1];
                let mut out = vec![C64::new(0.0, 0.0); self.n * size];
                for k in 0..self.n {
                    let ck = if k == 0 { 1.0 } else { 2.0 } / self.n as f64;
                    for i in 0..self.n {
                        let w = psi[i][k] * ck;
                        for (o, y) in out[k * size..(k + 1) * size].iter_mut().zip(&self.nodes[v][i]) {
                            *o += y * w;
                        }
                    }
                }
                out
            })
            .collect();
        TransferTrain { n_basis: self.n, bonds: self.bonds.clone(), coeffs }
    }

    fn value(&self, idx: &[usize]) -> C64 {
        let mut left = vec![C64::new(1.0, 0.0)];
        for (v, &i) in idx.iter().enumerate() {
            left = row_times(&left, &self.nodes[v][i], self.bonds[v + 1]);
        }
        left[0]
    }

    /// Makes core `v` left-orthonormal and pushes the remainder into `v+1`.
    fn left_orth(&mut self, v: usize) {
        let (n, bl, br) = (self.n, self.bonds[v], self.bonds[v + 1]);
        let scale = (n as f64).sqrt();
        let w = CMat::from_fn(bl * n, br, |row, r| {
            let (l, i) = (row / n, row % n);
            self.nodes[v][i][l * br + r] / scale
        });
        let qr = w.qr();
        let (q, rr) = (qr.q(), qr.r());
        let k = q.ncols();
        for i in 0..n {
            self.nodes[v][i] = (0..bl * k).map(|x| q[((x / k) * n + i, x % k)] * scale).collect();
        }
        let next_r = self.bonds[v + 2];
        for i in 0..n {
            let old = CMat::from_row_slice(br, next_r, &self.nodes[v + 1][i]);
            let m = &rr * old;
            self.nodes[v + 1][i] = m.transpose().as_slice().to_vec();
        }
        self.bonds[v + 1] = k;
    }

    /// Makes core `v` right-orthonormal and pushes the remainder into `v−1`.
    fn right_orth(&mut self, v: usize) {
        let (n, bl, br) = (self.n, self.bonds[v], self.bonds[v + 1]);
        let scale = (n as f64).sqrt();
        // W (bl × n·br); LQ through the QR of W†
        let wt = CMat::from_fn(n * br, bl, |col, l| {
            let (i, r) = (col / br, col % br);
            self.nodes[v][i][l * br + r].conj() / scale
        });
        let qr = wt.qr();
        let (q, rr) = (qr.q(), qr.r());
        let k = q.ncols();
        // new core rows are q† rows
        for i in 0..n {
            self.nodes[v][i] = (0..k * br).map(|x| q[(i * br + x % br, x / br)].conj() * scale).collect();
        }
        let prev_l = self.bonds[v - 1];
        let l_fac = rr.adjoint(); // bl × k
        for i in 0..n {
            let old = CMat::from_row_slice(prev_l, bl, &self.nodes[v - 1][i]);
            let m = old * &l_fac;
            self.nodes[v - 1][i] = m.transpose().as_slice().to_vec();
        }
        self.bonds[v] = k;
    }
}

impl SweepRun<'_> {
    fn train(
        &self,
        model: TransferTrain,
        monitor: &[Vec<usize>],
        monitor_targets: &[C64],
        rng: &mut ChaCha8Rng,
    ) -> Result<(TransferTrain, TrainingCurve)> {
        let cfg = self.cfg;
        let mut nt = NodeTrain::from_train(&model);
        let nv = nt.nodes.len();
        for v in (1..nv).rev() {
            nt.right_orth(v);
        }
        let n = nt.n;
        let (mut center, mut forward_dir, mut inner) = (0usize, true, 0usize);
        let mut lr = cfg.learning_rate;
        let mut curve = Vec::new();
        let mut final_loss = f64::INFINITY;
        let mut steps = 0;
        for step in 0..cfg.max_steps {
            if step > 0 && cfg.decay_every > 0 && step % cfg.decay_every == 0 {
                lr *= cfg.decay;
            }
            let (batch, targets): (Vec<Vec<usize>>, Vec<C64>) = if self.full_batch {
                (monitor.to_vec(), monitor_targets.to_vec())
            } else {
                let b = sample_training_points(n, nv, cfg.batch, rng);
                let t = b.iter().map(|p| self.target.at_nodes(p)).collect();
                (b, t)
            };
            let (bl, br) = (nt.bonds[center], nt.bonds[center + 1]);
            // per node: (left env, right env, residual) of each sample
            let mut groups: Vec<Vec<(Vec<C64>, Vec<C64>, C64)>> = vec![Vec::new(); n];
            let mut total = 0.0;
            for (idx, &t) in batch.iter().zip(&targets) {
                let mut left = vec![C64::new(1.0, 0.0)];
                for v in 0..center {
                    left = row_times(&left, &nt.nodes[v][idx[v]], nt.bonds[v + 1]);
                }
                let mut right = vec![C64::new(1.0, 0.0)];
                for v in (center + 1..nv).rev() {
                    right = times_col(&nt.nodes[v][idx[v]], nt.bonds[v], &right);
                }
                let mid = times_col(&nt.nodes[center][idx[center]], bl, &right);
                let val: C64 = left.iter().zip(&mid).map(|(a, b)| a * b).sum();
                let res = val - t;
                total += res.norm_sqr();
                groups[idx[center]].push((left, right, res));
            }
            let l = total / batch.len() as f64;
            if !l.is_finite() {
                return Err(Error::Diverged { step, loss: l });
            }
            curve.push((step, l));
            steps = step + 1;
            for (i, group) in groups.iter().enumerate() {
                if group.is_empty() {
                    continue;
                }
                let lam = gram_top_eigenvalue(group);
                if lam <= 0.0 {
                    continue;
                }
                let eta = lr / lam;
                let y = &mut nt.nodes[center][i];
                for (left, right, res) in group {
                    for a in 0..bl {
                        let la = res * left[a].conj() * eta;
                        for b in 0..br {
                            y[a * br + b] -= la * right[b].conj();
                        }
                    }
                }
            }
            inner += 1;
            if inner == self.steps_per_core && nv > 1 {
                inner = 0;
                if forward_dir {
                    if center + 1 < nv {
                        nt.left_orth(center);
                        center += 1;
                    } else {
                        forward_dir = false;
                        nt.right_orth(center);
                        center -= 1;
                    }
                } else if center > 0 {
                    nt.right_orth(center);
                    center -= 1;
                } else {
                    forward_dir = true;
                    nt.left_orth(center);
                    center += 1;
                }
            }
            if (step + 1) % cfg.check_every == 0 || step + 1 == cfg.max_steps {
                let ml = monitor
                    .iter()
                    .zip(monitor_targets)
                    .map(|(p, t)| (nt.value(p) - t).norm_sqr())
                    .sum::<f64>()
                    / monitor.len() as f64;
                if !ml.is_finite() {
                    return Err(Error::Diverged { step, loss: ml });
                }
                final_loss = ml;
                if ml <= cfg.target_loss {
                    break;
                }
            }
        }
        Ok((nt.to_train(), TrainingCurve { points: curve, final_loss, steps }))
    }
}

/// Largest eigenvalue of the sample Gram matrix
/// `K_st = (L_s · conj L_t)(R_s · conj R_t)`, the curvature bound of one
/// node block.
fn gram_top_eigenvalue(group: &[(Vec<C64>, Vec<C64>, C64)]) -> f64 {
    let k = group.len();
    let dot = |a: &[C64], b: &[C64]| -> C64 { a.iter().zip(b).map(|(x, y)| x * y.conj()).sum() };
    let mut gram = vec![C64::new(0.0, 0.0); k * k];
    for s in 0..k {
        for t in s..k {
            let v = dot(&group[s].0, &group[t].0) * dot(&group[s].1, &group[t].1);
            gram[s * k + t] = v;
            gram[t * k + s] = v.conj();
        }
    }
    let trace: f64 = (0..k).map(|s| gram[s * k + s].re).sum();
    if k == 1 {
        return trace;
    }
    let mut x = vec![C64::new(1.0, 0.0); k];
    let mut lam = 0.0;
    for _ in 0..30 {
        let y: Vec<C64> = (0..k).map(|s| (0..k).map(|t| gram[s * k + t] * x[t]).sum()).collect();
        let norm = y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let next = norm / x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        x = y.into_iter().map(|z| z / norm).collect();
        if (next - lam).abs() <= 1e-3 * next {
            lam = next;
            break;
        }
        lam = next;
    }
    // power iteration approaches from below; never step past the trace bound
    (lam * 1.05).min(trace)
}

fn monitor_loss(model: &TransferTrain, targets: &[C64], points: &[Vec<usize>]) -> f64 {
    let cache = NodeCache::new(model, &node_psi(model.n_basis));
    let total: f64 = points
        .iter()
        .zip(targets)
        .map(|(p, t)| (forward(model, &cache, p) - t).norm_sqr())
        .sum();
    total / points.len() as f64
}

fn apply_update(
    model: &mut TransferTrain,
    grads: &[Vec<C64>],
    m1: &mut [Vec<C64>],
    m2: &mut [Vec<C64>],
    opt: Optimizer,
    lr: f64,
    t: usize,
) {
    match opt {
        Optimizer::Sgd => {
            for (core, g) in model.coeffs.iter_mut().zip(grads) {
                for (a, d) in core.iter_mut().zip(g) {
                    *a -= d * lr;
                }
            }
        }
        Optimizer::Momentum { beta } => {
            for ((core, g), v) in model.coeffs.iter_mut().zip(grads).zip(m1.iter_mut()) {
                for ((a, d), vel) in core.iter_mut().zip(g).zip(v.iter_mut()) {
                    *vel = *vel * beta + d;
                    *a -= *vel * lr;
                }
            }
        }
        Optimizer::Sweep { .. } => unreachable!("sweeps use their own loop"),
        Optimizer::Adam { beta1, beta2, eps } => {
            let c1 = 1.0 - beta1.powi(t as i32);
            let c2 = 1.0 - beta2.powi(t as i32);
            for (((core, g), m), v) in model.coeffs.iter_mut().zip(grads).zip(m1.iter_mut()).zip(m2.iter_mut()) {
                for (((a, d), mm), vv) in core.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                    *mm = *mm * beta1 + d * (1.0 - beta1);
                    // second moments of the real and imaginary parts
                    *vv = C64::new(
                        vv.re * beta2 + (1.0 - beta2) * d.re * d.re,
                        vv.im * beta2 + (1.0 - beta2) * d.im * d.im,
                    );
                    let step_re = (mm.re / c1) / ((vv.re / c2).sqrt() + eps);
                    let step_im = (mm.im / c1) / ((vv.im / c2).sqrt() + eps);
                    *a -= C64::new(step_re, step_im) * lr;
                }
            }
        }
    }
}

/// Trained transfer trains `T_1..T_{M+1}` sharing per-channel bases.
#[derive(Clone, Debug, PartialEq)]
pub struct LinkingSet {
    pub memory: usize,
    pub channels: usize,
    pub bases: Vec<ChebyshevBasis>,
    pub trains: Vec<TransferTrain>,
}

impl LinkingSet {
    /// Value of `T_j` at channel frequencies, newest slice first.
    pub fn evaluate(&self, j: usize, slices: &[&[f64]]) -> C64 {
        let xs: Vec<f64> = slices
            .iter()
            .flat_map(|w| w.iter().enumerate().map(|(ch, &f)| self.bases[ch].to_unit(f)))
            .collect();
        self.trains[j - 1].evaluate(&xs)
    }
}

/// Bases spanning the exact frequency range of every channel.
pub fn channel_bases(ls: &LiouvilleSystem, n_basis: usize) -> Result<Vec<ChebyshevBasis>> {
    ls.channel_ranges().into_iter().map(|(lo, hi)| ChebyshevBasis::new(n_basis, lo, hi)).collect()
}

/// Trains every transfer function of the memory window.
pub fn train_linking_set(
    ls: &LiouvilleSystem,
    g: &CorrelationMatrix,
    n_basis: usize,
    cfg: &TrainingConfig,
) -> Result<(LinkingSet, Vec<TrainingCurve>)> {
    let bases = channel_bases(ls, n_basis)?;
    if bases.len() != g.channels {
        return Err(Error::Shape(format!(
            "system has {} noise channels, correlation matrix {}",
            bases.len(),
            g.channels
        )));
    }
    let mut trains = Vec::with_capacity(g.memory + 1);
    let mut curves = Vec::with_capacity(g.memory + 1);
    for j in 1..=g.memory + 1 {
        let target = TransferTarget::new(g, j, &bases)?;
        let (t, curve) = train(&target, n_basis, cfg)?;
        trains.push(t);
        curves.push(curve);
    }
    Ok((LinkingSet { memory: g.memory, channels: g.channels, bases, trains }, curves))
}

/// Splits a train over eigentable entries into per-entry matrices.
fn entry_factors(tt: &TensorTrain, ne: usize) -> Vec<Vec<CMat>> {
    tt.cores()
        .iter()
        .map(|core| (0..ne).map(|e| CMat::from_fn(core.left, core.right, |l, r| core.at(l, e, 0, r))).collect())
        .collect()
}

/// Per-slice kernel matrices for every transfer function, slice position and
/// eigentable entry.
#[derive(Clone, Debug)]
pub struct KernelFactors {
    pub memory: usize,
    /// `factors[j−1][p][e]`: factor of `T_j` at slice position `p` (0 is the
    /// newest slice) for entry `e`.
    factors: Vec<Vec<Vec<CMat>>>,
    neutral: usize,
}

impl KernelFactors {
    pub fn from_parts(memory: usize, factors: Vec<Vec<Vec<CMat>>>, neutral: usize) -> Result<Self> {
        if factors.len() != memory + 1 {
            return Err(Error::Shape(format!("expected {} transfer functions", memory + 1)));
        }
        for (j, f) in factors.iter().enumerate() {
            if f.len() != j + 1 {
                return Err(Error::Shape(format!("T_{} needs {} slice positions", j + 1, j + 1)));
            }
            for p in 0..=j {
                let want_in = f[p][0].ncols();
                if p + 1 <= j && f[p + 1][0].nrows() != want_in {
                    return Err(Error::Shape(format!("T_{} bond mismatch at position {p}", j + 1)));
                }
            }
            if f[0][0].nrows() != 1 || f[j][0].ncols() != 1 {
                return Err(Error::Shape(format!("T_{} edge bonds must be one", j + 1)));
            }
        }
        Ok(Self { memory, factors, neutral })
    }

    /// Chebyshev linking set evaluated at the eigentable frequencies.
    pub fn from_linking(set: &LinkingSet, ls: &LiouvilleSystem) -> Result<Self> {
        let freqs = ls.frequencies();
        if set.channels != ls.channels().len() {
            return Err(Error::Shape("linking set and system disagree on noise channels".into()));
        }
        let c = set.channels;
        let factors = set
            .trains
            .iter()
            .enumerate()
            .map(|(jm1, train)| {
                (0..=jm1)
                    .map(|p| {
                        freqs
                            .iter()
                            .map(|w| {
                                let mut acc = CMat::identity(1, 1);
                                let mut first = true;
                                for ch in 0..c {
                                    let v = p * c + ch;
                                    let core = train.core_matrix(v, &set.bases[ch], set.bases[ch].to_unit(w[ch]));
                                    if first {
                                        acc = core;
                                        first = false;
                                    } else {
                                        acc = &acc * core;
                                    }
                                }
                                acc
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self::from_parts(set.memory, factors, ls.neutral_entry())
    }

    /// Exact transfer functions on the eigentable, factorized by TT-SVD over
    /// entry indices. The tensor of `T_{M+1}` has `entries^{M+1}` elements.
    pub fn exact(ls: &LiouvilleSystem, g: &CorrelationMatrix, budget: usize) -> Result<Self> {
        let freqs = ls.frequencies();
        let ne = freqs.len();
        let needed = (ne as f64).powi(g.memory as i32 + 1);
        if needed > budget as f64 {
            return Err(Error::Budget { needed, budget: budget as f64 });
        }
        let policy = SvdPolicy::new(1e-14)?;
        let table = g.table();
        let mut factors = Vec::with_capacity(g.memory + 1);
        for j in 1..=g.memory + 1 {
            let grid = full_grid(ne, j);
            let data: Vec<C64> = grid
                .iter()
                .map(|idx| {
                    let slices: Vec<&[f64]> = idx.iter().map(|&e| freqs[e].as_slice()).collect();
                    transfer_exact(&table[..j], &slices)
                })
                .collect();
            let tt: TensorTrain = tt_svd(&data, &vec![ne; j], &policy)?;
            factors.push(entry_factors(&tt, ne));
        }
        Self::from_parts(g.memory, factors, ls.neutral_entry())
    }

    /// Rounds every `T_j`, viewed as a train over eigentable entries, to
    /// relative accuracy `eps`. Trained factors carry the full Chebyshev bond
    /// but only a handful of entries are ever visited, so this shrinks the
    /// slot dimensions seen by the propagator.
    pub fn rounded(&self, eps: f64) -> Result<Self> {
        let policy = SvdPolicy::new(eps)?;
        let ne = self.entries();
        let factors = self
            .factors
            .iter()
            .map(|per_pos| {
                let cores = per_pos
                    .iter()
                    .map(|mats| {
                        let (l, r) = mats[0].shape();
                        let mut data = vec![C64::new(0.0, 0.0); l * ne * r];
                        for (e, m) in mats.iter().enumerate() {
                            for a in 0..l {
                                for b in 0..r {
                                    data[(a * ne + e) * r + b] = m[(a, b)];
                                }
                            }
                        }
                        Core::new(l, ne, 1, r, data)
                    })
                    .collect();
                let tt = recompress(&TensorTrain::from_cores(cores)?, &policy);
                Ok(entry_factors(&tt, ne))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(self.memory, factors, self.neutral)
    }

    pub fn neutral_entry(&self) -> usize {
        self.neutral
    }

    pub fn entries(&self) -> usize {
        self.factors[0][0].len()
    }

    pub fn factor(&self, j: usize, p: usize, entry: usize) -> &CMat {
        &self.factors[j - 1][p][entry]
    }

    pub fn slots(&self) -> usize {
        self.memory + 1
    }

    /// Wire held by `slot` while slice `n` is processed.
    pub fn wire_at(&self, slot: usize, n: usize) -> usize {
        let period = self.memory + 1;
        n + (slot + period - n % period) % period
    }

    /// Factor applied on `slot` at slice `n` (1-based) for `entry`.
    pub fn slot_factor(&self, slot: usize, n: usize, entry: usize) -> &CMat {
        let m = self.wire_at(slot, n);
        let j = m.min(self.memory + 1);
        self.factor(j, m - n, entry)
    }

    /// Row vector closing `slot` after slice `k`: open wires are completed
    /// with the neutral entry, for which the exact transfer function is one.
    pub fn cap(&self, slot: usize, k: usize) -> CMat {
        let m = self.wire_at(slot, k);
        if m == k {
            return CMat::identity(1, 1);
        }
        let j = m.min(self.memory + 1);
        let mut row = CMat::identity(1, 1);
        for p in 0..(m - k) {
            row = &row * self.factor(j, p, self.neutral);
        }
        row
    }

    /// Dimension of `slot` after slice `k` (k = 0 is the initial state).
    pub fn slot_dim(&self, slot: usize, k: usize) -> usize {
        self.cap(slot, k).ncols()
    }

    /// Kernel value for a trajectory of entries (`entries[n−1]` at slice `n`)
    /// by propagating every slot and closing it with its cap.
    pub fn chain_value(&self, entries: &[usize]) -> C64 {
        let k = entries.len();
        let mut total = C64::new(1.0, 0.0);
        for slot in 0..self.slots() {
            let mut state = CMat::identity(1, 1);
            for (n0, &e) in entries.iter().enumerate() {
                state = self.slot_factor(slot, n0 + 1, e) * state;
            }
            let v = self.cap(slot, k) * state;
            total *= v[(0, 0)];
        }
        total
    }

    /// `T_j` through the stored factors, newest entry first.
    pub fn transfer(&self, j: usize, entries: &[usize]) -> C64 {
        let mut row = CMat::identity(1, 1);
        for (p, &e) in entries.iter().enumerate().take(j) {
            row = &row * self.factor(j, p, e);
        }
        row[(0, 0)]
    }
}
