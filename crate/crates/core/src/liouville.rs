//! Liouville-space superoperators, the joint eigentable of the noise
//! couplings, and the half-step free propagator restricted to each
//! eigenprojector.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{
    anticommutator_superop, c, commutator_superop, expm_hermitian, frobenius, hermitian_deviation,
    hermitian_eigen, kron, CMat, C64,
};
use crate::tt::{mpo_from_dense, SvdPolicy, TensorTrain};

const HERMITIAN_TOL: f64 = 1e-12;
/// Degenerate eigenvalues closer than this fraction of the spectral radius
/// share one projector.
pub const GROUPING_TOL: f64 = 1e-10;

/// A Hilbert-space model: `H0` plus the operators the noise fields couple to.
/// Dimensions that are not a power of two are zero-padded.
#[derive(Clone, Debug)]
pub struct HilbertSystem {
    physical_dim: usize,
    dim: usize,
    qubits: usize,
    h0: CMat,
    couplings: Vec<CMat>,
}

fn pad(m: &CMat, dim: usize) -> CMat {
    let mut out = CMat::zeros(dim, dim);
    out.view_mut((0, 0), (m.nrows(), m.ncols())).copy_from(m);
    out
}

impl HilbertSystem {
    pub fn new(h0: CMat, v: CMat) -> Result<Self> {
        Self::with_couplings(h0, vec![v])
    }

    pub fn with_couplings(h0: CMat, couplings: Vec<CMat>) -> Result<Self> {
        let d = h0.nrows();
        if d == 0 || h0.ncols() != d {
            return Err(Error::Shape(format!("H0 must be square and non-empty, got {:?}", h0.shape())));
        }
        let dev = hermitian_deviation(&h0);
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian { name: "H0", deviation: dev });
        }
        if couplings.is_empty() {
            return Err(Error::InvalidParameter("at least one coupling operator is required".into()));
        }
        for v in &couplings {
            if v.shape() != (d, d) {
                return Err(Error::Shape(format!("coupling has shape {:?}, expected {d}x{d}", v.shape())));
            }
            let dev = hermitian_deviation(v);
            if dev > HERMITIAN_TOL {
                return Err(Error::NotHermitian { name: "V", deviation: dev });
            }
        }
        let qubits = d.next_power_of_two().trailing_zeros() as usize;
        let dim = 1usize << qubits;
        Ok(Self {
            physical_dim: d,
            dim,
            qubits,
            h0: pad(&h0, dim),
            couplings: couplings.iter().map(|v| pad(v, dim)).collect(),
        })
    }

    /// Dimension before padding.
    pub fn physical_dim(&self) -> usize {
        self.physical_dim
    }

    /// Padded dimension `2^q`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn h0(&self) -> &CMat {
        &self.h0
    }

    pub fn coupling(&self, k: usize) -> &CMat {
        &self.couplings[k]
    }

    pub fn coupling_count(&self) -> usize {
        self.couplings.len()
    }

    /// Zero-pads a physical-dimension matrix (e.g. an initial state).
    pub fn pad_matrix(&self, m: &CMat) -> Result<CMat> {
        if m.shape() != (self.physical_dim, self.physical_dim) {
            return Err(Error::Shape(format!(
                "expected {0}x{0}, got {1:?}",
                self.physical_dim,
                m.shape()
            )));
        }
        Ok(pad(m, self.dim))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseMode {
    /// Real classical field coupled through a commutator.
    Extrinsic,
    /// Complex field pair: commutator plus detailed-balance anticommutator.
    Intrinsic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChannelKind {
    Commutator,
    Anticommutator,
}

/// One noise field: which coupling operator it multiplies and how.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Channel {
    pub coupling: usize,
    pub kind: ChannelKind,
}

impl NoiseMode {
    pub fn channels(self) -> Vec<Channel> {
        match self {
            NoiseMode::Extrinsic => vec![Channel { coupling: 0, kind: ChannelKind::Commutator }],
            NoiseMode::Intrinsic => vec![
                Channel { coupling: 0, kind: ChannelKind::Commutator },
                Channel { coupling: 0, kind: ChannelKind::Anticommutator },
            ],
        }
    }
}

/// Joint eigenspace of the coupling operators in Hilbert space.
#[derive(Clone, Debug)]
struct HilbertClass {
    /// Eigenvalue of each coupling operator on this class.
    values: Vec<f64>,
    projector: CMat,
}

/// One joint eigenvalue tuple of the channel superoperators with its
/// Liouville-space projector.
#[derive(Clone, Debug)]
pub struct EigenEntry {
    /// Eigenvalue of each channel superoperator, in channel order.
    pub freqs: Vec<f64>,
    pub projector: CMat,
    pub multiplicity: usize,
    /// (ket class, bra class) pairs whose outer products span this entry.
    class_pairs: Vec<(usize, usize)>,
}

#[derive(Clone, Debug)]
pub struct LiouvilleSystem {
    dim: usize,
    qubits: usize,
    physical_dim: usize,
    h0: CMat,
    l0: CMat,
    channels: Vec<Channel>,
    superops: Vec<CMat>,
    classes: Vec<HilbertClass>,
    eigentable: Vec<EigenEntry>,
}

pub fn build_liouville(sys: &HilbertSystem, mode: NoiseMode) -> Result<LiouvilleSystem> {
    build_liouville_channels(sys, &mode.channels())
}

/// Builds superoperators for an arbitrary list of commuting noise channels.
pub fn build_liouville_channels(sys: &HilbertSystem, channels: &[Channel]) -> Result<LiouvilleSystem> {
    if channels.is_empty() {
        return Err(Error::InvalidParameter("no noise channels".into()));
    }
    for ch in channels {
        if ch.coupling >= sys.coupling_count() {
            return Err(Error::InvalidParameter(format!("channel refers to missing coupling {}", ch.coupling)));
        }
    }
    let d = sys.dim();
    let superops: Vec<CMat> = channels
        .iter()
        .map(|ch| match ch.kind {
            ChannelKind::Commutator => commutator_superop(sys.coupling(ch.coupling)),
            ChannelKind::Anticommutator => anticommutator_superop(sys.coupling(ch.coupling)),
        })
        .collect();
    for i in 0..superops.len() {
        for j in i + 1..superops.len() {
            let comm = &superops[i] * &superops[j] - &superops[j] * &superops[i];
            let n = frobenius(&comm);
            let scale = frobenius(&superops[i]) * frobenius(&superops[j]);
            if n > 1e-10 * scale.max(1.0) {
                return Err(Error::NonCommuting(n));
            }
        }
    }

    let mut used: Vec<usize> = channels.iter().map(|c| c.coupling).collect();
    used.sort_unstable();
    used.dedup();
    for (a, &i) in used.iter().enumerate() {
        for &j in &used[a + 1..] {
            let (vi, vj) = (sys.coupling(i), sys.coupling(j));
            let n = frobenius(&(vi * vj - vj * vi));
            if n > 1e-10 * (frobenius(vi) * frobenius(vj)).max(1.0) {
                return Err(Error::NonCommuting(n));
            }
        }
    }

    // Joint eigenbasis: a generic real combination of commuting Hermitian
    // operators has the joint eigenvectors as its eigenvectors.
    let weights = [1.0, 1.4142135623730951, 1.7320508075688772, 2.23606797749979, 2.6457513110645907];
    let mut combo = CMat::zeros(d, d);
    for (k, &i) in used.iter().enumerate() {
        combo += sys.coupling(i) * c(weights[k % weights.len()] * (1.0 + k as f64), 0.0);
    }
    let (_, vecs) = hermitian_eigen(&combo);
    let nops = sys.coupling_count();
    let values: Vec<Vec<f64>> = (0..d)
        .map(|a| {
            let u = vecs.column(a);
            (0..nops)
                .map(|i| (u.adjoint() * sys.coupling(i) * u)[(0, 0)].re)
                .collect()
        })
        .collect();
    let hilbert_radius = values.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let htol = GROUPING_TOL * hilbert_radius.max(f64::MIN_POSITIVE);

    let mut classes: Vec<(Vec<f64>, Vec<usize>)> = Vec::new();
    for (a, vals) in values.iter().enumerate() {
        let hit = classes.iter_mut().find(|(rep, _)| {
            rep.iter().zip(vals).all(|(x, y)| (x - y).abs() <= htol)
        });
        match hit {
            Some((_, members)) => members.push(a),
            None => classes.push((vals.clone(), vec![a])),
        }
    }
    let classes: Vec<HilbertClass> = classes
        .into_iter()
        .map(|(_, members)| {
            let mut projector = CMat::zeros(d, d);
            let mut mean = vec![0.0; nops];
            for &a in &members {
                let u = vecs.column(a);
                projector += u * u.adjoint();
                for (m, v) in mean.iter_mut().zip(&values[a]) {
                    *m += v / members.len() as f64;
                }
            }
            HilbertClass { values: mean, projector }
        })
        .collect();

    let pair_freqs = |k: usize, b: usize| -> Vec<f64> {
        channels
            .iter()
            .map(|ch| {
                let (vk, vb) = (classes[k].values[ch.coupling], classes[b].values[ch.coupling]);
                match ch.kind {
                    ChannelKind::Commutator => vk - vb,
                    ChannelKind::Anticommutator => vk + vb,
                }
            })
            .collect()
    };
    let mut radius = 0.0f64;
    for k in 0..classes.len() {
        for b in 0..classes.len() {
            radius = pair_freqs(k, b).iter().fold(radius, |m, f| m.max(f.abs()));
        }
    }
    let ltol = GROUPING_TOL * radius.max(f64::MIN_POSITIVE);

    let mut groups: Vec<(Vec<f64>, Vec<(usize, usize)>)> = Vec::new();
    for k in 0..classes.len() {
        for b in 0..classes.len() {
            let f = pair_freqs(k, b);
            match groups
                .iter_mut()
                .find(|(rep, _)| rep.iter().zip(&f).all(|(x, y)| (x - y).abs() <= ltol))
            {
                Some((_, pairs)) => pairs.push((k, b)),
                None => groups.push((f, vec![(k, b)])),
            }
        }
    }
    // Zero tuple first, then ascending lexicographic order.
    groups.sort_by(|(a, _), (b, _)| {
        let za = a.iter().any(|x| x.abs() > ltol);
        let zb = b.iter().any(|x| x.abs() > ltol);
        za.cmp(&zb).then_with(|| {
            a.iter()
                .zip(b)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(core::cmp::Ordering::Equal)
        })
    });

    let eigentable = groups
        .into_iter()
        .map(|(freqs, pairs)| {
            let mut projector = CMat::zeros(d * d, d * d);
            let mut multiplicity = 0;
            for &(k, b) in &pairs {
                projector += kron(&classes[b].projector.transpose(), &classes[k].projector);
                multiplicity += rank_of_projector(&classes[k].projector) * rank_of_projector(&classes[b].projector);
            }
            let freqs = freqs.iter().map(|&f| if f.abs() <= ltol { 0.0 } else { f }).collect();
            EigenEntry { freqs, projector, multiplicity, class_pairs: pairs }
        })
        .collect();

    Ok(LiouvilleSystem {
        dim: d,
        qubits: sys.qubits(),
        physical_dim: sys.physical_dim(),
        h0: sys.h0().clone(),
        l0: commutator_superop(sys.h0()),
        channels: channels.to_vec(),
        superops,
        classes,
        eigentable,
    })
}

fn rank_of_projector(p: &CMat) -> usize {
    p.trace().re.round() as usize
}

impl LiouvilleSystem {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn physical_dim(&self) -> usize {
        self.physical_dim
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn h0(&self) -> &CMat {
        &self.h0
    }

    pub fn l0(&self) -> &CMat {
        &self.l0
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    /// Superoperator of channel `k` (L1 for extrinsic, L1∓ for intrinsic).
    pub fn channel_superop(&self, k: usize) -> &CMat {
        &self.superops[k]
    }

    pub fn eigentable(&self) -> &[EigenEntry] {
        &self.eigentable
    }

    /// Frequency tuples of the eigentable, in table order.
    pub fn frequencies(&self) -> Vec<Vec<f64>> {
        self.eigentable.iter().map(|e| e.freqs.clone()).collect()
    }

    /// `[min, max]` eigenvalue of each channel superoperator.
    pub fn channel_ranges(&self) -> Vec<(f64, f64)> {
        (0..self.channels.len())
            .map(|k| {
                self.eigentable.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| {
                    (lo.min(e.freqs[k]), hi.max(e.freqs[k]))
                })
            })
            .collect()
    }

    /// Index of the first eigentable entry whose commutator-channel
    /// frequencies all vanish; transfer functions evaluate to one there.
    pub fn neutral_entry(&self) -> usize {
        self.eigentable
            .iter()
            .position(|e| {
                self.channels
                    .iter()
                    .zip(&e.freqs)
                    .all(|(ch, f)| ch.kind != ChannelKind::Commutator || *f == 0.0)
            })
            .expect("diagonal pairs always give a zero commutator frequency")
    }

    /// Dense `exp(-i L0 t)`.
    pub fn unitary(&self, t: f64) -> CMat {
        let u = expm_hermitian(&self.h0, c(0.0, -t));
        kron(&u.map(|z| z.conj()), &u)
    }
}

/// `𝒢0(ω) = e^{-iL0τ/2} E(ω) e^{-iL0τ/2}` for every eigentable entry.
#[derive(Clone, Debug)]
pub struct FreePropagator {
    pub tau: f64,
    pub qubits: usize,
    pub dense: Vec<CMat>,
    pub freqs: Vec<Vec<f64>>,
}

pub fn free_propagator(ls: &LiouvilleSystem, tau: f64) -> Result<FreePropagator> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidParameter(format!("time step must be positive, got {tau}")));
    }
    let u = expm_hermitian(&ls.h0, c(0.0, -tau / 2.0));
    let sandwiched: Vec<CMat> = ls.classes.iter().map(|cl| &u * &cl.projector * &u).collect();
    let dense = ls
        .eigentable
        .iter()
        .map(|e| {
            let d2 = ls.dim * ls.dim;
            let mut g = CMat::zeros(d2, d2);
            for &(k, b) in &e.class_pairs {
                g += kron(&sandwiched[b].map(|z| z.conj()), &sandwiched[k]);
            }
            g
        })
        .collect();
    Ok(FreePropagator { tau, qubits: ls.qubits, dense, freqs: ls.frequencies() })
}

impl FreePropagator {
    pub fn sum(&self) -> CMat {
        let n = self.dense[0].nrows();
        self.dense.iter().fold(CMat::zeros(n, n), |acc, g| acc + g)
    }
}

/// Compresses each `𝒢0(ω)` into an MPO over `2q` qubit sites. Site `k` pairs
/// row bit `k` with column bit `k` of the Liouville index (most significant
/// first).
pub fn tensorize_propagator(fp: &FreePropagator, eps_svd: f64) -> Result<Vec<TensorTrain>> {
    let policy = SvdPolicy::new(eps_svd)?;
    let sites = 2 * fp.qubits;
    let dims = vec![2usize; sites.max(1)];
    fp.dense
        .iter()
        .map(|g| {
            if sites == 0 {
                // d = 1: a single scalar site.
                return mpo_from_dense(g, &[1], &[1], &policy);
            }
            mpo_from_dense(g, &dims, &dims, &policy)
        })
        .collect()
}

/// Weight used to turn an arbitrary complex scalar into a 1×1 matrix.
pub fn scalar_matrix(z: C64) -> CMat {
    CMat::from_element(1, 1, z)
}
