//! Brute-force references: explicit path sums and dense fugacities.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{kron, CMat, C64};
use crate::liouville::FreePropagator;
use crate::noise::CorrelationMatrix;
use crate::stt::KernelFactors;

/// Largest number of trajectories `path_sum` will enumerate by default.
pub const PATH_BUDGET: u64 = 10_000_000;

/// `Φ_N = Σ_{e_1..e_N} 𝒢0(e_N)⋯𝒢0(e_1) exp(−½ Σ_{k,l} w_kᵀ G_{k,l} w_l)`
/// by depth-first enumeration of every eigentable trajectory.
pub fn path_sum(fp: &FreePropagator, g: &CorrelationMatrix, n_steps: usize, budget: u64) -> Result<CMat> {
    let ne = fp.dense.len();
    let needed = (ne as f64).powi(n_steps as i32);
    if needed > budget as f64 {
        return Err(Error::Budget { needed, budget: budget as f64 });
    }
    if n_steps == 0 {
        let d = fp.dense[0].nrows();
        return Ok(CMat::identity(d, d));
    }
    if n_steps > g.n_steps {
        return Err(Error::InvalidParameter("correlation matrix covers fewer slices than requested".into()));
    }
    if fp.freqs[0].len() != g.channels {
        return Err(Error::Shape("eigentable and correlation matrix disagree on channels".into()));
    }
    let blocks: Vec<Vec<CMat>> = (1..=n_steps).map(|k| (1..=n_steps).map(|l| g.block(k, l)).collect()).collect();
    let d2 = fp.dense[0].nrows();
    let mut out = CMat::zeros(d2, d2);
    let mut path = Vec::with_capacity(n_steps);
    let mut stack: Vec<(CMat, C64)> = Vec::with_capacity(n_steps + 1);
    stack.push((CMat::identity(d2, d2), C64::new(0.0, 0.0)));
    descend(fp, &blocks, n_steps, &mut path, &mut stack, &mut out);
    Ok(out)
}

fn descend(
    fp: &FreePropagator,
    blocks: &[Vec<CMat>],
    n_steps: usize,
    path: &mut Vec<usize>,
    stack: &mut Vec<(CMat, C64)>,
    out: &mut CMat,
) {
    let depth = path.len();
    if depth == n_steps {
        let (p, expo) = stack.last().expect("root pushed");
        *out += p * (-expo).exp();
        return;
    }
    for e in 0..fp.dense.len() {
        let (p, expo) = stack.last().expect("root pushed");
        let w = &fp.freqs[e];
        // slice depth+1 couples to itself and every earlier slice
        let mut inc = bilinear(&blocks[depth][depth], w, w) * 0.5;
        for (l, &el) in path.iter().enumerate() {
            let wl = &fp.freqs[el];
            inc += (bilinear(&blocks[depth][l], w, wl) + bilinear(&blocks[l][depth], wl, w)) * 0.5;
        }
        let next = (&fp.dense[e] * p, expo + inc);
        stack.push(next);
        path.push(e);
        descend(fp, blocks, n_steps, path, stack, out);
        path.pop();
        stack.pop();
    }
}

fn bilinear(g: &CMat, a: &[f64], b: &[f64]) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..a.len() {
        for j in 0..b.len() {
            acc += g[(i, j)] * (a[i] * b[j]);
        }
    }
    acc
}

/// Dense `Σ_e 𝒢0(e) ⊗ (⊗_s F_s(e))` for slice `n`, with slots in order.
pub fn dense_fugacity(fp: &FreePropagator, kernel: &KernelFactors, n: usize) -> CMat {
    let mut total: Option<CMat> = None;
    for (e, g0) in fp.dense.iter().enumerate() {
        let mut term = g0.clone();
        for slot in 0..kernel.slots() {
            term = kron(&term, kernel.slot_factor(slot, n, e));
        }
        total = Some(match total {
            None => term,
            Some(t) => t + term,
        });
    }
    total.expect("eigentable is never empty")
}
