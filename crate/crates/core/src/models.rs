//! Benchmark Hamiltonians. Energies in units of the tunnel coupling Ω.

use alloc::vec::Vec;

use crate::linalg::{c, CMat};
use crate::liouville::HilbertSystem;

pub fn pauli_x() -> CMat {
    CMat::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)])
}

pub fn pauli_y() -> CMat {
    CMat::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)])
}

pub fn pauli_z() -> CMat {
    CMat::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)])
}

/// Biased two-level system `H0 = Ω σx + ε σz` with noise coupling `V = α σz`.
pub fn spin_boson(omega: f64, epsilon: f64, alpha: f64) -> HilbertSystem {
    let h0 = pauli_x() * c(omega, 0.0) + pauli_z() * c(epsilon, 0.0);
    let v = pauli_z() * c(alpha, 0.0);
    HilbertSystem::new(h0, v).expect("Pauli matrices are Hermitian")
}

/// Periodic single-excitation chain of `d` sites with alternating site
/// energies `ε(-1)^n`, nearest-neighbour hopping `Ω` and anti-correlated site
/// noise `V = α Σ (-1)^n |n><n|` (sites numbered from 1).
pub fn chain(d: usize, epsilon: f64, omega: f64, alpha: f64) -> HilbertSystem {
    let (h0, v) = chain_matrices(d, epsilon, omega, alpha);
    HilbertSystem::new(h0, v).expect("chain matrices are Hermitian")
}

pub fn chain_matrices(d: usize, epsilon: f64, omega: f64, alpha: f64) -> (CMat, CMat) {
    let mut h0 = CMat::zeros(d, d);
    let mut v = CMat::zeros(d, d);
    for i in 0..d {
        let sign = if (i + 1) % 2 == 0 { 1.0 } else { -1.0 };
        h0[(i, i)] = c(epsilon * sign, 0.0);
        v[(i, i)] = c(alpha * sign, 0.0);
        if d > 1 {
            let j = (i + 1) % d;
            h0[(i, j)] += c(omega, 0.0);
            h0[(j, i)] += c(omega, 0.0);
        }
    }
    (h0, v)
}

/// Ring distance of each site from site 1.
pub fn ring_displacements(d: usize) -> Vec<f64> {
    (0..d).map(|n| n.min(d - n) as f64).collect()
}

/// Pure state with the excitation on site `site` (0-based).
pub fn site_state(d: usize, site: usize) -> CMat {
    let mut rho = CMat::zeros(d, d);
    rho[(site, site)] = c(1.0, 0.0);
    rho
}
