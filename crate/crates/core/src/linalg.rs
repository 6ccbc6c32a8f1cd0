//! Dense complex linear algebra shared by every module.
//!
//! Vectorization is column-major everywhere: `vec(A)[i + d*j] = A[i, j]`,
//! so that `vec(A X B) = (Bᵀ ⊗ A) vec(X)`.

use alloc::format;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn vectorize(a: &CMat) -> Result<CVec> {
    if a.nrows() != a.ncols() {
        return Err(Error::Shape(format!(
            "vectorize expects a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(CVec::from_column_slice(a.as_slice()))
}

pub fn devectorize(v: &CVec, d: usize) -> Result<CMat> {
    if v.len() != d * d {
        return Err(Error::Shape(format!(
            "cannot devectorize length {} into {d}x{d}",
            v.len()
        )));
    }
    Ok(CMat::from_column_slice(d, d, v.as_slice()))
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn frobenius(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// Largest elementwise deviation of `a` from its adjoint.
pub fn hermitian_deviation(a: &CMat) -> f64 {
    if a.nrows() != a.ncols() {
        return f64::INFINITY;
    }
    let mut dev: f64 = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            dev = dev.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    dev
}

/// `exp(z * H)` for Hermitian `H`, through its eigendecomposition.
pub fn expm_hermitian(h: &CMat, z: C64) -> CMat {
    let eig = h.clone().symmetric_eigen();
    let w = &eig.eigenvectors;
    let mut scaled = w.clone();
    for (j, lam) in eig.eigenvalues.iter().enumerate() {
        let f = (z * *lam).exp();
        for i in 0..scaled.nrows() {
            scaled[(i, j)] *= f;
        }
    }
    scaled * w.adjoint()
}

fn norm1(a: &CMat) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// General dense matrix exponential by scaling and squaring with a Taylor
/// series. Accurate to roughly machine precision for the moderate norms met
/// here.
pub fn expm(a: &CMat) -> CMat {
    let n = a.nrows();
    let nrm = norm1(a);
    let mut squarings = 0u32;
    if nrm > 0.5 {
        squarings = (nrm / 0.5).log2().ceil() as u32;
    }
    let scale = 1.0 / (2.0f64).powi(squarings as i32);
    let x = a * C64::from(scale);
    let mut result = CMat::identity(n, n);
    let mut term = CMat::identity(n, n);
    for k in 1..40 {
        term = &term * &x * C64::from(1.0 / k as f64);
        result += &term;
        if norm1(&term) <= 1e-18 * norm1(&result).max(1e-300) {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Eigendecomposition of a Hermitian matrix with ascending eigenvalues.
pub fn hermitian_eigen(h: &CMat) -> (Vec<f64>, CMat) {
    let eig = h.clone().symmetric_eigen();
    let n = h.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMat::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

/// Thin SVD with singular values sorted in descending order.
pub struct Svd {
    pub u: CMat,
    pub s: Vec<f64>,
    pub vt: CMat,
}

/// Wide inputs go through the adjoint and tall ones are first reduced by QR,
/// so the decomposition itself always runs on a square matrix. The
/// Golub–Kahan result is accepted only if it reconstructs the input; a
/// one-sided Jacobi sweep takes over otherwise (nalgebra's complex
/// bidiagonal iteration occasionally returns inconsistent factors).
pub fn svd(m: CMat) -> Svd {
    let (rows, cols) = m.shape();
    if cols > rows {
        let t = svd(m.adjoint());
        return Svd { u: t.vt.adjoint(), s: t.s, vt: t.u.adjoint() };
    }
    if rows > cols {
        let qr = m.qr();
        let (q, r) = (qr.q(), qr.r());
        let inner = svd_square(r);
        return Svd { u: q * inner.u, s: inner.s, vt: inner.vt };
    }
    svd_square(m)
}

fn svd_square(m: CMat) -> Svd {
    let norm = frobenius(&m);
    if norm == 0.0 {
        let n = m.nrows();
        return Svd { u: CMat::identity(n, n), s: alloc::vec![0.0; n], vt: CMat::identity(n, n) };
    }
    let dec = m.clone().svd(true, true);
    let (u, vt) = (dec.u.expect("left singular vectors requested"), dec.v_t.expect("right singular vectors requested"));
    let k = dec.singular_values.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| dec.singular_values[b].total_cmp(&dec.singular_values[a]));
    let s: Vec<f64> = order.iter().map(|&j| dec.singular_values[j]).collect();
    let u = CMat::from_fn(u.nrows(), k, |i, j| u[(i, order[j])]);
    let vt = CMat::from_fn(k, vt.ncols(), |i, j| vt[(order[i], j)]);
    let out = Svd { u, s, vt };
    if svd_residual(&m, &out) <= 1e-12 * norm {
        out
    } else {
        jacobi_svd(m)
    }
}

fn svd_residual(m: &CMat, d: &Svd) -> f64 {
    let mut us = d.u.clone();
    for (j, s) in d.s.iter().enumerate() {
        us.column_mut(j).scale_mut(*s);
    }
    frobenius(&(us * &d.vt - m))
}

/// One-sided (Hestenes) Jacobi SVD of a square matrix.
pub fn jacobi_svd(m: CMat) -> Svd {
    let n = m.ncols();
    let mut a = m;
    let mut v = CMat::identity(n, n);
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let gamma = a.column(p).dotc(&a.column(q));
                let g = gamma.norm();
                if g == 0.0 || g <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for mat in [&mut a, &mut v] {
                    for i in 0..mat.nrows() {
                        let xp = mat[(i, p)];
                        let xq = mat[(i, q)] * phase.conj();
                        mat[(i, p)] = xp * cs - xq * sn;
                        mat[(i, q)] = xp * sn + xq * cs;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = (0..n).map(|j| a.column(j).norm()).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
    let s: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let mut u = CMat::zeros(a.nrows(), n);
    for (dst, &src) in order.iter().enumerate() {
        if norms[src] > 0.0 {
            u.set_column(dst, &(a.column(src) / C64::new(norms[src], 0.0)));
        }
    }
    complete_orthonormal(&mut u, &s);
    let vt = CMat::from_fn(n, n, |i, j| v[(j, order[i])].conj());
    Svd { u, s, vt }
}

/// Replaces the columns of `u` belonging to zero singular values by an
/// orthonormal completion.
fn complete_orthonormal(u: &mut CMat, s: &[f64]) {
    let rows = u.nrows();
    let mut e = 0;
    for j in 0..s.len() {
        if s[j] > 0.0 {
            continue;
        }
        while e < rows {
            let mut cand = CVec::zeros(rows);
            cand[e] = C64::new(1.0, 0.0);
            e += 1;
            for k in 0..u.ncols() {
                if k != j && (s[k] > 0.0 || k < j) {
                    let proj = u.column(k).dotc(&cand);
                    cand -= u.column(k) * proj;
                }
            }
            let nrm = cand.norm();
            if nrm > 1e-8 {
                u.set_column(j, &(cand / C64::new(nrm, 0.0)));
                break;
            }
        }
    }
}

/// Smallest rank whose discarded tail satisfies
/// `sqrt(sum of discarded s^2) <= eps * reference`, clamped to `[1, max_rank]`.
pub fn truncation_rank(s: &[f64], eps: f64, reference: f64, max_rank: Option<usize>) -> usize {
    let budget = (eps * reference).powi(2);
    let mut tail = 0.0;
    let mut rank = s.len();
    while rank > 1 {
        let next = tail + s[rank - 1] * s[rank - 1];
        if next > budget {
            break;
        }
        tail = next;
        rank -= 1;
    }
    let rank = rank.max(1);
    match max_rank {
        Some(m) => rank.min(m.max(1)),
        None => rank,
    }
}

/// Commutator superoperator `A ↦ HA − AH` in column-major Liouville space.
pub fn commutator_superop(h: &CMat) -> CMat {
    let d = h.nrows();
    let id = CMat::identity(d, d);
    kron(&id, h) - kron(&h.transpose(), &id)
}

/// Anticommutator superoperator `A ↦ HA + AH`.
pub fn anticommutator_superop(h: &CMat) -> CMat {
    let d = h.nrows();
    let id = CMat::identity(d, d);
    kron(&id, h) + kron(&h.transpose(), &id)
}

/// Superoperator of `A ↦ L A R`.
pub fn sandwich_superop(l: &CMat, r: &CMat) -> CMat {
    kron(&r.transpose(), l)
}
