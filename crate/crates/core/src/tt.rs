//! Tensor trains and matrix product operators.
//!
//! A [`TensorTrain`] is a chain of rank-4 cores `(left, out, in, right)`; a
//! plain tensor train (MPS) is the special case where every `in` dimension is
//! one. Dense reconstructions treat site 0 as the most significant index.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{svd, truncation_rank, CMat, C64};

/// Relative truncation policy shared by every SVD in the train algebra.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SvdPolicy {
    pub eps: f64,
    pub max_bond: Option<usize>,
}

impl SvdPolicy {
    pub fn new(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidParameter(format!("SVD cutoff must lie in (0, 1), got {eps}")));
        }
        Ok(Self { eps, max_bond: None })
    }

    pub fn with_max_bond(mut self, max_bond: usize) -> Self {
        self.max_bond = Some(max_bond.max(1));
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Core {
    pub left: usize,
    pub out: usize,
    pub inp: usize,
    pub right: usize,
    /// Row-major `(left, out, in, right)`.
    pub data: Vec<C64>,
}

impl Core {
    pub fn new(left: usize, out: usize, inp: usize, right: usize, data: Vec<C64>) -> Self {
        assert_eq!(data.len(), left * out * inp * right, "core data length");
        Self { left, out, inp, right, data }
    }

    pub fn zeros(left: usize, out: usize, inp: usize, right: usize) -> Self {
        Self::new(left, out, inp, right, vec![C64::new(0.0, 0.0); left * out * inp * right])
    }

    /// A bond-1 core holding the matrix `m` (rows = out, cols = in).
    pub fn from_matrix(m: &CMat) -> Self {
        let mut data = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push(m[(i, j)]);
            }
        }
        Self::new(1, m.nrows(), m.ncols(), 1, data)
    }

    #[inline]
    pub fn at(&self, l: usize, o: usize, i: usize, r: usize) -> C64 {
        self.data[((l * self.out + o) * self.inp + i) * self.right + r]
    }

    fn phys(&self) -> usize {
        self.out * self.inp
    }
}

/// Row-major product of an `m×k` and a `k×n` array.
pub(crate) fn matmul_rm(a: &[C64], m: usize, k: usize, b: &[C64], n: usize) -> Vec<C64> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    // A row-major array is the column-major transpose; Cᵀ = Bᵀ Aᵀ.
    let at = CMat::from_column_slice(k, m, a);
    let bt = CMat::from_column_slice(n, k, b);
    let ct = bt * at;
    ct.as_slice().to_vec()
}

fn to_row_major(m: &CMat) -> Vec<C64> {
    m.transpose().as_slice().to_vec()
}

#[derive(Clone, Debug, PartialEq)]
pub struct TensorTrain {
    cores: Vec<Core>,
}

impl TensorTrain {
    pub fn from_cores(cores: Vec<Core>) -> Result<Self> {
        if cores.is_empty() {
            return Err(Error::Shape("a tensor train needs at least one core".into()));
        }
        if cores[0].left != 1 || cores[cores.len() - 1].right != 1 {
            return Err(Error::Shape("edge bond dimensions must be one".into()));
        }
        for w in cores.windows(2) {
            if w[0].right != w[1].left {
                return Err(Error::Shape(format!(
                    "adjacent bond dimensions disagree: {} vs {}",
                    w[0].right, w[1].left
                )));
            }
        }
        Ok(Self { cores })
    }

    /// Bond-1 train of zeros with the given physical dimensions.
    pub fn zeros(out_dims: &[usize], in_dims: &[usize]) -> Self {
        let cores = out_dims.iter().zip(in_dims).map(|(&o, &i)| Core::zeros(1, o, i, 1)).collect();
        Self { cores }
    }

    /// Identity operator on sites of the given dimensions.
    pub fn identity(dims: &[usize]) -> Self {
        let cores = dims.iter().map(|&p| Core::from_matrix(&CMat::identity(p, p))).collect();
        Self { cores }
    }

    pub fn len(&self) -> usize {
        self.cores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cores.is_empty()
    }

    pub fn cores(&self) -> &[Core] {
        &self.cores
    }

    pub fn core(&self, k: usize) -> &Core {
        &self.cores[k]
    }

    pub fn into_cores(self) -> Vec<Core> {
        self.cores
    }

    /// Interior bond dimensions `B_1..B_{L-1}`.
    pub fn bond_dims(&self) -> Vec<usize> {
        self.cores[..self.cores.len() - 1].iter().map(|c| c.right).collect()
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    pub fn out_dims(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.out).collect()
    }

    pub fn in_dims(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.inp).collect()
    }

    /// Bytes held by the core payloads.
    pub fn bytes(&self) -> usize {
        self.cores.iter().map(|c| c.data.len()).sum::<usize>() * core::mem::size_of::<C64>()
    }

    pub fn scale(&mut self, z: C64) {
        for v in self.cores[0].data.iter_mut() {
            *v *= z;
        }
    }

    /// Dense operator; rows index the `out` legs, columns the `in` legs.
    pub fn to_dense_matrix(&self) -> CMat {
        let (mut rows, mut cols, mut bond) = (1usize, 1usize, 1usize);
        let mut acc = vec![C64::new(1.0, 0.0)];
        for core in &self.cores {
            let tmp = matmul_rm(&acc, rows * cols, bond, &core.data, core.phys() * core.right);
            // tmp[(R, C), (o, i, r)] -> next[(R, o), (C, i), r]
            let (o_n, i_n, r_n) = (core.out, core.inp, core.right);
            let mut next = vec![C64::new(0.0, 0.0); tmp.len()];
            for rr in 0..rows {
                for cc in 0..cols {
                    let src_base = (rr * cols + cc) * o_n * i_n * r_n;
                    for o in 0..o_n {
                        for i in 0..i_n {
                            let dst_row = rr * o_n + o;
                            let dst_col = cc * i_n + i;
                            let dst = (dst_row * cols * i_n + dst_col) * r_n;
                            let src = src_base + (o * i_n + i) * r_n;
                            next[dst..dst + r_n].copy_from_slice(&tmp[src..src + r_n]);
                        }
                    }
                }
            }
            acc = next;
            rows *= o_n;
            cols *= i_n;
            bond = r_n;
        }
        CMat::from_row_slice(rows, cols, &acc)
    }

    /// Dense vector of a train whose `in` dimensions are all one.
    pub fn to_dense_vector(&self) -> Vec<C64> {
        let m = self.to_dense_matrix();
        if m.ncols() == 1 {
            m.as_slice().to_vec()
        } else {
            to_row_major(&m)
        }
    }

    /// Frobenius norm through a left-to-right transfer contraction.
    pub fn norm(&self) -> f64 {
        // env[b, b'] = sum over physical legs of conj(core) core.
        let mut env = vec![C64::new(1.0, 0.0)];
        let mut dim = 1;
        for core in &self.cores {
            let p = core.phys();
            let r = core.right;
            // t[b', (p, r)] = sum_b env[b, b'] conj(core[b, p, r]) -> use env^T
            let env_t = transpose_rm(&env, dim, dim);
            let conj: Vec<C64> = core.data.iter().map(|z| z.conj()).collect();
            let t = matmul_rm(&env_t, dim, dim, &conj, p * r); // (b', p, r)
            // next[r, r'] = sum_{b', p} t[b', p, r] core[b', p, r']
            let t_perm = permute_3(&t, dim, p, r, [2, 0, 1]); // (r, b', p)
            let next = matmul_rm(&t_perm, r, dim * p, &core.data, r);
            env = next;
            dim = r;
        }
        env[0].re.max(0.0).sqrt()
    }

    /// Applies `recompress` in place.
    pub fn recompress(&mut self, policy: &SvdPolicy) {
        *self = recompress(self, policy);
    }
}

fn transpose_rm(a: &[C64], rows: usize, cols: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); a.len()];
    for i in 0..rows {
        for j in 0..cols {
            out[j * rows + i] = a[i * cols + j];
        }
    }
    out
}

/// Permutes a row-major 3-index array; `perm[k]` names the source axis placed
/// at position `k`.
fn permute_3(a: &[C64], d0: usize, d1: usize, d2: usize, perm: [usize; 3]) -> Vec<C64> {
    let dims = [d0, d1, d2];
    let nd = [dims[perm[0]], dims[perm[1]], dims[perm[2]]];
    let mut out = vec![C64::new(0.0, 0.0); a.len()];
    let mut idx = [0usize; 3];
    for x in 0..nd[0] {
        idx[perm[0]] = x;
        for y in 0..nd[1] {
            idx[perm[1]] = y;
            for z in 0..nd[2] {
                idx[perm[2]] = z;
                out[(x * nd[1] + y) * nd[2] + z] = a[(idx[0] * d1 + idx[1]) * d2 + idx[2]];
            }
        }
    }
    out
}

/// Left-to-right TT-SVD of a dense row-major tensor.
///
/// Each split drops the smallest singular values while
/// `sqrt(sum of dropped s^2) <= eps * norm(unfolding)`, so the global relative
/// error stays below `eps * sqrt(L - 1)`.
pub fn tt_svd(data: &[C64], dims: &[usize], policy: &SvdPolicy) -> Result<TensorTrain> {
    if dims.is_empty() || dims.iter().any(|&d| d == 0) {
        return Err(Error::Shape(format!("invalid tensor dimensions {dims:?}")));
    }
    let total: usize = dims.iter().product();
    if total != data.len() {
        return Err(Error::Shape(format!(
            "tensor has {} entries but dimensions {dims:?} need {total}",
            data.len()
        )));
    }
    let mut cores = Vec::with_capacity(dims.len());
    let mut rem = data.to_vec();
    let mut left = 1usize;
    let mut cols = total;
    for (k, &n) in dims.iter().enumerate() {
        if k + 1 == dims.len() {
            cores.push(Core::new(left, n, 1, 1, rem));
            break;
        }
        let rows = left * n;
        cols /= n;
        let m = CMat::from_row_slice(rows, cols, &rem);
        let dec = svd(m);
        let norm = dec.s.iter().map(|s| s * s).sum::<f64>().sqrt();
        let r = truncation_rank(&dec.s, policy.eps, norm, policy.max_bond);
        let u = dec.u.columns(0, r).into_owned();
        cores.push(Core::new(left, n, 1, r, to_row_major(&u)));
        let mut sv = dec.vt.rows(0, r).into_owned();
        for i in 0..r {
            for v in sv.row_mut(i).iter_mut() {
                *v *= dec.s[i];
            }
        }
        rem = to_row_major(&sv);
        left = r;
    }
    TensorTrain::from_cores(cores)
}

/// TT-SVD of a dense operator whose row (column) index factorizes over
/// `out_dims` (`in_dims`), site 0 most significant. Row and column digits of
/// the same site share one core.
pub fn mpo_from_dense(m: &CMat, out_dims: &[usize], in_dims: &[usize], policy: &SvdPolicy) -> Result<TensorTrain> {
    if out_dims.len() != in_dims.len() {
        return Err(Error::Shape("out and in site counts differ".into()));
    }
    let rows: usize = out_dims.iter().product();
    let cols: usize = in_dims.iter().product();
    if m.shape() != (rows, cols) {
        return Err(Error::Shape(format!("matrix {:?} does not match {rows}x{cols}", m.shape())));
    }
    let l = out_dims.len();
    let pair_dims: Vec<usize> = out_dims.iter().zip(in_dims).map(|(o, i)| o * i).collect();
    let mut data = vec![C64::new(0.0, 0.0); rows * cols];
    let mut odig = vec![0usize; l];
    let mut idig = vec![0usize; l];
    for r in 0..rows {
        digits(r, out_dims, &mut odig);
        for cidx in 0..cols {
            digits(cidx, in_dims, &mut idig);
            let mut flat = 0usize;
            for k in 0..l {
                flat = flat * pair_dims[k] + odig[k] * in_dims[k] + idig[k];
            }
            data[flat] = m[(r, cidx)];
        }
    }
    let tt = tt_svd(&data, &pair_dims, policy)?;
    let cores = tt
        .into_cores()
        .into_iter()
        .zip(out_dims.iter().zip(in_dims))
        .map(|(c, (&o, &i))| Core::new(c.left, o, i, c.right, c.data))
        .collect();
    TensorTrain::from_cores(cores)
}

fn digits(mut x: usize, dims: &[usize], out: &mut [usize]) {
    for k in (0..dims.len()).rev() {
        out[k] = x % dims[k];
        x /= dims[k];
    }
}

/// Direct sum: `dense(a + b) = dense(a) + dense(b)`, bond dimensions add.
pub fn mpo_add(a: &TensorTrain, b: &TensorTrain) -> Result<TensorTrain> {
    if a.len() != b.len() || a.out_dims() != b.out_dims() || a.in_dims() != b.in_dims() {
        return Err(Error::Shape("mpo_add requires identical site structure".into()));
    }
    let l = a.len();
    if l == 1 {
        let (ca, cb) = (&a.cores[0], &b.cores[0]);
        let data = ca.data.iter().zip(&cb.data).map(|(x, y)| x + y).collect();
        return TensorTrain::from_cores(vec![Core::new(1, ca.out, ca.inp, 1, data)]);
    }
    let mut cores = Vec::with_capacity(l);
    for k in 0..l {
        let (ca, cb) = (&a.cores[k], &b.cores[k]);
        let left = if k == 0 { 1 } else { ca.left + cb.left };
        let right = if k == l - 1 { 1 } else { ca.right + cb.right };
        let mut core = Core::zeros(left, ca.out, ca.inp, right);
        let (lo_b, ro_b) = (if k == 0 { 0 } else { ca.left }, if k == l - 1 { 0 } else { ca.right });
        for (src, loff, roff) in [(ca, 0usize, 0usize), (cb, lo_b, ro_b)] {
            for lb in 0..src.left {
                for p in 0..src.phys() {
                    for rb in 0..src.right {
                        let dst = ((lb + loff) * src.phys() + p) * right + rb + roff;
                        core.data[dst] = src.data[(lb * src.phys() + p) * src.right + rb];
                    }
                }
            }
        }
        cores.push(core);
    }
    TensorTrain::from_cores(cores)
}

/// `a ⊗ m`: appends `m` as a trailing bond-1 core.
pub fn tensor_append(a: &TensorTrain, m: &CMat) -> TensorTrain {
    let mut cores = a.cores.clone();
    cores.push(Core::from_matrix(m));
    TensorTrain { cores }
}

/// Concatenation `a ⊗ b` of two trains.
pub fn tensor_concat(a: &TensorTrain, b: &TensorTrain) -> TensorTrain {
    let mut cores = a.cores.clone();
    cores.extend(b.cores.iter().cloned());
    TensorTrain { cores }
}

/// Contracts the `out` legs of the trailing `rows.len()` sites with the given
/// row vectors. Those sites must have unit `in` dimension.
pub fn contract_trailing(tt: &TensorTrain, rows: &[CMat]) -> Result<TensorTrain> {
    let l = tt.len();
    if rows.len() >= l {
        return Err(Error::Shape("cannot contract every site of a train".into()));
    }
    let mut carry = vec![C64::new(1.0, 0.0)];
    for (s, row) in rows.iter().enumerate().rev() {
        let core = &tt.cores[l - rows.len() + s];
        if core.inp != 1 || row.nrows() != 1 || row.ncols() != core.out {
            return Err(Error::Shape(format!(
                "site {} has out {} / in {}, row has {} columns",
                l - rows.len() + s,
                core.out,
                core.inp,
                row.ncols()
            )));
        }
        let mut next = vec![C64::new(0.0, 0.0); core.left];
        for a in 0..core.left {
            let mut acc = C64::new(0.0, 0.0);
            for o in 0..core.out {
                let w = row[(0, o)];
                for r in 0..core.right {
                    acc += w * core.at(a, o, 0, r) * carry[r];
                }
            }
            next[a] = acc;
        }
        carry = next;
    }
    let mut cores: Vec<Core> = tt.cores[..l - rows.len()].to_vec();
    let last = cores.pop().expect("at least one site remains");
    let data = matmul_rm(&last.data, last.left * last.phys(), last.right, &carry, 1);
    cores.push(Core::new(last.left, last.out, last.inp, 1, data));
    TensorTrain::from_cores(cores)
}

/// Zip-up contraction of `a · b` (the `in` legs of `a` meet the `out` legs
/// of `b`) with a truncated SVD after every site.
pub fn zip_up(a: &TensorTrain, b: &TensorTrain, policy: &SvdPolicy) -> Result<TensorTrain> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("zip_up: {} sites vs {}", a.len(), b.len())));
    }
    for (k, (ca, cb)) in a.cores.iter().zip(&b.cores).enumerate() {
        if ca.inp != cb.out {
            return Err(Error::Shape(format!(
                "zip_up: site {k} inner dimensions {} vs {}",
                ca.inp, cb.out
            )));
        }
    }
    let l = a.len();
    let mut cores = Vec::with_capacity(l);
    // carry[chi, la, lb]
    let mut carry = vec![C64::new(1.0, 0.0)];
    let mut chi = 1usize;
    for k in 0..l {
        let (ca, cb) = (&a.cores[k], &b.cores[k]);
        let (la, oa, m, ra) = (ca.left, ca.out, ca.inp, ca.right);
        let (lb, ib, rb) = (cb.left, cb.inp, cb.right);
        // carry as (chi, lb, la)
        let c_perm = permute_3(&carry, chi, la, lb, [0, 2, 1]);
        // X[(chi, lb), (oa, m, ra)]
        let x = matmul_rm(&c_perm, chi * lb, la, &ca.data, oa * m * ra);
        // reorder X to (chi, oa, ra, lb, m)
        let mut xp = vec![C64::new(0.0, 0.0); x.len()];
        for c0 in 0..chi {
            for l0 in 0..lb {
                for o in 0..oa {
                    for mm in 0..m {
                        for r0 in 0..ra {
                            let src = (((c0 * lb + l0) * oa + o) * m + mm) * ra + r0;
                            let dst = (((c0 * oa + o) * ra + r0) * lb + l0) * m + mm;
                            xp[dst] = x[src];
                        }
                    }
                }
            }
        }
        // T'[(chi, oa, ra), (ib, rb)]
        let t = matmul_rm(&xp, chi * oa * ra, lb * m, &cb.data, ib * rb);
        // reorder to (chi, oa, ib, ra, rb)
        let mut tp = vec![C64::new(0.0, 0.0); t.len()];
        for c0 in 0..chi {
            for o in 0..oa {
                for r0 in 0..ra {
                    for i in 0..ib {
                        for r1 in 0..rb {
                            let src = (((c0 * oa + o) * ra + r0) * ib + i) * rb + r1;
                            let dst = (((c0 * oa + o) * ib + i) * ra + r0) * rb + r1;
                            tp[dst] = t[src];
                        }
                    }
                }
            }
        }
        if k + 1 == l {
            cores.push(Core::new(chi, oa, ib, 1, tp));
            break;
        }
        let rows = chi * oa * ib;
        let cols = ra * rb;
        let mat = CMat::from_row_slice(rows, cols, &tp);
        let dec = svd(mat);
        let norm = dec.s.iter().map(|s| s * s).sum::<f64>().sqrt();
        let r = truncation_rank(&dec.s, policy.eps, norm, policy.max_bond);
        let u = dec.u.columns(0, r).into_owned();
        cores.push(Core::new(chi, oa, ib, r, to_row_major(&u)));
        let mut sv = dec.vt.rows(0, r).into_owned();
        for i in 0..r {
            for v in sv.row_mut(i).iter_mut() {
                *v *= dec.s[i];
            }
        }
        carry = to_row_major(&sv);
        chi = r;
    }
    TensorTrain::from_cores(cores)
}

/// TT rounding: right-to-left orthogonalization followed by a left-to-right
/// truncated SVD sweep with cutoffs relative to the full norm.
pub fn recompress(tt: &TensorTrain, policy: &SvdPolicy) -> TensorTrain {
    let mut cores = tt.cores.clone();
    let l = cores.len();
    if l == 1 {
        return tt.clone();
    }
    for k in (1..l).rev() {
        let c = &cores[k];
        let (left, cols) = (c.left, c.phys() * c.right);
        let m = CMat::from_row_slice(left, cols, &c.data);
        let qr = m.adjoint().qr();
        let q = qr.q(); // cols × min
        let r = qr.r(); // min × left
        let rank = q.ncols();
        let new_core = q.adjoint(); // rank × cols
        let (out, inp, right) = (c.out, c.inp, c.right);
        cores[k] = Core::new(rank, out, inp, right, to_row_major(&new_core));
        // previous core absorbs r^† (left × rank)
        let rt = to_row_major(&r.adjoint());
        let p = &cores[k - 1];
        let data = matmul_rm(&p.data, p.left * p.phys(), left, &rt, rank);
        cores[k - 1] = Core::new(p.left, p.out, p.inp, rank, data);
    }
    let reference = {
        let c0 = &cores[0];
        c0.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    };
    for k in 0..l - 1 {
        let c = &cores[k];
        let rows = c.left * c.phys();
        let m = CMat::from_row_slice(rows, c.right, &c.data);
        let dec = svd(m);
        let r = truncation_rank(&dec.s, policy.eps, reference, policy.max_bond);
        let u = dec.u.columns(0, r).into_owned();
        let (left, out, inp, right) = (c.left, c.out, c.inp, c.right);
        cores[k] = Core::new(left, out, inp, r, to_row_major(&u));
        let mut sv = dec.vt.rows(0, r).into_owned();
        for i in 0..r {
            for v in sv.row_mut(i).iter_mut() {
                *v *= dec.s[i];
            }
        }
        let svr = to_row_major(&sv);
        let n = &cores[k + 1];
        let data = matmul_rm(&svr, r, right, &n.data, n.phys() * n.right);
        cores[k + 1] = Core::new(r, n.out, n.inp, n.right, data);
    }
    TensorTrain { cores }
}
