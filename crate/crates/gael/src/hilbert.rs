//! Dense and sparse operator algebra on truncated tensor-product spaces.
//!
//! A [`SpaceLayout`] records the local dimension of each subsystem in tensor
//! order. Operators are plain `DMatrix<Complex64>` values; [`SparseOp`] is a
//! triplet wrapper used in the trajectory stepper, where the step operators
//! (ladder products, Pauli strings) are very sparse and the density matrix is
//! dense.

use num_complex::Complex64;

use crate::moments::{CMat, CVec};
use crate::{GaelError, Result};

/// Local dimensions of the tensor factors, in tensor (Kronecker) order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpaceLayout {
    dims: Vec<usize>,
}

impl SpaceLayout {
    pub fn new(dims: Vec<usize>) -> Self {
        assert!(!dims.is_empty() && dims.iter().all(|&d| d > 0));
        Self { dims }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn n_sites(&self) -> usize {
        self.dims.len()
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    /// Embeds a single-site operator as `I (x) ... (x) op (x) ... (x) I`.
    pub fn op_on(&self, site: usize, op: &CMat) -> CMat {
        assert_eq!(op.nrows(), self.dims[site], "operator does not fit site");
        let mut out = identity(1);
        for (k, &d) in self.dims.iter().enumerate() {
            out = if k == site {
                out.kronecker(op)
            } else {
                out.kronecker(&identity(d))
            };
        }
        out
    }

    /// Flat index of a multi-index in row-major (big-endian) tensor order.
    fn flat(&self, multi: &[usize]) -> usize {
        let mut idx = 0;
        for (k, &d) in self.dims.iter().enumerate() {
            idx = idx * d + multi[k];
        }
        idx
    }

    fn unflatten(&self, mut idx: usize, multi: &mut [usize]) {
        for k in (0..self.dims.len()).rev() {
            multi[k] = idx % self.dims[k];
            idx /= self.dims[k];
        }
    }

    /// Traces out every site not listed in `keep` (order within `keep` must
    /// be increasing; the result keeps tensor order).
    pub fn partial_trace(&self, rho: &CMat, keep: &[usize]) -> Result<CMat> {
        let n = self.n_sites();
        if keep.windows(2).any(|w| w[0] >= w[1]) || keep.iter().any(|&s| s >= n) {
            return Err(GaelError::InvalidBipartition(format!(
                "keep sites {keep:?} must be strictly increasing and < {n}"
            )));
        }
        if rho.nrows() != self.total_dim() {
            return Err(GaelError::DimensionMismatch {
                context: "partial trace input",
                expected: self.total_dim(),
                got: rho.nrows(),
            });
        }
        let kept_dims: Vec<usize> = keep.iter().map(|&s| self.dims[s]).collect();
        let kept = SpaceLayout::new(kept_dims);
        let traced: Vec<usize> = (0..n).filter(|s| !keep.contains(s)).collect();
        let mut out = CMat::zeros(kept.total_dim(), kept.total_dim());
        let mut mi = vec![0usize; n];
        let mut mj = vec![0usize; n];
        let mut ki = vec![0usize; keep.len()];
        let mut kj = vec![0usize; keep.len()];
        for i in 0..rho.nrows() {
            self.unflatten(i, &mut mi);
            for j in 0..rho.ncols() {
                self.unflatten(j, &mut mj);
                if traced.iter().any(|&s| mi[s] != mj[s]) {
                    continue;
                }
                for (t, &s) in keep.iter().enumerate() {
                    ki[t] = mi[s];
                    kj[t] = mj[s];
                }
                out[(kept.flat(&ki), kept.flat(&kj))] += rho[(i, j)];
            }
        }
        Ok(out)
    }

    /// Transposes the listed sites in place (partial transposition).
    pub fn partial_transpose(&self, rho: &CMat, sites: &[usize]) -> Result<CMat> {
        let n = self.n_sites();
        if sites.iter().any(|&s| s >= n) {
            return Err(GaelError::InvalidBipartition(format!(
                "transpose sites {sites:?} out of range (< {n})"
            )));
        }
        let d = self.total_dim();
        if rho.nrows() != d {
            return Err(GaelError::DimensionMismatch {
                context: "partial transpose input",
                expected: d,
                got: rho.nrows(),
            });
        }
        let mut out = CMat::zeros(d, d);
        let mut mi = vec![0usize; n];
        let mut mj = vec![0usize; n];
        for i in 0..d {
            self.unflatten(i, &mut mi);
            for j in 0..d {
                self.unflatten(j, &mut mj);
                let mut ti = mi.clone();
                let mut tj = mj.clone();
                for &s in sites {
                    ti[s] = mj[s];
                    tj[s] = mi[s];
                }
                out[(self.flat(&ti), self.flat(&tj))] = rho[(i, j)];
            }
        }
        Ok(out)
    }
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Truncated bosonic annihilation operator on an `n`-level Fock space.
pub fn annihilation(n: usize) -> CMat {
    let mut a = CMat::zeros(n, n);
    for k in 1..n {
        a[(k - 1, k)] = Complex64::from((k as f64).sqrt());
    }
    a
}

pub fn creation(n: usize) -> CMat {
    annihilation(n).adjoint()
}

pub fn number_op(n: usize) -> CMat {
    CMat::from_fn(n, n, |i, j| {
        if i == j { Complex64::from(i as f64) } else { Complex64::ZERO }
    })
}

/// Position quadrature, `q = (a + a^dag)/sqrt(2)`, so that `[q, p] = i`.
pub fn position(n: usize) -> CMat {
    let a = annihilation(n);
    (&a + a.adjoint()) / Complex64::from(2.0_f64.sqrt())
}

/// Momentum quadrature, `p = -i (a - a^dag)/sqrt(2)`.
pub fn momentum(n: usize) -> CMat {
    let a = annihilation(n);
    (&a - a.adjoint()) * Complex64::new(0.0, -1.0) / Complex64::from(2.0_f64.sqrt())
}

pub fn pauli_x() -> CMat {
    CMat::from_row_slice(2, 2, &[Complex64::ZERO, Complex64::ONE, Complex64::ONE, Complex64::ZERO])
}

pub fn pauli_y() -> CMat {
    CMat::from_row_slice(
        2,
        2,
        &[
            Complex64::ZERO,
            Complex64::new(0.0, -1.0),
            Complex64::new(0.0, 1.0),
            Complex64::ZERO,
        ],
    )
}

pub fn pauli_z() -> CMat {
    CMat::from_row_slice(
        2,
        2,
        &[Complex64::ONE, Complex64::ZERO, Complex64::ZERO, -Complex64::ONE],
    )
}

/// Qubit lowering operator `|g><e|`, with basis index 0 the `sigma_z = +1`
/// (excited) state and index 1 the ground state.
pub fn sigma_minus() -> CMat {
    CMat::from_row_slice(2, 2, &[Complex64::ZERO, Complex64::ZERO, Complex64::ONE, Complex64::ZERO])
}

pub fn sigma_plus() -> CMat {
    sigma_minus().adjoint()
}

/// Projector `|k><k|` as a density matrix on an `n`-level space.
pub fn fock_state(n: usize, k: usize) -> CMat {
    assert!(k < n);
    let mut rho = CMat::zeros(n, n);
    rho[(k, k)] = Complex64::ONE;
    rho
}

/// Truncated thermal state with mean occupation `nbar`, renormalized.
pub fn thermal_state(n: usize, nbar: f64) -> CMat {
    let mut rho = CMat::zeros(n, n);
    if nbar <= 0.0 {
        rho[(0, 0)] = Complex64::ONE;
        return rho;
    }
    let ratio = nbar / (nbar + 1.0);
    let mut w = 1.0;
    let mut z = 0.0;
    for k in 0..n {
        rho[(k, k)] = Complex64::from(w);
        z += w;
        w *= ratio;
    }
    rho / Complex64::from(z)
}

/// Pure-state density matrix from an (unnormalized) state vector.
pub fn pure_state(psi: &CVec) -> CMat {
    let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
    (psi * psi.adjoint()) / Complex64::from(norm2)
}

/// Quadrature operators `[q1, p1, q2, p2, ...]` for bosonic modes living on
/// the given sites of the layout.
pub fn quadrature_ops(layout: &SpaceLayout, mode_sites: &[usize]) -> Vec<CMat> {
    let mut ops = Vec::with_capacity(2 * mode_sites.len());
    for &site in mode_sites {
        let n = layout.dims()[site];
        ops.push(layout.op_on(site, &position(n)));
        ops.push(layout.op_on(site, &momentum(n)));
    }
    ops
}

/// Contraction `v^T r` of a coefficient vector with quadrature operators.
pub fn linear_op(r_ops: &[CMat], coeff: &CVec) -> CMat {
    assert_eq!(r_ops.len(), coeff.len());
    let d = r_ops[0].nrows();
    let mut out = CMat::zeros(d, d);
    for (op, &v) in r_ops.iter().zip(coeff.iter()) {
        if v != Complex64::ZERO {
            out += op * v;
        }
    }
    out
}

/// `tr(op rho)` without forming the full product.
pub fn expect(op: &CMat, rho: &CMat) -> Complex64 {
    let d = op.nrows();
    let mut acc = Complex64::ZERO;
    for i in 0..d {
        for j in 0..d {
            acc += op[(i, j)] * rho[(j, i)];
        }
    }
    acc
}

/// Sparse matrix in triplet form, specialized for accumulating products with
/// dense density matrices.
#[derive(Debug, Clone)]
pub struct SparseOp {
    dim: usize,
    entries: Vec<(usize, usize, Complex64)>,
}

impl SparseOp {
    pub fn from_dense(m: &CMat, tol: f64) -> Self {
        assert_eq!(m.nrows(), m.ncols());
        let cutoff = tol * m.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let mut entries = Vec::new();
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                let v = m[(i, j)];
                if v.norm() > cutoff {
                    entries.push((i, j, v));
                }
            }
        }
        Self { dim: m.nrows(), entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn to_dense(&self) -> CMat {
        let mut m = CMat::zeros(self.dim, self.dim);
        for &(i, j, v) in &self.entries {
            m[(i, j)] += v;
        }
        m
    }

    /// `out += alpha * self * rho`
    pub fn acc_left(&self, rho: &CMat, alpha: Complex64, out: &mut CMat) {
        for c in 0..rho.ncols() {
            for &(i, j, v) in &self.entries {
                out[(i, c)] += alpha * v * rho[(j, c)];
            }
        }
    }

    /// `out += alpha * rho * self^dag`
    pub fn acc_right_adjoint(&self, rho: &CMat, alpha: Complex64, out: &mut CMat) {
        // (rho s^dag)_{ik} = sum_j rho_{ij} conj(s_{kj})
        for &(k, j, v) in &self.entries {
            let w = alpha * v.conj();
            for i in 0..rho.nrows() {
                out[(i, k)] += w * rho[(i, j)];
            }
        }
    }

    /// `out += alpha * self * rho * self^dag`, using `tmp` as scratch.
    pub fn acc_sandwich(&self, rho: &CMat, alpha: Complex64, tmp: &mut CMat, out: &mut CMat) {
        tmp.fill(Complex64::ZERO);
        self.acc_left(rho, Complex64::ONE, tmp);
        self.acc_right_adjoint(tmp, alpha, out);
    }

    /// `tr(self * rho)`
    pub fn expect(&self, rho: &CMat) -> Complex64 {
        let mut acc = Complex64::ZERO;
        for &(i, j, v) in &self.entries {
            acc += v * rho[(j, i)];
        }
        acc
    }
}

/// Hermitian part `(m + m^dag)/2`.
pub fn hermitize(m: &CMat) -> CMat {
    (m + m.adjoint()) * Complex64::from(0.5)
}

/// Kronecker product convenience wrapper.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}
