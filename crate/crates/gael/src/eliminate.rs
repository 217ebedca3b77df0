//! Construction of the effective system-only stochastic master equation.
//!
//! Given the moment solution of a transducer and the system operators it
//! couples to, this module eliminates the transducer and returns a
//! system-space generator: an effective Hamiltonian, a set of Lindblad jump
//! operators with rates, and one measurement operator per homodyne channel.
//! Two coupling regimes are supported: static system operators and operators
//! oscillating at a single frequency (sideband measurement with detuned
//! local oscillators).

use num_complex::Complex64;

use crate::moments::{CMat, CVec, HomodyneChannel, MomentSolution, RMat};
use crate::{GaelError, Result};

/// How the system couples to the transducer, `H_int = s^T r`.
#[derive(Debug, Clone)]
pub enum SystemCoupling {
    /// Time-independent system operators; every `s_i` must be Hermitian.
    Static { s: Vec<CMat> },
    /// `s(t) = s_plus e^{i omega t} + s_minus e^{-i omega t}`, with
    /// `(s_plus)_i = (s_minus)_i^dag` elementwise.
    Oscillating { omega: f64, s_plus: Vec<CMat>, s_minus: Vec<CMat> },
}

/// Appendix-style positivity certificate for the decay matrix and its
/// measurement-corrected counterpart `P' = P - sum_m Lambda_m Lambda_m^dag`.
#[derive(Debug, Clone)]
pub struct PositivityCertificate {
    pub min_eig_p: f64,
    pub min_eig_pprime: f64,
    pub norm_p: f64,
    pub pass: bool,
}

/// Effective stochastic master equation on the system space.
///
/// The dynamics reads
/// `drho = -i[H, rho] dt + sum_i w_i D[J_i] rho dt + sum_m H[M_m] rho dW_m`,
/// with photocurrents `dI_m = <M_m + M_m^dag> dt + dW_m`.
#[derive(Debug, Clone)]
pub struct EffectiveSme {
    pub dim: usize,
    pub hamiltonian: CMat,
    /// Decay matrix: `P` in the quadrature basis (static coupling) or the
    /// Kossakowski matrix in the Hermitian operator basis (oscillating).
    pub decay_matrix: CMat,
    pub jump_ops: Vec<(f64, CMat)>,
    pub meas_ops: Vec<CMat>,
    /// Coefficient vectors of the measurement operators in the same basis as
    /// `decay_matrix`; used for the `P'` certification.
    pub meas_coeffs: Vec<CVec>,
    pub certificate: PositivityCertificate,
}

impl EffectiveSme {
    /// Deterministic generator as a matrix acting on column-major `vec(rho)`.
    pub fn deterministic_superop(&self) -> CMat {
        lindblad_superop(&self.hamiltonian, &self.jump_ops)
    }

    /// Photocurrent drift `<M_m + M_m^dag>` of channel `m` in state `rho`.
    pub fn current_drift(&self, m: usize, rho: &CMat) -> f64 {
        2.0 * crate::hilbert::expect(&self.meas_ops[m], rho).re
    }

    /// Human-readable report of rates, operators, and certificates.
    pub fn report(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(out, "effective SME on dimension {}", self.dim);
        let _ = writeln!(out, "hamiltonian:");
        let _ = write!(out, "{}", matrix_block(&self.hamiltonian));
        for (k, (w, op)) in self.jump_ops.iter().enumerate() {
            let _ = writeln!(out, "jump {k}: rate {w:.12e}");
            let _ = write!(out, "{}", matrix_block(op));
        }
        for (m, op) in self.meas_ops.iter().enumerate() {
            let _ = writeln!(out, "measurement {m}:");
            let _ = write!(out, "{}", matrix_block(op));
            let _ = writeln!(
                out,
                "  coefficients: {}",
                self.meas_coeffs[m]
                    .iter()
                    .map(|z| format!("({:.9e},{:.9e})", z.re, z.im))
                    .collect::<Vec<_>>()
                    .join(" ")
            );
        }
        let c = &self.certificate;
        let _ = writeln!(
            out,
            "positivity: min_eig_P {:.6e}, min_eig_Pprime {:.6e}, norm {:.6e}, pass {}",
            c.min_eig_p, c.min_eig_pprime, c.norm_p, c.pass
        );
        out
    }
}

fn matrix_block(m: &CMat) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols())
            .map(|j| format!("({:.9e},{:.9e})", m[(i, j)].re, m[(i, j)].im))
            .collect();
        let _ = writeln!(out, "  {}", row.join(" "));
    }
    out
}

fn complexify(m: &RMat) -> CMat {
    m.map(|x| Complex64::new(x, 0.0))
}

fn max_norm(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn inv_checked(m: &CMat, what: &'static str) -> Result<CMat> {
    let inv = m
        .clone()
        .try_inverse()
        .ok_or(GaelError::SingularMatrix { what, cond: f64::INFINITY })?;
    let cond = max_norm(m) * max_norm(&inv) * m.nrows() as f64;
    if !cond.is_finite() || cond > 1e14 {
        return Err(GaelError::SingularMatrix { what, cond });
    }
    Ok(inv)
}

/// `vec(x rho) = (I (x) x) vec(rho)` for column-major vec.
pub fn left_superop(x: &CMat) -> CMat {
    let d = x.nrows();
    CMat::identity(d, d).kronecker(x)
}

/// `vec(rho x) = (x^T (x) I) vec(rho)`.
pub fn right_superop(x: &CMat) -> CMat {
    let d = x.nrows();
    x.transpose().kronecker(&CMat::identity(d, d))
}

pub fn commutator_superop(x: &CMat) -> CMat {
    left_superop(x) - right_superop(x)
}

pub fn anticommutator_superop(x: &CMat) -> CMat {
    left_superop(x) + right_superop(x)
}

/// Superoperator of `-i[H, .] + sum_i w_i D[J_i]`.
pub fn lindblad_superop(h: &CMat, jumps: &[(f64, CMat)]) -> CMat {
    let d = h.nrows();
    let mut s = commutator_superop(h) * Complex64::new(0.0, -1.0);
    for (w, j) in jumps {
        let jd = j.adjoint();
        let jdj = &jd * j;
        let sandwich = jd.transpose().kronecker(j);
        s += (sandwich - anticommutator_superop(&jdj) * Complex64::from(0.5))
            * Complex64::from(*w);
    }
    let _ = d;
    s
}

/// Orthonormal Hermitian basis `{F_0 = I/sqrt(d), F_a traceless}` with
/// `tr(F_a F_b) = delta_ab`.
pub fn hermitian_basis(d: usize) -> Vec<CMat> {
    let mut basis = Vec::with_capacity(d * d);
    basis.push(CMat::identity(d, d) / Complex64::from((d as f64).sqrt()));
    let inv_sqrt2 = 1.0 / 2.0_f64.sqrt();
    for i in 0..d {
        for j in (i + 1)..d {
            let mut x = CMat::zeros(d, d);
            x[(i, j)] = Complex64::from(inv_sqrt2);
            x[(j, i)] = Complex64::from(inv_sqrt2);
            basis.push(x);
            let mut y = CMat::zeros(d, d);
            y[(i, j)] = Complex64::new(0.0, -inv_sqrt2);
            y[(j, i)] = Complex64::new(0.0, inv_sqrt2);
            basis.push(y);
        }
    }
    for l in 1..d {
        let norm = 1.0 / ((l * (l + 1)) as f64).sqrt();
        let mut z = CMat::zeros(d, d);
        for k in 0..l {
            z[(k, k)] = Complex64::from(norm);
        }
        z[(l, l)] = Complex64::from(-(l as f64) * norm);
        basis.push(z);
    }
    basis
}

/// Decomposes a Hermitian decay matrix into `(rate, eigenvector)` pairs.
/// Rates inside the clipping window `[-1e-8 |P|, 0]` are set to zero; a rate
/// below the window invalidates the elimination.
pub fn lindblad_decompose(p: &CMat) -> Result<Vec<(f64, CVec)>> {
    let ph = (p + p.adjoint()) * Complex64::from(0.5);
    let eig = ph.symmetric_eigen();
    let norm = eig.eigenvalues.iter().map(|w| w.abs()).fold(0.0, f64::max);
    let mut out = Vec::new();
    for (k, &w) in eig.eigenvalues.iter().enumerate() {
        if w < -1e-8 * norm {
            return Err(GaelError::NegativeDecay { eig: w, norm });
        }
        let w = if w < 0.0 { 0.0 } else { w };
        out.push((w, eig.eigenvectors.column(k).into_owned()));
    }
    Ok(out)
}

/// Reports the minimal eigenvalues of `P` and `P' = P - sum Lambda Lambda^dag`.
pub fn certify_positivity(p: &CMat, lambdas: &[CVec]) -> PositivityCertificate {
    let ph = (p + p.adjoint()) * Complex64::from(0.5);
    let eigs = ph.symmetric_eigenvalues();
    let min_eig_p = eigs.min();
    let norm_p = eigs.iter().map(|w| w.abs()).fold(0.0, f64::max);
    let mut pprime = ph.clone();
    for l in lambdas {
        pprime -= l * l.adjoint();
    }
    let min_eig_pprime = crate::moments::hermitian_min_eig(&pprime);
    let floor = -1e-8 * norm_p.max(1e-300);
    PositivityCertificate {
        min_eig_p,
        min_eig_pprime,
        norm_p,
        pass: min_eig_p >= floor && min_eig_pprime >= floor,
    }
}

fn check_hermitian(ops: &[CMat]) -> Result<()> {
    for op in ops {
        let defect = max_norm(&(op - op.adjoint()));
        if defect > 1e-12 * max_norm(op).max(1.0) {
            return Err(GaelError::NonSymmetricHamiltonian { defect });
        }
    }
    Ok(())
}

fn jump_ops_from_pairs(pairs: &[(f64, CVec)], ops: &[CMat]) -> Vec<(f64, CMat)> {
    let d = ops[0].nrows();
    let mut out = Vec::new();
    for (w, v) in pairs {
        if *w <= 0.0 {
            continue;
        }
        let mut j = CMat::zeros(d, d);
        for (k, op) in ops.iter().enumerate() {
            j += op * v[k];
        }
        if max_norm(&j) > 1e-14 {
            out.push((*w, j));
        }
    }
    out
}

/// Static elimination: effective Hamiltonian, decay matrix
/// `P = -(1/2)(A^-1(Gu - i sigma) + (Gu + i sigma^T)A^-T)`, and per-channel
/// measurement operators `i Lambda_m^T s`.
pub fn effective_static(m: &MomentSolution, s: &[CMat]) -> Result<EffectiveSme> {
    let dq = m.a.nrows();
    if s.len() != dq {
        return Err(GaelError::DimensionMismatch {
            context: "static coupling vector s",
            expected: dq,
            got: s.len(),
        });
    }
    check_hermitian(s)?;
    let d = s[0].nrows();

    let a = complexify(&m.a);
    let sig = complexify(&m.sigma);
    let gu = complexify(&m.gamma_u);
    let gc = complexify(&m.gamma_c);
    let i = Complex64::I;

    let ainv = inv_checked(&a, "drift matrix A")?;
    let ainv_t = ainv.transpose();

    // H = (i/4) s^T (A^-1 (Gu + i sigma) - (Gu - i sigma^T) A^-T) s
    let w_h = (&ainv * (&gu + &sig * i) - (&gu - sig.transpose() * i) * &ainv_t)
        * Complex64::new(0.0, 0.25);
    let mut ham = CMat::zeros(d, d);
    for j in 0..dq {
        for k in 0..dq {
            if w_h[(j, k)] != Complex64::ZERO {
                ham += &s[j] * &s[k] * w_h[(j, k)];
            }
        }
    }
    let defect = max_norm(&(&ham - ham.adjoint()));
    debug_assert!(defect <= 1e-10 * max_norm(&ham).max(1e-30), "H defect {defect}");
    let ham = (&ham + ham.adjoint()) * Complex64::from(0.5);

    // P = -(1/2)(A^-1 (Gu - i sigma) + (Gu + i sigma^T) A^-T)
    let p = (&ainv * (&gu - &sig * i) + (&gu + sig.transpose() * i) * &ainv_t)
        * Complex64::from(-0.5);
    let p = (&p + p.adjoint()) * Complex64::from(0.5);

    let pairs = lindblad_decompose(&p)?;
    let jump_ops = jump_ops_from_pairs(&pairs, s);

    // Lambda_m = (Gc - i sigma) Q^-T c_m + A^-1 (Gc c_m - sigma m_m)
    let q = complexify(&m.q);
    let qinv_t = inv_checked(&q.transpose(), "Riccati gain matrix Q")?;
    let mut meas_ops = Vec::new();
    let mut meas_coeffs = Vec::new();
    for ch in &m.static_channels {
        let c = complexify_vec(&ch.c);
        let mm = complexify_vec(&ch.m);
        let lambda =
            (&gc - &sig * i) * &qinv_t * &c + &ainv * (&gc * &c - &sig * &mm);
        let mut op = CMat::zeros(d, d);
        for (k, sk) in s.iter().enumerate() {
            op += sk * (lambda[k] * i);
        }
        meas_ops.push(op);
        meas_coeffs.push(lambda);
    }

    let certificate = certify_positivity(&p, &meas_coeffs);
    Ok(EffectiveSme {
        dim: d,
        hamiltonian: ham,
        decay_matrix: p,
        jump_ops,
        meas_ops,
        meas_coeffs,
        certificate,
    })
}

fn complexify_vec(v: &nalgebra::DVector<f64>) -> CVec {
    v.map(|x| Complex64::new(x, 0.0))
}

/// Deterministic generator of the static reduction in double-commutator form
/// (used to cross-check the Lindblad form).
pub fn static_double_commutator_superop(m: &MomentSolution, s: &[CMat]) -> Result<CMat> {
    let dq = m.a.nrows();
    let d = s[0].nrows();
    let a = complexify(&m.a);
    let ainv = inv_checked(&a, "drift matrix A")?;
    let gu = complexify(&m.gamma_u);
    let sig = complexify(&m.sigma);
    let g_coef = &ainv * &gu * Complex64::from(0.5);
    let s_coef = &ainv * &sig * Complex64::new(0.0, 0.5);
    let mut sup = CMat::zeros(d * d, d * d);
    for i in 0..dq {
        let ci = commutator_superop(&s[i]);
        for k in 0..dq {
            if g_coef[(i, k)] != Complex64::ZERO {
                sup += &ci * commutator_superop(&s[k]) * g_coef[(i, k)];
            }
            if s_coef[(i, k)] != Complex64::ZERO {
                sup += &ci * anticommutator_superop(&s[k]) * s_coef[(i, k)];
            }
        }
    }
    Ok(sup)
}

/// Deterministic generator of the oscillating reduction (Hermitian-basis
/// double-commutator form).
pub fn oscillating_superop(
    m: &MomentSolution,
    omega: f64,
    s_plus: &[CMat],
    s_minus: &[CMat],
) -> Result<CMat> {
    let dq = m.a.nrows();
    let d = s_plus[0].nrows();
    let a = complexify(&m.a);
    let gu = complexify(&m.gamma_u);
    let sig = complexify(&m.sigma);
    let i = Complex64::I;
    let eye = CMat::identity(dq, dq);
    let a_plus = inv_checked(&(&a + &eye * (i * omega)), "A + i omega")?;
    let a_minus = inv_checked(&(&a - &eye * (i * omega)), "A - i omega")?;

    let mut sup = CMat::zeros(d * d, d * d);
    let mut add_block = |ainv: &CMat, so: &[CMat], si: &[CMat]| {
        let g_coef = ainv * &gu * Complex64::from(0.5);
        let s_coef = ainv * &sig * Complex64::new(0.0, 0.5);
        for p in 0..dq {
            let cp = commutator_superop(&so[p]);
            for k in 0..dq {
                if g_coef[(p, k)] != Complex64::ZERO {
                    sup += &cp * commutator_superop(&si[k]) * g_coef[(p, k)];
                }
                if s_coef[(p, k)] != Complex64::ZERO {
                    sup += &cp * anticommutator_superop(&si[k]) * s_coef[(p, k)];
                }
            }
        }
    };
    add_block(&a_plus, s_plus, s_minus);
    add_block(&a_minus, s_minus, s_plus);
    Ok(sup)
}

/// Extracts `(H, K)` from a trace-preserving, Hermiticity-preserving
/// superoperator: `L(rho) = -i[H, rho] + K_ab (F_a rho F_b - {F_b F_a, rho}/2)`
/// over the traceless part of [`hermitian_basis`].
pub fn gks_decompose(sup: &CMat, d: usize) -> Result<(CMat, CMat)> {
    assert_eq!(sup.nrows(), d * d);
    let basis = hermitian_basis(d);
    let nb = basis.len();
    // c_ab = <F_b^T (x) F_a, S>_HS over the orthonormal product basis
    let mut c = CMat::zeros(nb, nb);
    for a in 0..nb {
        for b in 0..nb {
            let e = basis[b].transpose().kronecker(&basis[a]);
            let mut acc = Complex64::ZERO;
            for (x, y) in e.iter().zip(sup.iter()) {
                acc += x.conj() * y;
            }
            c[(a, b)] = acc;
        }
    }
    // B = (1/sqrt(d)) sum_{a>=1} c_{a0} F_a; H = i(B - B^dag)/2
    let mut bop = CMat::zeros(d, d);
    let root_d = (d as f64).sqrt();
    for a in 1..nb {
        bop += &basis[a] * (c[(a, 0)] / Complex64::from(root_d));
    }
    let ham = (&bop - bop.adjoint()) * Complex64::new(0.0, 0.5);
    let k = c.view((1, 1), (nb - 1, nb - 1)).into_owned();
    let k = (&k + k.adjoint()) * Complex64::from(0.5);
    Ok((ham, k))
}

fn theta_vector(
    gc: &CMat,
    sig: &CMat,
    q: &CMat,
    a: &CMat,
    delta: f64,
    c_plus: &CVec,
    m_plus: &CVec,
) -> Result<CVec> {
    let dq = a.nrows();
    let i = Complex64::I;
    let eye = CMat::identity(dq, dq);
    let q_shift = (q + &eye * (i * delta)).transpose();
    let q_inv_t = inv_checked(&q_shift, "Q + i Delta")?;
    let a_shift = a - &eye * (i * delta);
    let a_inv = inv_checked(&a_shift, "A - i Delta")?;
    Ok((gc - sig * i) * q_inv_t * c_plus + a_inv * (gc * c_plus - sig * m_plus))
}

/// Oscillating elimination: deterministic part from the `(A +- i omega)^-1`
/// double commutators, Lindblad form by expansion over a Hermitian operator
/// basis, and measurement operators assembled per local-oscillator detuning.
pub fn effective_oscillating(
    m: &MomentSolution,
    omega: f64,
    s_plus: &[CMat],
    s_minus: &[CMat],
    channels: &[HomodyneChannel],
) -> Result<EffectiveSme> {
    let dq = m.a.nrows();
    if s_plus.len() != dq || s_minus.len() != dq {
        return Err(GaelError::DimensionMismatch {
            context: "oscillating coupling vectors",
            expected: dq,
            got: s_plus.len().min(s_minus.len()),
        });
    }
    for (p, mi) in s_plus.iter().zip(s_minus.iter()) {
        let defect = max_norm(&(p - mi.adjoint()));
        if defect > 1e-12 * max_norm(p).max(1.0) {
            return Err(GaelError::NonSymmetricHamiltonian { defect });
        }
    }
    if omega == 0.0 {
        return Err(GaelError::UnsupportedDetuning { detuning: 0.0, omega });
    }
    let d = s_plus[0].nrows();

    let sup = oscillating_superop(m, omega, s_plus, s_minus)?;
    let (ham, k) = gks_decompose(&sup, d)?;
    let basis = hermitian_basis(d);
    let pairs = lindblad_decompose(&k)?;
    let jump_ops = jump_ops_from_pairs(&pairs, &basis[1..]);

    let a = complexify(&m.a);
    let gc = complexify(&m.gamma_c);
    let sig = complexify(&m.sigma);
    let q = complexify(&m.q);
    let i = Complex64::I;

    let mut meas_ops = Vec::new();
    let mut meas_coeffs = Vec::new();
    for (idx, ch) in channels.iter().enumerate() {
        let delta = ch.detuning;
        if delta != omega && delta != -omega {
            return Err(GaelError::UnsupportedDetuning { detuning: delta, omega });
        }
        let theta = theta_vector(&gc, &sig, &q, &a, delta, &ch.c_plus(), &ch.m_plus())?;
        let xi = theta_vector(&gc, &sig, &q, &a, -delta, &ch.c_minus(), &ch.m_minus())?;
        let mut op = CMat::zeros(d, d);
        // Lambda = i Theta^T s_+ + i Xi^T s_-  (Delta = -omega), roles of
        // Theta and Xi swap on the other sideband.
        let (co_plus, co_minus) = if delta == -omega { (&theta, &xi) } else { (&xi, &theta) };
        for kq in 0..dq {
            op += &s_plus[kq] * (co_plus[kq] * i) + &s_minus[kq] * (co_minus[kq] * i);
        }
        // expansion over the traceless basis for the backing certificate
        let nb = basis.len();
        let mut u = CVec::zeros(nb - 1);
        for a_ix in 1..nb {
            u[a_ix - 1] = (&basis[a_ix] * &op).trace();
        }
        meas_ops.push(op);
        meas_coeffs.push(u);
        let _ = idx;
    }

    let certificate = certify_positivity(&k, &meas_coeffs);
    Ok(EffectiveSme {
        dim: d,
        hamiltonian: ham,
        decay_matrix: k,
        jump_ops,
        meas_ops,
        meas_coeffs,
        certificate,
    })
}

/// Dispatches on the coupling regime. For oscillating couplings the original
/// (detuned) channels of the transducer must be supplied.
pub fn eliminate(
    m: &MomentSolution,
    coupling: &SystemCoupling,
    channels: &[HomodyneChannel],
) -> Result<EffectiveSme> {
    match coupling {
        SystemCoupling::Static { s } => effective_static(m, s),
        SystemCoupling::Oscillating { omega, s_plus, s_minus } => {
            effective_oscillating(m, *omega, s_plus, s_minus, channels)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{identity, pauli_z, sigma_minus, sigma_plus};
    use crate::moments::{GaussianTransducer, HomodyneChannel, RVec};

    fn thermal_jumps(kappa: f64, nbar: f64) -> Vec<CVec> {
        let i = Complex64::I;
        let one = Complex64::ONE;
        vec![
            CVec::from_vec(vec![one, i]) * Complex64::from((kappa * (nbar + 1.0) / 2.0).sqrt()),
            CVec::from_vec(vec![one, -i]) * Complex64::from((kappa * nbar / 2.0).sqrt()),
        ]
    }

    fn thermal_channel(kappa: f64, nbar: f64, detuning: f64) -> HomodyneChannel {
        HomodyneChannel::new(
            RVec::from_vec(vec![(kappa / (2.0 * (2.0 * nbar + 1.0))).sqrt(), 0.0]),
            RVec::from_vec(vec![0.0, (kappa * (2.0 * nbar + 1.0) / 2.0).sqrt()]),
            detuning,
        )
    }

    fn qnd_setup(kappa: f64, nbar: f64, chi: f64, phi: f64) -> (MomentSolution, Vec<CMat>) {
        let t = GaussianTransducer::new(
            1,
            RMat::zeros(2, 2),
            thermal_jumps(kappa, nbar),
            vec![thermal_channel(kappa, nbar, 0.0)],
        )
        .unwrap();
        let m = MomentSolution::solve(&t).unwrap();
        let z = pauli_z();
        let s = vec![&z * Complex64::from(chi * phi.cos()), &z * Complex64::from(-chi * phi.sin())];
        (m, s)
    }

    fn max_diff(a: &CMat, b: &CMat) -> f64 {
        max_norm(&(a - b))
    }

    #[test]
    fn qnd_decay_matrix_and_hamiltonian() {
        let (kappa, nbar) = (1.3, 2.0);
        let (m, s) = qnd_setup(kappa, nbar, 0.1, 0.7);
        let sme = effective_static(&m, &s).unwrap();
        assert!(max_norm(&sme.hamiltonian) < 1e-12);
        let i = Complex64::I;
        let sig = complexify(&m.sigma);
        let expect = (CMat::identity(2, 2) * Complex64::from(2.0 * nbar + 1.0) - sig * i)
            * Complex64::from(2.0 / kappa);
        assert!(max_diff(&sme.decay_matrix, &expect) < 1e-9);
        // eigenvalues {2(2nbar+2)/kappa, 4nbar/kappa}
        let eigs = sme.decay_matrix.symmetric_eigenvalues();
        let mut e: Vec<f64> = eigs.iter().copied().collect();
        e.sort_by(f64::total_cmp);
        assert!((e[0] - 4.0 * nbar / kappa).abs() < 1e-9);
        assert!((e[1] - 2.0 * (2.0 * nbar + 2.0) / kappa).abs() < 1e-9);
        assert!(sme.certificate.pass);
    }

    #[test]
    fn qnd_generator_is_pure_dephasing() {
        let (kappa, nbar, chi) = (1.0, 1.5, 0.2);
        let (m, s) = qnd_setup(kappa, nbar, chi, 1.1);
        let sme = effective_static(&m, &s).unwrap();
        let rate = 2.0 * chi * chi * (2.0 * nbar + 1.0) / kappa;
        let reference = lindblad_superop(&CMat::zeros(2, 2), &[(rate, pauli_z())]);
        assert!(max_diff(&sme.deterministic_superop(), &reference) < 1e-10);
    }

    #[test]
    fn qnd_measurement_operator_closed_form() {
        let (kappa, nbar, chi, phi) = (1.0, 2.0, 0.1, 0.7);
        let (m, s) = qnd_setup(kappa, nbar, chi, phi);
        let sme = effective_static(&m, &s).unwrap();
        let amp = (2.0 * chi * chi / (kappa * (2.0 * nbar + 1.0))).sqrt();
        let factor = Complex64::new(0.0, -1.0)
            * (Complex64::from(2.0 * nbar * phi.cos()) + Complex64::new(0.0, -phi).exp())
            * Complex64::from(amp);
        let expect = pauli_z() * factor;
        assert!(max_diff(&sme.meas_ops[0], &expect) < 1e-9);
    }

    #[test]
    fn qnd_current_drift_tracks_sigma_z() {
        let (kappa, nbar, chi, phi) = (1.0, 1.0, 0.3, 0.9);
        let (m, s) = qnd_setup(kappa, nbar, chi, phi);
        let sme = effective_static(&m, &s).unwrap();
        let up = crate::hilbert::fock_state(2, 0); // sigma_z = +1
        let drift = sme.current_drift(0, &up);
        let expect = -(8.0 * chi * chi / (kappa * (2.0 * nbar + 1.0))).sqrt() * phi.sin();
        assert!((drift - expect).abs() < 1e-9);
        // maximally mixed state carries no signal
        let mixed = identity(2) * Complex64::from(0.5);
        assert!(sme.current_drift(0, &mixed).abs() < 1e-12);
        // phi = 0: no sigma_z drift
        let (m0, s0) = qnd_setup(kappa, nbar, chi, 0.0);
        let sme0 = effective_static(&m0, &s0).unwrap();
        assert!(sme0.current_drift(0, &up).abs() < 1e-12);
    }

    #[test]
    fn qnd_zero_temperature_matches_expansion_reference() {
        // at nbar = 0 the reduction must coincide with the expansion-method
        // generator: rate 2 chi^2/kappa dephasing? no -- single channel 4/kappa
        let (kappa, chi, phi) = (1.0, 0.1, 0.4);
        let (m, s) = qnd_setup(kappa, 0.0, chi, phi);
        let sme = effective_static(&m, &s).unwrap();
        // single surviving decay channel
        assert_eq!(sme.jump_ops.len(), 1);
        let eigs = sme.decay_matrix.symmetric_eigenvalues();
        let mut e: Vec<f64> = eigs.iter().copied().collect();
        e.sort_by(f64::total_cmp);
        assert!(e[0].abs() < 1e-10);
        assert!((e[1] - 4.0 / kappa).abs() < 1e-10);
        // measurement operator sqrt(2 chi^2/kappa) e^{-i(phi+pi/2)} sigma_z
        let amp = (2.0 * chi * chi / kappa).sqrt();
        let expect = pauli_z()
            * (Complex64::new(0.0, -(phi + std::f64::consts::FRAC_PI_2)).exp()
                * Complex64::from(amp));
        assert!(max_diff(&sme.meas_ops[0], &expect) < 1e-10);
        // deterministic part: 2 chi^2/kappa dephasing, identical to reference
        let reference = lindblad_superop(
            &CMat::zeros(2, 2),
            &[(2.0 * chi * chi / kappa, pauli_z())],
        );
        assert!(max_diff(&sme.deterministic_superop(), &reference) < 1e-12);
    }

    #[test]
    fn zero_coupling_gives_null_generator() {
        let (m, _) = qnd_setup(1.0, 1.0, 0.1, 0.0);
        let s = vec![CMat::zeros(2, 2), CMat::zeros(2, 2)];
        let sme = effective_static(&m, &s).unwrap();
        assert!(max_norm(&sme.hamiltonian) < 1e-15);
        assert!(sme.jump_ops.is_empty());
        assert!(max_norm(&sme.meas_ops[0]) < 1e-15);
    }

    #[test]
    fn lindblad_and_double_commutator_forms_agree() {
        // QND plus a randomized single-mode transducer with a generic
        // Hermitian coupling.
        let (m, s) = qnd_setup(1.0, 2.0, 0.15, 0.3);
        let sme = effective_static(&m, &s).unwrap();
        let dc = static_double_commutator_superop(&m, &s).unwrap();
        assert!(max_diff(&sme.deterministic_superop(), &dc) < 1e-10);

        let mut r = RMat::zeros(2, 2);
        r[(0, 0)] = 0.4;
        r[(1, 1)] = -0.2;
        r[(0, 1)] = 0.1;
        r[(1, 0)] = 0.1;
        let t = GaussianTransducer::new(1, r, thermal_jumps(0.8, 0.6), vec![]).unwrap();
        let m2 = MomentSolution::solve(&t).unwrap();
        let s2 = vec![
            CMat::from_row_slice(
                2,
                2,
                &[
                    Complex64::from(0.3),
                    Complex64::new(0.1, 0.2),
                    Complex64::new(0.1, -0.2),
                    Complex64::from(-0.5),
                ],
            ),
            CMat::from_row_slice(
                2,
                2,
                &[
                    Complex64::from(-0.1),
                    Complex64::new(0.4, -0.3),
                    Complex64::new(0.4, 0.3),
                    Complex64::from(0.2),
                ],
            ),
        ];
        let sme2 = effective_static(&m2, &s2).unwrap();
        let dc2 = static_double_commutator_superop(&m2, &s2).unwrap();
        assert!(max_diff(&sme2.deterministic_superop(), &dc2) < 1e-10);
    }

    #[test]
    fn deterministic_part_is_trace_preserving() {
        let (m, s) = qnd_setup(1.0, 2.0, 0.1, 0.5);
        let sme = effective_static(&m, &s).unwrap();
        let sup = sme.deterministic_superop();
        let d = sme.dim;
        let rho = CMat::from_fn(d, d, |i, j| Complex64::new((i + j) as f64, i as f64 - j as f64));
        let rho = (&rho + rho.adjoint()) * Complex64::from(0.5);
        let v = CVec::from_iterator(d * d, rho.iter().copied());
        let lv = &sup * v;
        let out = CMat::from_iterator(d, d, lv.iter().copied());
        assert!(out.trace().norm() < 1e-10);
    }

    #[test]
    fn unconditional_part_ignores_conditional_covariance() {
        let (m, s) = qnd_setup(1.0, 2.0, 0.1, 0.5);
        let sme = effective_static(&m, &s).unwrap();
        let mut m_perturbed = m.clone();
        m_perturbed.gamma_c = &m.gamma_c * 1.5;
        let sme_p = effective_static(&m_perturbed, &s).unwrap();
        assert!(max_diff(&sme.hamiltonian, &sme_p.hamiltonian) < 1e-12);
        assert!(max_diff(&sme.decay_matrix, &sme_p.decay_matrix) < 1e-12);
        // the measurement term does depend on it
        assert!(max_diff(&sme.meas_ops[0], &sme_p.meas_ops[0]) > 1e-6);
    }

    #[test]
    fn lindblad_decompose_identity_and_reconstruction() {
        let p = CMat::identity(2, 2);
        let pairs = lindblad_decompose(&p).unwrap();
        assert_eq!(pairs.len(), 2);
        assert!(pairs.iter().all(|(w, _)| (w - 1.0).abs() < 1e-14));

        let m = CMat::from_fn(4, 4, |i, j| Complex64::new((i * j) as f64 * 0.2, i as f64 - j as f64));
        let p = &m * m.adjoint();
        let pairs = lindblad_decompose(&p).unwrap();
        let mut rec = CMat::zeros(4, 4);
        for (w, v) in &pairs {
            rec += (v * v.adjoint()) * Complex64::from(*w);
        }
        assert!(max_diff(&rec, &p) < 1e-10 * max_norm(&p));
    }

    #[test]
    fn lindblad_decompose_rejects_negative_decay() {
        let mut p = CMat::identity(2, 2);
        p[(1, 1)] = Complex64::from(-1.0);
        assert!(matches!(lindblad_decompose(&p), Err(GaelError::NegativeDecay { .. })));
    }

    #[test]
    fn certificate_with_zero_measurement_reduces_to_p() {
        let p = CMat::identity(3, 3);
        let cert = certify_positivity(&p, &[CVec::zeros(3)]);
        assert!(cert.pass);
        assert!((cert.min_eig_p - 1.0).abs() < 1e-14);
        assert!((cert.min_eig_pprime - 1.0).abs() < 1e-14);
    }

    #[test]
    fn qnd_certificate_passes_across_phase_and_temperature() {
        for &nbar in &[0.0, 0.5, 1.0, 2.0, 5.0] {
            for k in 0..8 {
                let phi = k as f64 * std::f64::consts::PI / 4.0;
                let (m, s) = qnd_setup(1.0, nbar, 0.1, phi);
                let sme = effective_static(&m, &s).unwrap();
                assert!(sme.certificate.pass, "nbar {nbar} phi {phi}");
            }
        }
    }

    #[test]
    fn hermitian_basis_is_orthonormal() {
        for d in [2usize, 3, 4] {
            let basis = hermitian_basis(d);
            assert_eq!(basis.len(), d * d);
            for (a, fa) in basis.iter().enumerate() {
                assert!(max_norm(&(fa - fa.adjoint())) < 1e-15);
                for (b, fb) in basis.iter().enumerate() {
                    let ip = (fa * fb).trace();
                    let expect = if a == b { Complex64::ONE } else { Complex64::ZERO };
                    assert!((ip - expect).norm() < 1e-13, "d {d} a {a} b {b}");
                }
            }
        }
    }

    fn jc_setup(
        kappa: f64,
        nbar: f64,
        g: f64,
        phi: f64,
        omega: f64,
        channel_detuning: f64,
    ) -> (MomentSolution, Vec<CMat>, Vec<CMat>, Vec<HomodyneChannel>) {
        let channels = vec![thermal_channel(kappa, nbar, channel_detuning)];
        let t = GaussianTransducer::new(
            1,
            RMat::identity(2, 2) * omega,
            thermal_jumps(kappa, nbar),
            channels.clone(),
        )
        .unwrap();
        let m = MomentSolution::solve(&t).unwrap();
        let w = g / 2.0_f64.sqrt();
        let ep = Complex64::new(0.0, phi).exp() * Complex64::from(w);
        let em = Complex64::new(0.0, -phi).exp() * Complex64::from(w);
        let s_plus = vec![sigma_plus() * ep, sigma_plus() * (ep * Complex64::I)];
        let s_minus = vec![
            sigma_minus() * em,
            sigma_minus() * (em * Complex64::new(0.0, -1.0)),
        ];
        (m, s_plus, s_minus, channels)
    }

    #[test]
    fn jc_rates_and_measurement_operator() {
        let (kappa, nbar, g, phi, omega) = (1.0, 2.0, 0.1, 0.6, 7.0);
        let (m, sp, sm, ch) = jc_setup(kappa, nbar, g, phi, omega, -omega);
        let sme = effective_oscillating(&m, omega, &sp, &sm, &ch).unwrap();

        // deterministic part: 4g^2/kappa {(nbar+1) D[sigma_-] + nbar D[sigma_+]}
        let reference = lindblad_superop(
            &CMat::zeros(2, 2),
            &[
                (4.0 * g * g * (nbar + 1.0) / kappa, sigma_minus()),
                (4.0 * g * g * nbar / kappa, sigma_plus()),
            ],
        );
        assert!(
            max_diff(&sme.deterministic_superop(), &reference) < 1e-10,
            "superop mismatch {}",
            max_diff(&sme.deterministic_superop(), &reference)
        );

        // measurement operator:
        // 2g/sqrt(kappa(2nbar+1)) [(nbar+1) sigma_- e^{-i(phi+pi/2)} - nbar sigma_+ e^{i(phi+pi/2)}]
        let amp = 2.0 * g / (kappa * (2.0 * nbar + 1.0)).sqrt();
        let ph = phi + std::f64::consts::FRAC_PI_2;
        let expect = sigma_minus()
            * (Complex64::new(0.0, -ph).exp() * Complex64::from(amp * (nbar + 1.0)))
            - sigma_plus() * (Complex64::new(0.0, ph).exp() * Complex64::from(amp * nbar));
        assert!(
            max_diff(&sme.meas_ops[0], &expect) < 1e-10,
            "meas mismatch {}",
            max_diff(&sme.meas_ops[0], &expect)
        );
        assert!(sme.certificate.pass);
    }

    #[test]
    fn jc_zero_temperature_matches_expansion_reference() {
        let (kappa, g, phi, omega) = (1.0, 0.1, 0.3, 5.0);
        let (m, sp, sm, ch) = jc_setup(kappa, 0.0, g, phi, omega, -omega);
        let sme = effective_oscillating(&m, omega, &sp, &sm, &ch).unwrap();
        let amp = 2.0 * g / kappa.sqrt();
        let ph = phi + std::f64::consts::FRAC_PI_2;
        let expect = sigma_minus() * (Complex64::new(0.0, -ph).exp() * Complex64::from(amp));
        assert!(max_diff(&sme.meas_ops[0], &expect) < 1e-10);
        let reference = lindblad_superop(
            &CMat::zeros(2, 2),
            &[(4.0 * g * g / kappa, sigma_minus())],
        );
        assert!(max_diff(&sme.deterministic_superop(), &reference) < 1e-10);
    }

    #[test]
    fn swapping_detuning_swaps_theta_and_xi() {
        let (kappa, nbar, g, phi, omega) = (1.0, 1.0, 0.2, 0.4, 6.0);
        let (m_a, sp, sm, ch_a) = jc_setup(kappa, nbar, g, phi, omega, -omega);
        let sme_a = effective_oscillating(&m_a, omega, &sp, &sm, &ch_a).unwrap();
        let (m_b, _, _, ch_b) = jc_setup(kappa, nbar, g, phi, omega, omega);
        let sme_b = effective_oscillating(&m_b, omega, &sp, &sm, &ch_b).unwrap();

        // direct evaluation of both displayed branches
        let a = complexify(&m_a.a);
        let gc = complexify(&m_a.gamma_c);
        let sig = complexify(&m_a.sigma);
        let q = complexify(&m_a.q);
        let ch = &ch_a[0];
        let theta =
            theta_vector(&gc, &sig, &q, &a, -omega, &ch.c_plus(), &ch.m_plus()).unwrap();
        let xi = theta_vector(&gc, &sig, &q, &a, omega, &ch.c_minus(), &ch.m_minus()).unwrap();
        let i = Complex64::I;
        let mut op_minus = CMat::zeros(2, 2);
        let mut op_plus = CMat::zeros(2, 2);
        for k in 0..2 {
            op_minus += &sp[k] * (theta[k] * i) + &sm[k] * (xi[k] * i);
        }
        // +omega branch: Theta/Xi computed with Delta = +omega
        let theta_p =
            theta_vector(&gc, &sig, &q, &a, omega, &ch.c_plus(), &ch.m_plus()).unwrap();
        let xi_p =
            theta_vector(&gc, &sig, &q, &a, -omega, &ch.c_minus(), &ch.m_minus()).unwrap();
        for k in 0..2 {
            op_plus += &sp[k] * (xi_p[k] * i) + &sm[k] * (theta_p[k] * i);
        }
        assert!(max_diff(&sme_a.meas_ops[0], &op_minus) < 1e-12);
        assert!(max_diff(&sme_b.meas_ops[0], &op_plus) < 1e-12);
        assert!(max_diff(&sme_a.meas_ops[0], &sme_b.meas_ops[0]) > 1e-3);
    }

    #[test]
    fn oscillating_rejects_mismatched_detuning() {
        let (kappa, nbar, g, phi, omega) = (1.0, 1.0, 0.2, 0.0, 6.0);
        let (m, sp, sm, _) = jc_setup(kappa, nbar, g, phi, omega, -omega);
        let bad = vec![thermal_channel(kappa, nbar, 2.5)];
        assert!(matches!(
            effective_oscillating(&m, omega, &sp, &sm, &bad),
            Err(GaelError::UnsupportedDetuning { .. })
        ));
    }

    #[test]
    fn zero_oscillating_coupling_gives_null_generator() {
        let (kappa, nbar, omega) = (1.0, 1.0, 6.0);
        let (m, _, _, ch) = jc_setup(kappa, nbar, 0.2, 0.0, omega, -omega);
        let zeros = vec![CMat::zeros(2, 2), CMat::zeros(2, 2)];
        let sme = effective_oscillating(&m, omega, &zeros, &zeros, &ch).unwrap();
        assert!(max_norm(&sme.hamiltonian) < 1e-15);
        assert!(sme.jump_ops.is_empty());
        assert!(max_norm(&sme.meas_ops[0]) < 1e-15);
    }

    #[test]
    fn gks_reconstructs_generator() {
        // extraction applied to a known Lindblad superoperator must return
        // the generator that rebuilds it exactly
        let h = pauli_z() * Complex64::from(0.7);
        let jumps = vec![(0.3, sigma_minus()), (0.1, pauli_z())];
        let sup = lindblad_superop(&h, &jumps);
        let (h2, k) = gks_decompose(&sup, 2).unwrap();
        let pairs = lindblad_decompose(&k).unwrap();
        let basis = hermitian_basis(2);
        let jumps2 = jump_ops_from_pairs(&pairs, &basis[1..]);
        let sup2 = lindblad_superop(&h2, &jumps2);
        assert!(max_diff(&sup, &sup2) < 1e-12);
        assert!(max_diff(&h, &h2) < 1e-12);
    }
}
