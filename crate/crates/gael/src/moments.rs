//! First- and second-moment dynamics of a Gaussian bosonic transducer.
//!
//! A transducer is a set of `N` bosonic modes with a quadratic Hamiltonian
//! `(1/2) r^T R r`, linear jump operators `xi_i^T r`, and homodyne channels
//! with measurement operators `(c_m + i m_m)^T r`. Its conditional state is
//! Gaussian, so everything needed for the elimination is carried by the
//! drift matrix `A`, the diffusion matrix `N`, and the steady-state
//! covariances of the unconditional (Lyapunov) and conditional (Riccati)
//! dynamics.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::{GaelError, Result};

pub type RMat = DMatrix<f64>;
pub type RVec = DVector<f64>;
pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Block-diagonal symplectic form for `n_modes` modes in the
/// `(q1, p1, ..., qN, pN)` ordering.
pub fn symplectic_form(n_modes: usize) -> RMat {
    let mut s = RMat::zeros(2 * n_modes, 2 * n_modes);
    for k in 0..n_modes {
        s[(2 * k, 2 * k + 1)] = 1.0;
        s[(2 * k + 1, 2 * k)] = -1.0;
    }
    s
}

/// A single homodyne detection channel, `lambda = (c + i m)^T r`, measured
/// with a local oscillator detuned by `detuning` from the reference frame.
#[derive(Debug, Clone)]
pub struct HomodyneChannel {
    pub c: RVec,
    pub m: RVec,
    pub detuning: f64,
}

impl HomodyneChannel {
    pub fn new(c: RVec, m: RVec, detuning: f64) -> Self {
        assert_eq!(c.len(), m.len(), "c and m must have equal length");
        Self { c, m, detuning }
    }

    pub fn is_static(&self) -> bool {
        self.detuning == 0.0
    }

    /// Complex vector `c + i m` of the measurement operator.
    pub fn xi(&self) -> CVec {
        CVec::from_iterator(
            self.c.len(),
            self.c.iter().zip(self.m.iter()).map(|(&c, &m)| Complex64::new(c, m)),
        )
    }

    /// Cosine component of the lab-frame coefficient `c(t) = c^c cos + c^s sin`.
    pub fn c_cos(&self) -> RVec {
        self.c.clone()
    }

    /// Sine component; equals `-sigma c` in the canonical ordering.
    pub fn c_sin(&self) -> RVec {
        let sigma = symplectic_form(self.c.len() / 2);
        -(&sigma * &self.c)
    }

    pub fn m_cos(&self) -> RVec {
        self.m.clone()
    }

    pub fn m_sin(&self) -> RVec {
        let sigma = symplectic_form(self.m.len() / 2);
        -(&sigma * &self.m)
    }

    /// Positive-frequency component, `c(t) = c^+ e^{i dt} + c^- e^{-i dt}`.
    pub fn c_plus(&self) -> CVec {
        complex_pair(&self.c_cos(), &self.c_sin())
    }

    pub fn c_minus(&self) -> CVec {
        self.c_plus().map(|z| z.conj())
    }

    pub fn m_plus(&self) -> CVec {
        complex_pair(&self.m_cos(), &self.m_sin())
    }

    pub fn m_minus(&self) -> CVec {
        self.m_plus().map(|z| z.conj())
    }
}

fn complex_pair(cos: &RVec, sin: &RVec) -> CVec {
    // x(t) = xc cos + xs sin = x+ e^{i dt} + x- e^{-i dt} with x+ = (xc - i xs)/2
    CVec::from_iterator(
        cos.len(),
        cos.iter().zip(sin.iter()).map(|(&c, &s)| Complex64::new(c / 2.0, -s / 2.0)),
    )
}

/// Result of splitting a detuned channel into two static ones.
#[derive(Debug, Clone)]
pub struct CoarseGrained {
    pub channels: [HomodyneChannel; 2],
    /// `|detuning| / spectral_radius(A)`; the rotating-wave treatment is
    /// trustworthy only when this is large.
    pub adiabaticity: f64,
    pub valid: bool,
}

/// Splits a detuned homodyne channel into two effective static channels
/// (cosine and sine quadratures of the record), each weighted `1/sqrt(2)`.
pub fn coarse_grain_channel(
    channel: &HomodyneChannel,
    drift_spectral_radius: f64,
    min_ratio: f64,
) -> Result<CoarseGrained> {
    if channel.is_static() {
        return Err(GaelError::ZeroDetuning);
    }
    let w = 1.0 / 2.0_f64.sqrt();
    let cos = HomodyneChannel::new(channel.c_cos() * w, channel.m_cos() * w, 0.0);
    let sin = HomodyneChannel::new(channel.c_sin() * w, channel.m_sin() * w, 0.0);
    let adiabaticity = if drift_spectral_radius > 0.0 {
        channel.detuning.abs() / drift_spectral_radius
    } else {
        f64::INFINITY
    };
    Ok(CoarseGrained {
        channels: [cos, sin],
        adiabaticity,
        valid: adiabaticity >= min_ratio,
    })
}

/// A Gaussian transducer: `N` modes, quadratic Hamiltonian matrix `R`,
/// linear jump vectors, and homodyne channels.
#[derive(Debug, Clone)]
pub struct GaussianTransducer {
    n_modes: usize,
    r_ham: RMat,
    jumps: Vec<CVec>,
    channels: Vec<HomodyneChannel>,
}

impl GaussianTransducer {
    pub fn new(
        n_modes: usize,
        r_ham: RMat,
        jumps: Vec<CVec>,
        channels: Vec<HomodyneChannel>,
    ) -> Result<Self> {
        assert!(n_modes > 0);
        let dim = 2 * n_modes;
        if r_ham.nrows() != dim || r_ham.ncols() != dim {
            return Err(GaelError::DimensionMismatch {
                context: "Hamiltonian matrix R",
                expected: dim,
                got: r_ham.nrows(),
            });
        }
        let scale = r_ham.amax().max(1.0);
        let defect = (&r_ham - r_ham.transpose()).amax();
        if defect > 1e-9 * scale {
            return Err(GaelError::NonSymmetricHamiltonian { defect });
        }
        let r_sym = (&r_ham + r_ham.transpose()) * 0.5;
        for (i, xi) in jumps.iter().enumerate() {
            if xi.len() != dim {
                return Err(GaelError::DimensionMismatch {
                    context: "jump vector",
                    expected: dim,
                    got: jumps[i].len(),
                });
            }
        }
        for ch in &channels {
            if ch.c.len() != dim {
                return Err(GaelError::DimensionMismatch {
                    context: "channel vector",
                    expected: dim,
                    got: ch.c.len(),
                });
            }
        }
        let t = Self { n_modes, r_ham: r_sym, jumps, channels };
        t.check_channel_backing()?;
        Ok(t)
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn dim(&self) -> usize {
        2 * self.n_modes
    }

    pub fn r_ham(&self) -> &RMat {
        &self.r_ham
    }

    pub fn jumps(&self) -> &[CVec] {
        &self.jumps
    }

    pub fn channels(&self) -> &[HomodyneChannel] {
        &self.channels
    }

    /// Every measured quadrature must be backed by the Lindblad terms:
    /// `sum_i conj(xi_i) xi_i^T - sum_m conj(zeta_m) zeta_m^T >= 0`, where
    /// `zeta_m = c_m + i m_m`. For a channel that measures one jump operator
    /// directly this reduces to `zeta_m` being among the jump vectors.
    fn check_channel_backing(&self) -> Result<()> {
        if self.channels.is_empty() {
            return Ok(());
        }
        let dim = self.dim();
        let mut jump_part = CMat::zeros(dim, dim);
        for xi in &self.jumps {
            jump_part += xi.map(|z| z.conj()) * xi.transpose();
        }
        let scale = jump_part.map(|z| z.norm()).max().max(1e-300);
        for (idx, ch) in self.channels.iter().enumerate() {
            // A detuned channel sweeps through both quadrature components.
            let zetas: Vec<CVec> = if ch.is_static() {
                vec![ch.xi()]
            } else {
                vec![
                    complex_join(&ch.c_cos(), &ch.m_cos()),
                    complex_join(&ch.c_sin(), &ch.m_sin()),
                ]
            };
            for zeta in &zetas {
                let m = zeta.map(|z| z.conj()) * zeta.transpose();
                let meas_part = &jump_part - m;
                let min_eig = hermitian_min_eig(&meas_part);
                if min_eig < -1e-9 * scale {
                    return Err(GaelError::UnbackedChannel { channel: idx, min_eig });
                }
            }
        }
        Ok(())
    }
}

fn complex_join(re: &RVec, im: &RVec) -> CVec {
    CVec::from_iterator(
        re.len(),
        re.iter().zip(im.iter()).map(|(&c, &m)| Complex64::new(c, m)),
    )
}

/// Smallest eigenvalue of a (numerically) Hermitian complex matrix.
pub(crate) fn hermitian_min_eig(m: &CMat) -> f64 {
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    h.symmetric_eigenvalues().min()
}

/// Drift matrix `A = sigma R - (i/2) sigma sum_i (xi_i^dag xi_i - xi_i^T xi_i^*)`.
pub fn build_drift(t: &GaussianTransducer) -> Result<RMat> {
    let dim = t.dim();
    let sigma = symplectic_form(t.n_modes());
    let mut anti = CMat::zeros(dim, dim);
    for xi in t.jumps() {
        // (xi^dag xi)_{jk} = conj(xi_j) xi_k
        anti += xi.map(|z| z.conj()) * xi.transpose() - xi * xi.map(|z| z.conj()).transpose();
    }
    let sigma_c = sigma.map(|x| Complex64::new(x, 0.0));
    let a = sigma_c.clone() * anti * Complex64::new(0.0, -0.5);
    let scale = a.map(|z| z.norm()).max().max(1.0);
    let imag_residue = a.map(|z| z.im.abs()).max();
    debug_assert!(imag_residue <= 1e-12 * scale, "imaginary residue {imag_residue}");
    let mut out = a.map(|z| z.re);
    out += &sigma * t.r_ham();
    Ok(out)
}

/// Diffusion matrix `N = (1/2) sigma sum_i (xi_i^dag xi_i + xi_i^T xi_i^*) sigma^T`.
pub fn build_diffusion(t: &GaussianTransducer) -> RMat {
    let dim = t.dim();
    let sigma = symplectic_form(t.n_modes());
    let mut sym = CMat::zeros(dim, dim);
    for xi in t.jumps() {
        sym += xi.map(|z| z.conj()) * xi.transpose() + xi * xi.map(|z| z.conj()).transpose();
    }
    let real = sym.map(|z| z.re);
    let n = &sigma * real * sigma.transpose() * 0.5;
    // exact symmetrization to kill round-off
    (&n + n.transpose()) * 0.5
}

/// Checks the Hurwitz property and returns the spectral abscissa `max Re(eig)`.
fn hurwitz_abscissa(a: &RMat) -> Result<f64> {
    let eigs = a.clone().complex_eigenvalues();
    let scale = a.amax().max(1e-300);
    let mut worst = f64::NEG_INFINITY;
    let mut worst_im = 0.0;
    for e in eigs.iter() {
        if e.re > worst {
            worst = e.re;
            worst_im = e.im;
        }
    }
    if worst >= -1e-12 * scale {
        return Err(GaelError::NonStableDrift { re: worst, im: worst_im });
    }
    let _ = worst_im;
    Ok(worst)
}

/// Spectral radius of the drift, used for coarse-graining validity.
pub fn spectral_radius(a: &RMat) -> f64 {
    a.clone()
        .complex_eigenvalues()
        .iter()
        .map(|e| e.norm())
        .fold(0.0, f64::max)
}

/// Solves `A X + X A^T + 2 N = 0` by a direct Kronecker-sum linear solve.
pub fn lyapunov_steady(a: &RMat, n_diff: &RMat) -> Result<RMat> {
    hurwitz_abscissa(a)?;
    let d = a.nrows();
    let eye = RMat::identity(d, d);
    // vec(AX + XA^T) = (I (x) A + A (x) I) vec(X) in column-major vec
    let lhs = eye.kronecker(a) + a.kronecker(&eye);
    let rhs = RVec::from_iterator(d * d, n_diff.iter().map(|&x| -2.0 * x));
    let lu = lhs.lu();
    let x = lu.solve(&rhs).ok_or(GaelError::SingularMatrix {
        what: "Lyapunov Kronecker system",
        cond: f64::INFINITY,
    })?;
    let gamma = RMat::from_iterator(d, d, x.iter().copied());
    Ok((&gamma + gamma.transpose()) * 0.5)
}

/// Right-hand side of the conditional covariance equation.
fn riccati_rhs(gamma: &RMat, a: &RMat, n2: &RMat, kicks: &[(RVec, RVec)]) -> RMat {
    // kicks holds (c, sigma*m) per static channel
    let mut f = a * gamma + gamma * a.transpose() + n2;
    for (c, sm) in kicks {
        let v = gamma * c - sm;
        f -= (&v * v.transpose()) * 2.0;
    }
    f
}

/// Options for the moment solve.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Minimum `|detuning| / spectral_radius(A)` before coarse-graining is
    /// flagged as questionable.
    pub coarse_grain_min_ratio: f64,
    /// Abort the Riccati relaxation beyond this integration time.
    pub riccati_max_time: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { coarse_grain_min_ratio: 10.0, riccati_max_time: 1e6 }
    }
}

/// Relaxes the conditional covariance ODE to its stationary point, starting
/// from `gamma0`, then applies one Newton refinement. Returns `(Gamma_c, Q)`.
pub fn riccati_steady(
    a: &RMat,
    n_diff: &RMat,
    channels: &[HomodyneChannel],
    sigma: &RMat,
    gamma0: &RMat,
    max_time: f64,
) -> Result<(RMat, RMat)> {
    hurwitz_abscissa(a)?;
    let d = a.nrows();
    let n2 = n_diff * 2.0;
    let kicks: Vec<(RVec, RVec)> = channels
        .iter()
        .map(|ch| {
            assert!(ch.is_static(), "riccati_steady expects pre-coarse-grained channels");
            (ch.c.clone(), sigma * &ch.m)
        })
        .collect();
    let tol = 1e-12 * n2.amax().max(1e-300);

    let mut gamma = gamma0.clone();
    if !kicks.is_empty() {
        // RK4 with step doubling; the dynamics is contractive so accuracy
        // control only needs to keep the transient honest.
        let mut dt = 0.1 / a.amax().max(1e-12);
        let mut t = 0.0;
        let mut converged = false;
        let rk4 = |g: &RMat, h: f64| -> RMat {
            let k1 = riccati_rhs(g, a, &n2, &kicks);
            let k2 = riccati_rhs(&(g + &k1 * (h / 2.0)), a, &n2, &kicks);
            let k3 = riccati_rhs(&(g + &k2 * (h / 2.0)), a, &n2, &kicks);
            let k4 = riccati_rhs(&(g + &k3 * h), a, &n2, &kicks);
            g + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
        };
        while t < max_time {
            let full = rk4(&gamma, dt);
            let half = rk4(&rk4(&gamma, dt / 2.0), dt / 2.0);
            let err = (&full - &half).amax();
            let target = 1e-10 * gamma.amax().max(1.0);
            if err > target {
                dt *= 0.5;
                continue;
            }
            gamma = (&half + half.transpose()) * 0.5;
            t += dt;
            if err < 0.05 * target {
                dt *= 1.8;
            }
            if riccati_rhs(&gamma, a, &n2, &kicks).amax() <= tol.max(1e-13 * gamma.amax()) {
                converged = true;
                break;
            }
        }
        if !converged {
            let residual = riccati_rhs(&gamma, a, &n2, &kicks).amax();
            // One Newton polish may still land within tolerance.
            if residual > 1e3 * tol {
                return Err(GaelError::RiccatiDivergence { max_time, residual });
            }
        }
        // Newton refinement: the Jacobian of the RHS at Gamma is the Lyapunov
        // operator with drift Q(Gamma).
        let q = riccati_gain(a, &gamma, &kicks);
        let f = riccati_rhs(&gamma, a, &n2, &kicks);
        let eye = RMat::identity(d, d);
        let lhs = eye.kronecker(&q) + q.kronecker(&eye);
        let rhs = RVec::from_iterator(d * d, f.iter().map(|&x| -x));
        if let Some(delta) = lhs.lu().solve(&rhs) {
            let dm = RMat::from_iterator(d, d, delta.iter().copied());
            gamma += (&dm + dm.transpose()) * 0.5;
        }
        let residual = riccati_rhs(&gamma, a, &n2, &kicks).amax();
        if residual > tol.max(1e-12 * gamma.amax()) {
            return Err(GaelError::RiccatiDivergence { max_time, residual });
        }
    }

    let gamma_c = (&gamma + gamma.transpose()) * 0.5;
    let min_eig = heisenberg_min_eig(&gamma_c, sigma);
    if min_eig < -1e-9 {
        return Err(GaelError::InvalidCovariance { min_eig });
    }
    let q = riccati_gain(a, &gamma_c, &kicks);
    Ok((gamma_c, q))
}

fn riccati_gain(a: &RMat, gamma: &RMat, kicks: &[(RVec, RVec)]) -> RMat {
    let mut q = a.clone();
    for (c, sm) in kicks {
        let v = gamma * c - sm;
        q -= (&v * c.transpose()) * 2.0;
    }
    q
}

/// Smallest eigenvalue of `Gamma + i sigma` (the Heisenberg bound demands it
/// be non-negative).
pub fn heisenberg_min_eig(gamma: &RMat, sigma: &RMat) -> f64 {
    let d = gamma.nrows();
    let m = CMat::from_fn(d, d, |i, j| Complex64::new(gamma[(i, j)], sigma[(i, j)]));
    hermitian_min_eig(&m)
}

/// Drift, diffusion, and steady-state covariances of a transducer.
#[derive(Debug, Clone)]
pub struct MomentSolution {
    pub a: RMat,
    pub n_diff: RMat,
    pub sigma: RMat,
    pub gamma_u: RMat,
    pub gamma_c: RMat,
    pub q: RMat,
    /// Channels actually entering the Riccati equation (detuned channels are
    /// replaced by their two coarse-grained static halves).
    pub static_channels: Vec<HomodyneChannel>,
    /// `(channel index, adiabaticity ratio)` for coarse-grained channels that
    /// failed the validity threshold.
    pub coarse_grain_warnings: Vec<(usize, f64)>,
    /// Deviation between Riccati fixed points reached from `Gamma_u` and from
    /// `10 Gamma_u`; nonzero values flag a non-unique stationary point.
    pub riccati_initcond_dev: f64,
}

impl MomentSolution {
    pub fn solve(t: &GaussianTransducer) -> Result<Self> {
        Self::solve_with(t, &SolveOptions::default())
    }

    pub fn solve_with(t: &GaussianTransducer, opts: &SolveOptions) -> Result<Self> {
        let sigma = symplectic_form(t.n_modes());
        let a = build_drift(t)?;
        let n_diff = build_diffusion(t);
        let gamma_u = lyapunov_steady(&a, &n_diff)?;

        let min_eig_u = heisenberg_min_eig(&gamma_u, &sigma);
        if min_eig_u < -1e-9 {
            return Err(GaelError::InvalidCovariance { min_eig: min_eig_u });
        }

        let radius = spectral_radius(&a);
        let mut static_channels = Vec::new();
        let mut coarse_grain_warnings = Vec::new();
        for (idx, ch) in t.channels().iter().enumerate() {
            if ch.is_static() {
                static_channels.push(ch.clone());
            } else {
                let cg = coarse_grain_channel(ch, radius, opts.coarse_grain_min_ratio)?;
                if !cg.valid {
                    coarse_grain_warnings.push((idx, cg.adiabaticity));
                }
                static_channels.extend(cg.channels);
            }
        }

        let (gamma_c, q) = riccati_steady(
            &a,
            &n_diff,
            &static_channels,
            &sigma,
            &gamma_u,
            opts.riccati_max_time,
        )?;
        // Uniqueness probe: relax again from an inflated initial condition.
        let riccati_initcond_dev = if static_channels.is_empty() {
            0.0
        } else {
            let (gamma_alt, _) = riccati_steady(
                &a,
                &n_diff,
                &static_channels,
                &sigma,
                &(&gamma_u * 10.0),
                opts.riccati_max_time,
            )?;
            (&gamma_alt - &gamma_c).amax() / gamma_c.amax().max(1.0)
        };

        Ok(Self {
            a,
            n_diff,
            sigma,
            gamma_u,
            gamma_c,
            q,
            static_channels,
            coarse_grain_warnings,
            riccati_initcond_dev,
        })
    }

    /// Infinity-norm residual of `A G + G A^T + 2N`, relative to `|2N|`.
    pub fn lyapunov_residual(&self) -> f64 {
        let r = &self.a * &self.gamma_u + &self.gamma_u * self.a.transpose() + &self.n_diff * 2.0;
        r.amax() / (self.n_diff.amax() * 2.0).max(1e-300)
    }

    /// Infinity-norm residual of the stationary Riccati equation, relative to `|2N|`.
    pub fn riccati_residual(&self) -> f64 {
        let sigma = &self.sigma;
        let kicks: Vec<(RVec, RVec)> = self
            .static_channels
            .iter()
            .map(|ch| (ch.c.clone(), sigma * &ch.m))
            .collect();
        let n2 = &self.n_diff * 2.0;
        riccati_rhs(&self.gamma_c, &self.a, &n2, &kicks).amax()
            / (self.n_diff.amax() * 2.0).max(1e-300)
    }
}
