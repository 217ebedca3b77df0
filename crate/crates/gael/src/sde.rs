//! Ito integration of stochastic master equations.
//!
//! A [`GeneratorBundle`] holds the step operators of one model (full or
//! reduced) in sparse form. [`simulate`] produces a measurement record by
//! drawing Wiener increments from a per-trajectory counter-keyed stream;
//! [`filter_reduced`] propagates a second model conditioned on the same
//! record through innovation increments. Ensembles run on scoped threads
//! with results merged by trajectory index, so outputs are independent of
//! the worker count.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::eliminate::EffectiveSme;
use crate::hilbert::{SparseOp, SpaceLayout};
use crate::moments::{CMat, CVec};
use crate::{GaelError, Result};

/// Which model produced a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelTag {
    Full,
    Gae,
    Doe,
}

impl ModelTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelTag::Full => "full",
            ModelTag::Gae => "gae",
            ModelTag::Doe => "doe",
        }
    }
}

/// Step operators of one stochastic master equation:
/// `drho = (G rho + rho G^dag + sum_i J_i rho J_i^dag) dt + sum_m H[l_m] rho dW_m`
/// with `G = -iH - (1/2) sum_i J_i^dag J_i`.
#[derive(Debug, Clone)]
pub struct GeneratorBundle {
    dim: usize,
    g: SparseOp,
    jumps: Vec<SparseOp>,
    meas: Vec<SparseOp>,
}

impl GeneratorBundle {
    /// Assembles the bundle from a Hamiltonian, `(rate, op)` jump pairs, and
    /// per-channel measurement operators. Each measurement operator must be
    /// backed by the jump operators (checked on the span of their
    /// vectorizations); an unbacked channel is not a valid homodyne
    /// unraveling of the deterministic part.
    pub fn new(h: &CMat, jumps: &[(f64, CMat)], meas: &[CMat]) -> Result<Self> {
        let d = h.nrows();
        let mut g = h * Complex64::new(0.0, -1.0);
        let mut jump_ops = Vec::with_capacity(jumps.len());
        for (w, j) in jumps {
            assert!(*w >= 0.0);
            let scaled = j * Complex64::from(w.sqrt());
            g -= scaled.adjoint() * &scaled * Complex64::from(0.5);
            jump_ops.push(scaled);
        }
        check_unraveling(&jump_ops, meas)?;
        let tol = 1e-15;
        Ok(Self {
            dim: d,
            g: SparseOp::from_dense(&g, tol),
            jumps: jump_ops.iter().map(|j| SparseOp::from_dense(j, tol)).collect(),
            meas: meas.iter().map(|l| SparseOp::from_dense(l, tol)).collect(),
        })
    }

    /// Bundle of a reduced model produced by the elimination.
    pub fn from_effective(sme: &EffectiveSme) -> Result<Self> {
        // the elimination certifies backing through P'; the span check here
        // is redundant but harmless for certified inputs
        Self::new(&sme.hamiltonian, &sme.jump_ops, &sme.meas_ops)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_channels(&self) -> usize {
        self.meas.len()
    }

    /// Dense copies of the measurement operators.
    pub fn meas_dense(&self) -> Vec<CMat> {
        self.meas.iter().map(SparseOp::to_dense).collect()
    }

    /// `out = G rho + rho G^dag + sum_i J_i rho J_i^dag`
    pub fn deterministic(&self, rho: &CMat, tmp: &mut CMat, out: &mut CMat) {
        out.fill(Complex64::ZERO);
        self.g.acc_left(rho, Complex64::ONE, out);
        self.g.acc_right_adjoint(rho, Complex64::ONE, out);
        for j in &self.jumps {
            j.acc_sandwich(rho, Complex64::ONE, tmp, out);
        }
    }

    /// Photocurrent drift `<l_m + l_m^dag>` in state `rho`.
    pub fn drift(&self, m: usize, rho: &CMat) -> f64 {
        2.0 * self.meas[m].expect(rho).re
    }

    /// `out += coeff * H[l_m] rho` with `H[l]rho = l rho + rho l^dag - <l+l^dag> rho`.
    /// `rho` must have unit trace.
    pub fn acc_meas(&self, m: usize, rho: &CMat, drift: f64, coeff: f64, out: &mut CMat) -> Result<()> {
        let trace = rho.trace();
        if (trace - Complex64::ONE).norm() > 1e-6 {
            return Err(GaelError::NormalizationError { trace: trace.re });
        }
        let c = Complex64::from(coeff);
        self.meas[m].acc_left(rho, c, out);
        self.meas[m].acc_right_adjoint(rho, c, out);
        let shift = Complex64::from(-coeff * drift);
        out.zip_apply(rho, |o, r| *o += shift * r);
        Ok(())
    }
}

/// Verifies that each measurement operator is majorized by the jump
/// operators: `sum_i vec(J_i)vec(J_i)^dag - vec(l_m)vec(l_m)^dag >= 0` on the
/// span of the involved vectorizations.
fn check_unraveling(jumps: &[CMat], meas: &[CMat]) -> Result<()> {
    for (m, l) in meas.iter().enumerate() {
        let ln = l.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if ln < 1e-14 {
            continue;
        }
        let mut span: Vec<CVec> = Vec::new();
        let add = |op: &CMat, span: &mut Vec<CVec>| {
            let v = CVec::from_iterator(op.len(), op.iter().copied());
            let mut w = v.clone();
            for b in span.iter() {
                let c = b.dotc(&w);
                w -= b * c;
            }
            let n = w.norm();
            if n > 1e-12 {
                span.push(w / Complex64::from(n));
            }
        };
        for j in jumps {
            add(j, &mut span);
        }
        add(l, &mut span);
        let k = span.len();
        let mut gram = CMat::zeros(k, k);
        let proj = |op: &CMat| -> CVec {
            let v = CVec::from_iterator(op.len(), op.iter().copied());
            CVec::from_iterator(k, span.iter().map(|b| b.dotc(&v)))
        };
        for j in jumps {
            let c = proj(j);
            gram += &c * c.adjoint();
        }
        let c = proj(l);
        gram -= &c * c.adjoint();
        let scale = jumps
            .iter()
            .map(|j| j.iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum::<f64>()
            .max(ln * ln);
        if crate::moments::hermitian_min_eig(&gram) < -1e-9 * scale {
            return Err(GaelError::InvalidUnraveling { channel: m });
        }
    }
    Ok(())
}

/// Numerical parameters of one integration run.
#[derive(Debug, Clone)]
pub struct IntegrationConfig {
    pub dt: f64,
    pub t_max: f64,
    pub seed: u64,
    /// Store the state every this many steps (the initial and final states
    /// are always stored).
    pub store_every: usize,
}

impl IntegrationConfig {
    pub fn n_steps(&self) -> usize {
        (self.t_max / self.dt).round() as usize
    }
}

/// One integrated trajectory: thinned states plus full-resolution currents.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub model: ModelTag,
    pub seed: u64,
    pub traj_index: u64,
    pub dt: f64,
    /// Output-grid times (thinned).
    pub times: Vec<f64>,
    /// States at the output times; system-reduced when a projector was given.
    pub states: Vec<CMat>,
    /// Photocurrent increments `dI_m` per channel, one entry per step.
    pub currents: Vec<Vec<f64>>,
    /// Wiener (or innovation) increments per channel, one entry per step.
    pub wiener: Vec<Vec<f64>>,
}

impl TrajectoryRecord {
    /// `J(T) = sum dI` of channel `m` over `[0, t_m]`.
    pub fn integrated_current(&self, m: usize, t_m: f64) -> f64 {
        let n = ((t_m / self.dt).round() as usize).min(self.currents[m].len());
        self.currents[m][..n].iter().sum()
    }
}

/// Optional projection of stored states onto a subset of tensor factors.
#[derive(Clone, Copy)]
pub struct StateProjector<'a> {
    pub layout: &'a SpaceLayout,
    pub keep: &'a [usize],
}

fn hermitize_renormalize(rho: &mut CMat) -> Result<()> {
    let d = rho.nrows();
    for i in 0..d {
        for j in (i + 1)..d {
            let avg = (rho[(i, j)] + rho[(j, i)].conj()) * 0.5;
            rho[(i, j)] = avg;
            rho[(j, i)] = avg.conj();
        }
        rho[(i, i)] = Complex64::from(rho[(i, i)].re);
    }
    let trace = rho.trace().re;
    let drift = (trace - 1.0).abs();
    if drift > 1e-3 {
        return Err(GaelError::StepSizeError { drift });
    }
    *rho /= Complex64::from(trace);
    Ok(())
}

/// One Euler-Maruyama step; `dw` holds one increment per channel.
pub fn step(
    gen: &GeneratorBundle,
    rho: &mut CMat,
    dw: &[f64],
    dt: f64,
    tmp: &mut CMat,
    delta: &mut CMat,
) -> Result<()> {
    gen.deterministic(rho, tmp, delta);
    *delta *= Complex64::from(dt);
    for (m, &w) in dw.iter().enumerate() {
        let drift = gen.drift(m, rho);
        gen.acc_meas(m, rho, drift, w, delta)?;
    }
    *rho += &*delta;
    hermitize_renormalize(rho)
}

fn rng_for(seed: u64, traj_index: u64) -> ChaCha12Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&traj_index.to_le_bytes());
    ChaCha12Rng::from_seed(key)
}

fn store_state(states: &mut Vec<CMat>, rho: &CMat, project: Option<StateProjector>) -> Result<()> {
    match project {
        Some(p) => states.push(p.layout.partial_trace(rho, p.keep)?),
        None => states.push(rho.clone()),
    }
    Ok(())
}

/// Integrates one trajectory, drawing `dW_m ~ N(0, dt)` from the stream keyed
/// by `(config.seed, traj_index)` in fixed step-major, channel-minor order.
pub fn simulate(
    gen: &GeneratorBundle,
    rho0: &CMat,
    config: &IntegrationConfig,
    model: ModelTag,
    traj_index: u64,
    project: Option<StateProjector>,
) -> Result<TrajectoryRecord> {
    let d = gen.dim();
    if rho0.nrows() != d {
        return Err(GaelError::DimensionMismatch {
            context: "initial state",
            expected: d,
            got: rho0.nrows(),
        });
    }
    let n_ch = gen.n_channels();
    let n_steps = config.n_steps();
    let sqrt_dt = config.dt.sqrt();
    let mut rng = rng_for(config.seed, traj_index);
    let normal = StandardNormal;

    let mut rho = rho0.clone();
    hermitize_renormalize(&mut rho)?;
    let mut tmp = CMat::zeros(d, d);
    let mut delta = CMat::zeros(d, d);
    let mut dw = vec![0.0; n_ch];
    let mut currents: Vec<Vec<f64>> = vec![Vec::with_capacity(n_steps); n_ch];
    let mut wiener: Vec<Vec<f64>> = vec![Vec::with_capacity(n_steps); n_ch];
    let mut times = Vec::new();
    let mut states = Vec::new();
    times.push(0.0);
    store_state(&mut states, &rho, project)?;

    for k in 0..n_steps {
        for (m, w) in dw.iter_mut().enumerate() {
            let z: f64 = normal.sample(&mut rng);
            *w = z * sqrt_dt;
            let drift = gen.drift(m, &rho);
            currents[m].push(drift * config.dt + *w);
            wiener[m].push(*w);
        }
        step(gen, &mut rho, &dw, config.dt, &mut tmp, &mut delta)?;
        if (k + 1) % config.store_every.max(1) == 0 || k + 1 == n_steps {
            times.push((k + 1) as f64 * config.dt);
            store_state(&mut states, &rho, project)?;
        }
    }

    Ok(TrajectoryRecord {
        model,
        seed: config.seed,
        traj_index,
        dt: config.dt,
        times,
        states,
        currents,
        wiener,
    })
}

/// Propagates a reduced model conditioned on the photocurrents of `record`:
/// per step the innovation `dW = dI(record) - drift(reduced) dt` drives one
/// reduced step. Output grid matches the record's.
pub fn filter_reduced(
    gen: &GeneratorBundle,
    rho0: &CMat,
    record: &TrajectoryRecord,
    model: ModelTag,
) -> Result<TrajectoryRecord> {
    if gen.n_channels() != record.currents.len() {
        return Err(GaelError::PairingError {
            full: record.currents.len(),
            reduced: gen.n_channels(),
        });
    }
    let d = gen.dim();
    let dt = record.dt;
    let n_steps = record.currents.first().map_or(0, Vec::len);
    let n_ch = gen.n_channels();

    let mut rho = rho0.clone();
    hermitize_renormalize(&mut rho)?;
    let mut tmp = CMat::zeros(d, d);
    let mut delta = CMat::zeros(d, d);
    let mut dw = vec![0.0; n_ch];
    let mut wiener: Vec<Vec<f64>> = vec![Vec::with_capacity(n_steps); n_ch];
    let mut times = Vec::new();
    let mut states = Vec::new();
    times.push(0.0);
    states.push(rho.clone());

    let store: std::collections::HashSet<u64> =
        record.times.iter().map(|t| (t / dt).round() as u64).collect();

    for k in 0..n_steps {
        for m in 0..n_ch {
            let drift = gen.drift(m, &rho);
            dw[m] = record.currents[m][k] - drift * dt;
            wiener[m].push(dw[m]);
        }
        step(gen, &mut rho, &dw, dt, &mut tmp, &mut delta)?;
        if store.contains(&((k + 1) as u64)) {
            times.push((k + 1) as f64 * dt);
            states.push(rho.clone());
        }
    }

    Ok(TrajectoryRecord {
        model,
        seed: record.seed,
        traj_index: record.traj_index,
        dt,
        times,
        states,
        currents: record.currents.clone(),
        wiener,
    })
}

/// Runs `job(0..n_traj)` on `workers` scoped threads. Each worker owns a
/// disjoint, index-strided set of trajectories; results are merged by index,
/// so the output is identical for any worker count.
pub fn run_ensemble<T, F>(n_traj: usize, workers: usize, job: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync,
{
    let workers = workers.max(1).min(n_traj.max(1));
    if workers == 1 {
        return (0..n_traj as u64).map(job).collect();
    }
    let mut slots: Vec<Option<T>> = (0..n_traj).map(|_| None).collect();
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for w in 0..workers {
            let job = &job;
            handles.push(scope.spawn(move || {
                let mut out = Vec::new();
                let mut idx = w;
                while idx < n_traj {
                    out.push((idx, job(idx as u64)));
                    idx += workers;
                }
                out
            }));
        }
        for h in handles {
            for (idx, val) in h.join().expect("trajectory worker panicked") {
                slots[idx] = Some(val);
            }
        }
    });
    slots.into_iter().map(|s| s.expect("missing trajectory")).collect()
}

/// RK4 integration of the deterministic part, used as an unconditional
/// master-equation reference.
pub fn deterministic_rk4(
    gen: &GeneratorBundle,
    rho0: &CMat,
    dt: f64,
    n_steps: usize,
) -> CMat {
    let d = gen.dim();
    let mut tmp = CMat::zeros(d, d);
    let mut rho = rho0.clone();
    let mut k1 = CMat::zeros(d, d);
    let mut k2 = CMat::zeros(d, d);
    let mut k3 = CMat::zeros(d, d);
    let mut k4 = CMat::zeros(d, d);
    for _ in 0..n_steps {
        gen.deterministic(&rho, &mut tmp, &mut k1);
        let r2 = &rho + &k1 * Complex64::from(dt / 2.0);
        gen.deterministic(&r2, &mut tmp, &mut k2);
        let r3 = &rho + &k2 * Complex64::from(dt / 2.0);
        gen.deterministic(&r3, &mut tmp, &mut k3);
        let r4 = &rho + &k3 * Complex64::from(dt);
        gen.deterministic(&r4, &mut tmp, &mut k4);
        rho += (&k1 + &k2 * Complex64::from(2.0) + &k3 * Complex64::from(2.0) + &k4)
            * Complex64::from(dt / 6.0);
    }
    rho
}

/// Mean of a set of states (e.g. ensemble average at one output index).
pub fn mean_state(states: &[&CMat]) -> CMat {
    let d = states[0].nrows();
    let mut acc = CMat::zeros(d, d);
    for s in states {
        acc += *s;
    }
    acc / Complex64::from(states.len() as f64)
}

/// Sample standard error of scalar observations.
pub fn standard_error(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (var / n).sqrt()
}

#[allow(dead_code)]
fn unused(_v: DVector<f64>) {}
