//! Scenario registry: builds the full (system + transducer) model, the
//! adiabatically eliminated model, and, where available, the vacuum-expansion
//! baseline for the four reference experiments.

use num_complex::Complex64;

use gael::eliminate::{eliminate, EffectiveSme, SystemCoupling};
use gael::hilbert::{
    annihilation, creation, identity, kron, pauli_z, pure_state, quadrature_ops, sigma_minus,
    sigma_plus, thermal_state, SpaceLayout,
};
use gael::moments::{CMat, CVec, GaussianTransducer, HomodyneChannel, MomentSolution, RMat, RVec};
use gael::sde::GeneratorBundle;
use gael::{GaelError, Result};

use crate::config::{Config, ConfigError};

pub const SCENARIOS: [&str; 4] = ["qnd", "parity", "jc", "twoosc"];

/// Physical and numerical parameters of one run. All rates are in units of
/// the readout decay rate `kappa`; times in `1/kappa`.
#[derive(Debug, Clone)]
pub struct ScenarioParams {
    pub name: String,
    pub chi: f64,
    pub g: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub omega: f64,
    pub nbar: f64,
    pub phi: f64,
    pub tm: f64,
    pub dt: f64,
    pub ntraj: usize,
    pub seed: u64,
    pub cutoff: usize,
    pub cutoff2: usize,
    pub store_every: usize,
}

impl ScenarioParams {
    pub fn from_config(cfg: &Config) -> std::result::Result<Self, ConfigError> {
        let name = cfg.str_or("scenario.name", "qnd").to_string();
        if !SCENARIOS.contains(&name.as_str()) {
            return Err(ConfigError {
                source: "config".to_string(),
                line: 0,
                msg: format!(
                    "unknown scenario `{name}`; expected one of {}",
                    SCENARIOS.join(", ")
                ),
            });
        }
        // per-scenario defaults follow the reference parameter sets
        let (chi, g, gamma, omega, nbar, phi, tm, ntraj, seed, cutoff, cutoff2) =
            match name.as_str() {
                "qnd" => (0.1, 0.0, 0.0, 0.0, 2.0, std::f64::consts::FRAC_PI_2, 50.0, 500, 11, 20, 1),
                "parity" => (0.1, 0.0, 0.0, 0.0, 0.0, -std::f64::consts::FRAC_PI_2, 100.0, 1000, 12, 10, 1),
                "jc" => (0.0, 0.1, 0.0, 5.0, 2.0, 0.0, 50.0, 500, 13, 20, 1),
                "twoosc" => (0.2, 0.2, 0.1, 5.0, 2.0, 0.0, 50.0, 100, 14, 20, 10),
                _ => unreachable!(),
            };
        Ok(Self {
            name,
            chi: cfg.f64_or("scenario.chi", chi)?,
            g: cfg.f64_or("scenario.g", g)?,
            kappa: cfg.f64_or("scenario.kappa", 1.0)?,
            gamma: cfg.f64_or("scenario.gamma", gamma)?,
            omega: cfg.f64_or("scenario.omega", omega)?,
            nbar: cfg.f64_or("scenario.nbar", nbar)?,
            phi: cfg.f64_or("scenario.phi", phi)?,
            tm: cfg.f64_or("scenario.tm", tm)?,
            dt: cfg.f64_or("numerics.dt", 0.002)?,
            ntraj: cfg.usize_or("numerics.ntraj", ntraj)?,
            seed: cfg.get_u64("numerics.seed")?.unwrap_or(seed),
            cutoff: cfg.usize_or("numerics.cutoff", cutoff)?,
            cutoff2: cfg.usize_or("numerics.cutoff2", cutoff2)?,
            store_every: cfg.usize_or("numerics.store_every", 50)?,
        })
    }

    /// DOE baseline exists only where a vacuum expansion is defined.
    pub fn has_doe(&self) -> bool {
        matches!(self.name.as_str(), "qnd" | "jc")
    }

    pub fn system_dim(&self) -> usize {
        if self.name == "parity" {
            4
        } else {
            2
        }
    }
}

/// Reduced (system-only) models produced by the elimination pipeline.
pub struct ReducedModels {
    pub moments: MomentSolution,
    pub sme: EffectiveSme,
    pub gae: GeneratorBundle,
    pub doe: Option<GeneratorBundle>,
    pub rho0: CMat,
}

/// Full system + transducer model on the truncated Fock space.
pub struct FullModel {
    pub layout: SpaceLayout,
    pub gen: GeneratorBundle,
    pub rho0: CMat,
    /// Tensor factors to keep when projecting stored states onto the system.
    pub keep: Vec<usize>,
}

fn cx(re: f64) -> Complex64 {
    Complex64::from(re)
}

/// Thermally damped cavity transducer: thermal jump pair plus the homodyne
/// channel of the output field.
fn cavity_transducer(
    kappa: f64,
    nbar: f64,
    r_ham: RMat,
    detuning: f64,
) -> Result<GaussianTransducer> {
    let down = (kappa * (nbar + 1.0) / 2.0).sqrt();
    let up = (kappa * nbar / 2.0).sqrt();
    let jumps = vec![
        CVec::from_vec(vec![cx(down), Complex64::new(0.0, down)]),
        CVec::from_vec(vec![cx(up), Complex64::new(0.0, -up)]),
    ];
    let c = RVec::from_vec(vec![(kappa / (2.0 * (2.0 * nbar + 1.0))).sqrt(), 0.0]);
    let m = RVec::from_vec(vec![0.0, (kappa * (2.0 * nbar + 1.0) / 2.0).sqrt()]);
    GaussianTransducer::new(1, r_ham, jumps, vec![HomodyneChannel::new(c, m, detuning)])
}

/// Two coupled oscillators: mode 1 thermally damped at rate `gamma`, mode 2
/// decaying at `kappa` with its phase quadrature monitored.
fn two_oscillator_transducer(p: &ScenarioParams) -> Result<GaussianTransducer> {
    let mut r = RMat::identity(4, 4) * p.omega;
    r[(0, 2)] = p.g;
    r[(2, 0)] = p.g;
    let down = (p.gamma * (p.nbar + 1.0) / 2.0).sqrt();
    let up = (p.gamma * p.nbar / 2.0).sqrt();
    let kd = (p.kappa / 2.0).sqrt();
    let jumps = vec![
        CVec::from_vec(vec![cx(down), Complex64::new(0.0, down), Complex64::ZERO, Complex64::ZERO]),
        CVec::from_vec(vec![cx(up), Complex64::new(0.0, -up), Complex64::ZERO, Complex64::ZERO]),
        CVec::from_vec(vec![Complex64::ZERO, Complex64::ZERO, cx(kd), Complex64::new(0.0, kd)]),
    ];
    // lambda = i sqrt(kappa) b = sqrt(kappa/2)(i q2 - p2)
    let c = RVec::from_vec(vec![0.0, 0.0, 0.0, -(p.kappa / 2.0).sqrt()]);
    let m = RVec::from_vec(vec![0.0, 0.0, (p.kappa / 2.0).sqrt(), 0.0]);
    GaussianTransducer::new(2, r, jumps, vec![HomodyneChannel::new(c, m, 0.0)])
}

/// System coupling vector(s) for each scenario.
fn coupling(p: &ScenarioParams) -> SystemCoupling {
    match p.name.as_str() {
        "qnd" => {
            let z = pauli_z();
            SystemCoupling::Static {
                s: vec![&z * cx(p.chi * p.phi.cos()), &z * cx(-p.chi * p.phi.sin())],
            }
        }
        "parity" => {
            let zz = kron(&pauli_z(), &identity(2)) + kron(&identity(2), &pauli_z());
            SystemCoupling::Static {
                s: vec![&zz * cx(p.chi * p.phi.cos()), &zz * cx(-p.chi * p.phi.sin())],
            }
        }
        "jc" => {
            let amp = Complex64::from_polar(p.g / 2f64.sqrt(), p.phi);
            let sp = sigma_plus() * amp;
            let s_plus = vec![sp.clone(), &sp * Complex64::new(0.0, 1.0)];
            let s_minus = s_plus.iter().map(|o| o.adjoint()).collect();
            SystemCoupling::Oscillating { omega: p.omega, s_plus, s_minus }
        }
        "twoosc" => {
            let zero = CMat::zeros(2, 2);
            SystemCoupling::Static {
                s: vec![zero.clone(), pauli_z() * cx(p.chi), zero.clone(), zero],
            }
        }
        _ => unreachable!(),
    }
}

fn plus_state(dim_factors: usize) -> CMat {
    let mut psi = CVec::from_element(1, Complex64::ONE);
    let plus = CVec::from_vec(vec![cx(1.0 / 2f64.sqrt()), cx(1.0 / 2f64.sqrt())]);
    for _ in 0..dim_factors {
        let mut next = CVec::zeros(psi.len() * 2);
        for i in 0..psi.len() {
            for j in 0..2 {
                next[i * 2 + j] = psi[i] * plus[j];
            }
        }
        psi = next;
    }
    pure_state(&psi)
}

/// Vacuum-expansion baseline for the dispersive readout.
pub fn qnd_doe(p: &ScenarioParams) -> Result<GeneratorBundle> {
    let z = pauli_z();
    let rate = 2.0 * p.chi * p.chi * (2.0 * p.nbar + 1.0) / p.kappa;
    let meas = &z
        * Complex64::from_polar(
            (2.0 * p.chi * p.chi / p.kappa).sqrt(),
            -(p.phi + std::f64::consts::FRAC_PI_2),
        );
    GeneratorBundle::new(&CMat::zeros(2, 2), &[(rate, z)], &[meas])
}

/// Vacuum-expansion baseline for the exchange-coupling readout.
pub fn jc_doe(p: &ScenarioParams) -> Result<GeneratorBundle> {
    let g2 = 4.0 * p.g * p.g / p.kappa;
    let meas = sigma_minus()
        * Complex64::from_polar(
            2.0 * p.g / p.kappa.sqrt(),
            -(p.phi + std::f64::consts::FRAC_PI_2),
        );
    let jumps = vec![(g2 * (p.nbar + 1.0), sigma_minus()), (g2 * p.nbar, sigma_plus())];
    GeneratorBundle::new(&CMat::zeros(2, 2), &jumps, &[meas])
}

/// Closed-form eliminated model for the dispersive readout (dephasing rate
/// `2 chi^2 (2 nbar + 1) / kappa`, measurement operator
/// `sqrt(2 chi^2 / (kappa (2 nbar + 1))) (-i)(2 nbar cos(phi) + e^{-i phi}) sigma_z`);
/// used as a regression oracle against the pipeline output.
pub fn qnd_closed_form(p: &ScenarioParams) -> Result<GeneratorBundle> {
    let z = pauli_z();
    let rate = 2.0 * p.chi * p.chi * (2.0 * p.nbar + 1.0) / p.kappa;
    let pref = (2.0 * p.chi * p.chi / (p.kappa * (2.0 * p.nbar + 1.0))).sqrt();
    let coeff = Complex64::new(0.0, -1.0)
        * (Complex64::from(2.0 * p.nbar * p.phi.cos()) + Complex64::from_polar(1.0, -p.phi));
    let meas = &z * (coeff * cx(pref));
    GeneratorBundle::new(&CMat::zeros(2, 2), &[(rate, z)], &[meas])
}

/// Closed-form eliminated model for the exchange-coupling readout (rates
/// `4 g^2 (nbar + 1) / kappa`, `4 g^2 nbar / kappa`; measurement operator
/// `(2 g / sqrt(kappa (2 nbar + 1))) [(nbar+1) sigma_- e^{-i(phi+pi/2)} - nbar sigma_+ e^{i(phi+pi/2)}]`).
pub fn jc_closed_form(p: &ScenarioParams) -> Result<GeneratorBundle> {
    let g2 = 4.0 * p.g * p.g / p.kappa;
    let jumps = vec![(g2 * (p.nbar + 1.0), sigma_minus()), (g2 * p.nbar, sigma_plus())];
    let pref = 2.0 * p.g / (p.kappa * (2.0 * p.nbar + 1.0)).sqrt();
    let phase = p.phi + std::f64::consts::FRAC_PI_2;
    let meas = sigma_minus() * (Complex64::from_polar(pref * (p.nbar + 1.0), -phase))
        + sigma_plus() * (Complex64::from_polar(-pref * p.nbar, phase));
    GeneratorBundle::new(&CMat::zeros(2, 2), &jumps, &[meas])
}

/// Builds the transducer, runs the moment solvers and the elimination, and
/// assembles reduced generators. Fails (exit code 3 in the CLI) if the
/// positivity certificate does not pass.
pub fn reduced_models(p: &ScenarioParams) -> Result<ReducedModels> {
    let transducer = match p.name.as_str() {
        "qnd" | "parity" => cavity_transducer(p.kappa, p.nbar, RMat::zeros(2, 2), 0.0)?,
        "jc" => cavity_transducer(p.kappa, p.nbar, RMat::identity(2, 2) * p.omega, -p.omega)?,
        "twoosc" => two_oscillator_transducer(p)?,
        _ => unreachable!(),
    };
    let moments = MomentSolution::solve(&transducer)?;
    let sme = eliminate(&moments, &coupling(p), transducer.channels())?;
    if !sme.certificate.pass {
        return Err(GaelError::NegativeDecay {
            eig: sme.certificate.min_eig_p.min(sme.certificate.min_eig_pprime),
            norm: sme.certificate.norm_p,
        });
    }
    let gae = GeneratorBundle::from_effective(&sme)?;
    let doe = match p.name.as_str() {
        "qnd" => Some(qnd_doe(p)?),
        "jc" => Some(jc_doe(p)?),
        _ => None,
    };
    let rho0 = plus_state(if p.name == "parity" { 2 } else { 1 });
    Ok(ReducedModels { moments, sme, gae, doe, rho0 })
}

/// Builds the system + transducer model on the truncated Fock space.
pub fn full_model(p: &ScenarioParams) -> Result<FullModel> {
    match p.name.as_str() {
        "qnd" => {
            let layout = SpaceLayout::new(vec![2, p.cutoff]);
            let quads = quadrature_ops(&layout, &[1]);
            let r_phi = &quads[0] * cx(p.phi.cos()) - &quads[1] * cx(p.phi.sin());
            let h = layout.op_on(0, &pauli_z()) * r_phi * cx(p.chi);
            let (gen, rho0) = cavity_full_parts(p, &layout, h, 0)?;
            Ok(FullModel { layout, gen, rho0, keep: vec![0] })
        }
        "parity" => {
            let layout = SpaceLayout::new(vec![2, 2, p.cutoff]);
            let quads = quadrature_ops(&layout, &[2]);
            let r_phi = &quads[0] * cx(p.phi.cos()) - &quads[1] * cx(p.phi.sin());
            let zz = layout.op_on(0, &pauli_z()) + layout.op_on(1, &pauli_z());
            let h = zz * r_phi * cx(p.chi);
            let (gen, rho0) = cavity_full_parts(p, &layout, h, 1)?;
            Ok(FullModel { layout, gen, rho0, keep: vec![0, 1] })
        }
        "jc" => {
            let layout = SpaceLayout::new(vec![2, p.cutoff]);
            let a = layout.op_on(1, &annihilation(p.cutoff));
            let sp = layout.op_on(0, &sigma_plus());
            let ladder = &a * &sp * Complex64::from_polar(p.g, p.phi);
            let h = &ladder + ladder.adjoint();
            let (gen, rho0) = cavity_full_parts(p, &layout, h, 0)?;
            Ok(FullModel { layout, gen, rho0, keep: vec![0] })
        }
        "twoosc" => {
            let layout = SpaceLayout::new(vec![2, p.cutoff, p.cutoff2]);
            let quads = quadrature_ops(&layout, &[1, 2]);
            let n1 = layout.op_on(1, &gael::hilbert::number_op(p.cutoff));
            let n2 = layout.op_on(2, &gael::hilbert::number_op(p.cutoff2));
            let h = layout.op_on(0, &pauli_z()) * &quads[1] * cx(p.chi)
                + (n1 + n2) * cx(p.omega)
                + &quads[0] * &quads[2] * cx(p.g);
            let a = layout.op_on(1, &annihilation(p.cutoff));
            let b = layout.op_on(2, &annihilation(p.cutoff2));
            let jumps = vec![
                (p.gamma * (p.nbar + 1.0), a.clone()),
                (p.gamma * p.nbar, layout.op_on(1, &creation(p.cutoff))),
                (p.kappa, b.clone()),
            ];
            let meas = &b * Complex64::new(0.0, p.kappa.sqrt());
            let gen = GeneratorBundle::new(&h, &jumps, &[meas])?;
            let rho0 = kron(
                &kron(&plus_state(1), &thermal_state(p.cutoff, p.nbar)),
                &thermal_state(p.cutoff2, 0.0),
            );
            Ok(FullModel { layout, gen, rho0, keep: vec![0] })
        }
        _ => unreachable!(),
    }
}

/// Thermal-cavity jumps and homodyne measurement operator shared by the
/// single-cavity scenarios; `n_qubits` sets the system part of `rho0`.
fn cavity_full_parts(
    p: &ScenarioParams,
    layout: &SpaceLayout,
    h: CMat,
    extra_qubits: usize,
) -> Result<(GeneratorBundle, CMat)> {
    let site = layout.n_sites() - 1;
    let a = layout.op_on(site, &annihilation(p.cutoff));
    let adag = layout.op_on(site, &creation(p.cutoff));
    let jumps =
        vec![(p.kappa * (p.nbar + 1.0), a.clone()), (p.kappa * p.nbar, adag.clone())];
    let pref = (p.kappa / (2.0 * p.nbar + 1.0)).sqrt();
    let meas = &a * cx(pref * (p.nbar + 1.0)) - &adag * cx(pref * p.nbar);
    let gen = GeneratorBundle::new(&h, &jumps, &[meas])?;
    let rho0 = kron(&plus_state(1 + extra_qubits), &thermal_state(p.cutoff, p.nbar));
    Ok((gen, rho0))
}

/// Max elementwise deviation between two reduced models: the deterministic
/// generators are compared through their action on a matrix basis, the
/// measurement operators directly.
pub fn generator_distance(a: &GeneratorBundle, b: &GeneratorBundle) -> f64 {
    assert_eq!(a.dim(), b.dim());
    let d = a.dim();
    let mut dist: f64 = 0.0;
    let mut tmp = CMat::zeros(d, d);
    let mut oa = CMat::zeros(d, d);
    let mut ob = CMat::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let mut e = CMat::zeros(d, d);
            e[(i, j)] = Complex64::ONE;
            a.deterministic(&e, &mut tmp, &mut oa);
            b.deterministic(&e, &mut tmp, &mut ob);
            dist = dist.max((&oa - &ob).map(|z| z.norm()).max());
        }
    }
    for (ma, mb) in a.meas_dense().iter().zip(b.meas_dense().iter()) {
        dist = dist.max((ma - mb).map(|z| z.norm()).max());
    }
    dist
}
