//! Property and statistical tests tying the moment solvers to the stochastic
//! integrator: covariance invariants over parameter families, martingale
//! behaviour of the ensemble mean, and measurement-induced collapse.

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

use gael::eliminate::{eliminate, SystemCoupling};
use gael::hilbert::{identity, pauli_z, pure_state};
use gael::metrics::trace_distance;
use gael::moments::{
    symplectic_form, CVec, GaussianTransducer, HomodyneChannel, MomentSolution, RMat, RVec,
};
use gael::sde::{
    deterministic_rk4, run_ensemble, simulate, standard_error, GeneratorBundle,
    IntegrationConfig, ModelTag,
};

/// Damped single mode with detuning `delta`, thermal occupation `nbar`, and
/// homodyne monitoring of the output; always Hurwitz-stable.
fn damped_mode(kappa: f64, nbar: f64, delta: f64, detuning: f64) -> GaussianTransducer {
    let r = RMat::identity(2, 2) * delta;
    let down = (kappa * (nbar + 1.0) / 2.0).sqrt();
    let up = (kappa * nbar / 2.0).sqrt();
    let jumps = vec![
        CVec::from_vec(vec![Complex64::from(down), Complex64::new(0.0, down)]),
        CVec::from_vec(vec![Complex64::from(up), Complex64::new(0.0, -up)]),
    ];
    let c = RVec::from_vec(vec![(kappa / (2.0 * (2.0 * nbar + 1.0))).sqrt(), 0.0]);
    let m = RVec::from_vec(vec![0.0, (kappa * (2.0 * nbar + 1.0) / 2.0).sqrt()]);
    GaussianTransducer::new(1, r, jumps, vec![HomodyneChannel::new(c, m, detuning)]).unwrap()
}

fn min_eig_plus_i_sigma(gamma: &RMat, sigma: &RMat) -> f64 {
    let d = gamma.nrows();
    let h = DMatrix::from_fn(d, d, |i, j| Complex64::new(gamma[(i, j)], sigma[(i, j)]));
    h.symmetric_eigenvalues().min()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Heisenberg floor, conditioning order, and residuals for a family of
    /// monitored damped modes (static channel).
    #[test]
    fn covariance_invariants_static(
        kappa in 0.2f64..5.0,
        nbar in 0.0f64..3.0,
        delta in -2.0f64..2.0,
    ) {
        let t = damped_mode(kappa, nbar, delta, 0.0);
        let m = MomentSolution::solve(&t).unwrap();
        let scale = m.gamma_u.amax().max(1.0);
        prop_assert!(min_eig_plus_i_sigma(&m.gamma_u, &m.sigma) >= -1e-9 * scale);
        prop_assert!(min_eig_plus_i_sigma(&m.gamma_c, &m.sigma) >= -1e-9 * scale);
        let order = (&m.gamma_u - &m.gamma_c).symmetric_eigenvalues().min();
        prop_assert!(order >= -1e-9 * scale, "Gamma_u - Gamma_c min eig {order}");
        prop_assert!(m.lyapunov_residual() <= 1e-10);
        prop_assert!(m.riccati_residual() <= 1e-10);
    }

    /// Same invariants when the channel is detuned and coarse-grained.
    #[test]
    fn covariance_invariants_detuned(
        kappa in 0.2f64..2.0,
        nbar in 0.0f64..2.0,
        omega in 3.0f64..8.0,
    ) {
        let t = damped_mode(kappa, nbar, omega, -omega);
        let m = MomentSolution::solve(&t).unwrap();
        let scale = m.gamma_u.amax().max(1.0);
        prop_assert!(min_eig_plus_i_sigma(&m.gamma_c, &m.sigma) >= -1e-9 * scale);
        let order = (&m.gamma_u - &m.gamma_c).symmetric_eigenvalues().min();
        prop_assert!(order >= -1e-9 * scale);
        prop_assert!(m.riccati_residual() <= 1e-10);
        prop_assert!(m.riccati_initcond_dev <= 1e-8);
    }

    /// With no measurement channel the Riccati equation degenerates to the
    /// Lyapunov equation.
    #[test]
    fn riccati_without_channels_is_lyapunov(
        kappa in 0.2f64..5.0,
        nbar in 0.0f64..3.0,
        delta in -2.0f64..2.0,
    ) {
        let r = RMat::identity(2, 2) * delta;
        let down = (kappa * (nbar + 1.0) / 2.0).sqrt();
        let up = (kappa * nbar / 2.0).sqrt();
        let jumps = vec![
            CVec::from_vec(vec![Complex64::from(down), Complex64::new(0.0, down)]),
            CVec::from_vec(vec![Complex64::from(up), Complex64::new(0.0, -up)]),
        ];
        let t = GaussianTransducer::new(1, r, jumps, vec![]).unwrap();
        let m = MomentSolution::solve(&t).unwrap();
        let dev = (&m.gamma_u - &m.gamma_c).amax();
        prop_assert!(dev <= 1e-9 * m.gamma_u.amax().max(1.0), "deviation {dev}");
    }
}

#[test]
fn two_mode_invariants_hold() {
    // two detuned modes coupled through q1 q2, mode 2 monitored, mode 1
    // thermally damped (the two-oscillator transducer family)
    let (omega, kappa, gamma, nbar, g): (f64, f64, f64, f64, f64) = (5.0, 1.0, 0.1, 0.5, 0.5);
    let mut r = RMat::identity(4, 4) * omega;
    r[(0, 2)] = g;
    r[(2, 0)] = g;
    let down = (gamma * (nbar + 1.0) / 2.0).sqrt();
    let up = (gamma * nbar / 2.0).sqrt();
    let kd = (kappa / 2.0).sqrt();
    let jumps = vec![
        CVec::from_vec(vec![
            Complex64::from(down),
            Complex64::new(0.0, down),
            Complex64::ZERO,
            Complex64::ZERO,
        ]),
        CVec::from_vec(vec![
            Complex64::from(up),
            Complex64::new(0.0, -up),
            Complex64::ZERO,
            Complex64::ZERO,
        ]),
        CVec::from_vec(vec![
            Complex64::ZERO,
            Complex64::ZERO,
            Complex64::from(kd),
            Complex64::new(0.0, kd),
        ]),
    ];
    let c = RVec::from_vec(vec![0.0, 0.0, (kappa / 2.0).sqrt(), 0.0]);
    let m = RVec::from_vec(vec![0.0, 0.0, 0.0, (kappa / 2.0).sqrt()]);
    let t =
        GaussianTransducer::new(2, r, jumps, vec![HomodyneChannel::new(c, m, -omega)]).unwrap();
    let sol = MomentSolution::solve(&t).unwrap();
    let sigma = symplectic_form(2);
    let scale = sol.gamma_u.amax().max(1.0);
    assert!(min_eig_plus_i_sigma(&sol.gamma_c, &sigma) >= -1e-9 * scale);
    assert!((&sol.gamma_u - &sol.gamma_c).symmetric_eigenvalues().min() >= -1e-9 * scale);
    assert!(sol.lyapunov_residual() <= 1e-10);
    assert!(sol.riccati_residual() <= 1e-10);
}

/// Ensemble average of the conditional states must reproduce the
/// deterministic (unmonitored) evolution: the SME is a martingale.
#[test]
fn ensemble_mean_follows_deterministic_evolution() {
    let sm = gael::hilbert::sigma_minus();
    let h = gael::hilbert::pauli_x() * Complex64::from(0.5);
    let gen = GeneratorBundle::new(&h, &[(1.0, sm.clone())], &[sm]).unwrap();
    let rho0 = pure_state(&CVec::from_vec(vec![Complex64::ONE, Complex64::ZERO]));
    let config = IntegrationConfig { dt: 1e-3, t_max: 1.0, seed: 11, store_every: 1000 };

    let n_traj = 200;
    let records = run_ensemble(n_traj, 3, |k| {
        simulate(&gen, &rho0, &config, ModelTag::Gae, k as u64, None).unwrap()
    });
    let z = pauli_z();
    let finals: Vec<f64> = records
        .iter()
        .map(|r| gael::hilbert::expect(&z, r.states.last().unwrap()).re)
        .collect();
    let mean = finals.iter().sum::<f64>() / n_traj as f64;
    let stderr = standard_error(&finals);

    let reference = deterministic_rk4(&gen, &rho0, 1e-3, 1000);
    let target = gael::hilbert::expect(&z, &reference).re;
    // allow the Euler bias O(dt) on top of the statistical error
    assert!(
        (mean - target).abs() <= 3.0 * stderr + 5e-3,
        "mean {mean} target {target} stderr {stderr}"
    );
}

/// A Hermitian measurement operator collapses the monitored qubit onto the
/// measurement eigenstates with Born-rule branching ratios.
#[test]
fn qnd_monitoring_collapses_to_sigma_z_eigenstates() {
    // reduced dephasing model at nbar = 0, phi = pi/2: rate D[sz] with
    // measurement operator -sqrt(rate) sz
    let z = pauli_z();
    let rate: f64 = 1.0;
    let meas = &z * Complex64::from(-rate.sqrt());
    let gen = GeneratorBundle::new(
        &(identity(2) * Complex64::ZERO),
        &[(rate, z.clone())],
        &[meas],
    )
    .unwrap();
    let plus = pure_state(&CVec::from_vec(vec![
        Complex64::from(1.0 / 2f64.sqrt()),
        Complex64::from(1.0 / 2f64.sqrt()),
    ]));
    let config = IntegrationConfig { dt: 5e-4, t_max: 6.0, seed: 42, store_every: 12_000 };

    let n_traj = 200;
    let records = run_ensemble(n_traj, 3, |k| {
        simulate(&gen, &plus, &config, ModelTag::Gae, k as u64, None).unwrap()
    });
    let mut n_up = 0usize;
    for r in &records {
        let zf = gael::hilbert::expect(&z, r.states.last().unwrap()).re;
        assert!(zf.abs() > 0.98, "trajectory not collapsed: <sz> = {zf}");
        if zf > 0.0 {
            n_up += 1;
        }
    }
    // Born rule: p(up) = 1/2, binomial 3-sigma band
    let dev = (n_up as f64 / n_traj as f64 - 0.5).abs();
    assert!(dev <= 3.0 * (0.25 / n_traj as f64).sqrt(), "p(up) off by {dev}");
}

/// Stored conditional states stay physical along the trajectory.
#[test]
fn trajectory_states_stay_physical() {
    let sm = gael::hilbert::sigma_minus();
    let h = gael::hilbert::pauli_x() * Complex64::from(0.7);
    let gen = GeneratorBundle::new(&h, &[(0.8, sm.clone())], &[sm * Complex64::from(0.8f64.sqrt())])
        .unwrap();
    let rho0 = pure_state(&CVec::from_vec(vec![Complex64::ONE, Complex64::ZERO]));
    let config = IntegrationConfig { dt: 1e-3, t_max: 2.0, seed: 7, store_every: 100 };
    for traj in 0..10u64 {
        let rec = simulate(&gen, &rho0, &config, ModelTag::Gae, traj, None).unwrap();
        for rho in &rec.states {
            assert!((rho.trace().re - 1.0).abs() < 1e-12);
            assert!((rho - rho.adjoint()).map(|v| v.norm()).max() < 1e-12);
            // Euler-Maruyama only preserves positivity up to O(sqrt(dt))
            assert!(rho.clone().symmetric_eigenvalues().min() > -3.0 * config.dt.sqrt());
        }
    }
}

/// The full elimination pipeline agrees between a detuned channel eliminated
/// through the oscillating path and the distance metric sanity bound.
#[test]
fn eliminated_qubit_dynamics_is_a_cptp_semigroup() {
    let t = damped_mode(1.0, 0.5, 5.0, -5.0);
    let m = MomentSolution::solve(&t).unwrap();
    let g = 0.1;
    let sp = gael::hilbert::sigma_plus() * Complex64::from(g / 2f64.sqrt());
    let s_plus = vec![sp.clone(), &sp * Complex64::new(0.0, 1.0)];
    let s_minus: Vec<_> = s_plus.iter().map(|o| o.adjoint()).collect();
    let coupling = SystemCoupling::Oscillating { omega: 5.0, s_plus, s_minus };
    let sme = eliminate(&m, &coupling, t.channels()).unwrap();
    assert!(sme.certificate.pass);

    // propagate two different initial states deterministically; the trace
    // distance must be monotonically non-increasing under a CPTP semigroup
    let gen = GeneratorBundle::from_effective(&sme).unwrap();
    let up = pure_state(&CVec::from_vec(vec![Complex64::ONE, Complex64::ZERO]));
    let dn = pure_state(&CVec::from_vec(vec![Complex64::ZERO, Complex64::ONE]));
    let mut d_prev = trace_distance(&up, &dn).unwrap();
    let (mut a, mut b) = (up, dn);
    for _ in 0..20 {
        a = deterministic_rk4(&gen, &a, 0.05, 20);
        b = deterministic_rk4(&gen, &b, 0.05, 20);
        let d = trace_distance(&a, &b).unwrap();
        assert!(d <= d_prev + 1e-10, "trace distance increased: {d_prev} -> {d}");
        d_prev = d;
    }
}
