mod common;

use std::sync::Arc;

use num_complex::Complex64;
use zonal_core::calculus::{l2_norm_velocity, perp_grad};
use zonal_core::dynamics::{
    energy, step_rk4, tendency, time_average, InitialCondition, RunConfig, Simulation, SolverState, TimeStep,
};
use zonal_core::rotation::RotationOps;
use zonal_core::{SpectralScalar, VelocityField};

fn small(b: f64, omega: f64) -> RunConfig {
    RunConfig { b, omega, l_max: 10, n_theta: 24, n_phi: 40, seed: 7, ..Default::default() }
}

#[test]
fn single_mode_on_sphere_precesses_linearly() {
    let basis = Arc::new(common::basis(1.0, 10, 24, 40));
    let rot = RotationOps::new(basis.clone());
    let omega = 100.0;
    for (l, m) in [(4, 1), (3, 2), (6, 5), (2, 0)] {
        let zeta = SpectralScalar::real_mode(10, l, m, Complex64::new(0.3, -0.7));
        let got = tendency(&rot, &zeta, omega).unwrap();
        let lam = (l * (l + 1)) as f64;
        let want = zeta.map_modes(|_, mm, c| c * Complex64::new(0.0, -2.0 * omega * mm as f64 / lam));
        assert!((&got - &want).max_abs() < 1e-10 * zeta.max_abs(), "({l},{m})");
    }
}

#[test]
fn tendency_conserves_energy() {
    for b in [1.0, 0.9, 0.7] {
        let basis = Arc::new(common::basis(b, 12, 32, 48));
        let rot = RotationOps::new(basis.clone());
        for seed in 0..5 {
            let psi = common::random_stream(&basis, 12, seed);
            let zeta = basis.apply_laplacian(&psi);
            let t = tendency(&rot, &zeta, 300.0).unwrap();
            // dE/dt = −2⟨ψ, ζ_t⟩
            let de = psi.dot(&t);
            assert!(de.abs() < 1e-10 * psi.norm() * t.norm(), "b {b} seed {seed}: {de}");
        }
    }
}

fn integrate(rot: &RotationOps, zeta: &SpectralScalar, omega: f64, t: f64, n: usize) -> SolverState {
    let mut s = SolverState::new(zeta.clone());
    for _ in 0..n {
        s = step_rk4(rot, &s, omega, t / n as f64).unwrap();
    }
    s
}

#[test]
fn rk4_converges_at_fourth_order() {
    let cfg = RunConfig { m0: 4.0, ..small(0.9, 40.0) };
    let basis = Arc::new(cfg.build_basis().unwrap());
    let rot = RotationOps::new(basis.clone());
    let zeta = basis.apply_laplacian(&zonal_core::dynamics::initial_stream(&basis, &cfg).unwrap());
    let t = 0.2;
    let reference = integrate(&rot, &zeta, cfg.omega, t, 8 * 64);
    let pts: Vec<(f64, f64)> = [8, 16, 32, 64]
        .iter()
        .map(|&n| {
            let s = integrate(&rot, &zeta, cfg.omega, t, n);
            ((t / n as f64).ln(), (&s.zeta - &reference.zeta).norm().ln())
        })
        .collect();
    let slope = zonal_core::experiments::linear_fit(&pts).unwrap().slope;
    assert!((slope - 4.0).abs() <= 0.3, "{slope} {pts:?}");
}

#[test]
fn rossby_haurwitz_phase_with_automatic_step() {
    let (l, m) = (3usize, 2usize);
    let cfg = RunConfig {
        b: 1.0,
        omega: 100.0,
        t_final: 0.3,
        initial_condition: InitialCondition::SingleMode { l, m },
        ..small(1.0, 100.0)
    };
    let mut sim = Simulation::new(cfg.clone()).unwrap();
    assert_eq!(sim.config.dt, TimeStep::Auto);
    let c0 = sim.state.zeta.get(l, m as i64);
    let mut phase = 0.0;
    let mut last = c0;
    sim.run_with(|s| {
        let c = s.state.zeta.get(l, m as i64);
        phase += (c * last.conj()).arg();
        last = c;
        Ok(())
    })
    .unwrap();
    let want = -2.0 * cfg.omega * m as f64 * cfg.t_final / (l * (l + 1)) as f64;
    assert!((phase - want).abs() < 0.01 * want.abs(), "{phase} vs {want}");
}

#[test]
fn running_average_matches_dense_trapezoid_of_velocity() {
    let cfg = RunConfig { t_final: 0.1, m0: 3.0, ..small(0.9, 150.0) };
    let mut sim = Simulation::new(cfg).unwrap();
    let u = |s: &Simulation| perp_grad(s.basis(), &s.state.stream(s.basis())).unwrap();
    let mut prev = u(&sim);
    let mut acc = VelocityField::zeros(sim.basis());
    let dt = sim.dt;
    sim.run_with(|s| {
        let cur = u(s);
        acc = acc.axpy(0.5 * dt, &prev).axpy(0.5 * dt, &cur);
        prev = cur;
        Ok(())
    })
    .unwrap();
    let t = sim.state.t;
    let ubar = time_average(sim.basis(), &sim.state).unwrap();
    let diff = ubar.axpy(-1.0 / t, &acc);
    let basis = sim.basis();
    let err = l2_norm_velocity(basis, &diff).unwrap() / l2_norm_velocity(basis, &ubar).unwrap();
    assert!(err < 1e-6, "{err}");
}

#[test]
fn integrating_back_recovers_initial_vorticity() {
    let cfg = RunConfig { m0: 3.0, ..small(0.9, 60.0) };
    let basis = Arc::new(cfg.build_basis().unwrap());
    let rot = RotationOps::new(basis.clone());
    let zeta = basis.apply_laplacian(&zonal_core::dynamics::initial_stream(&basis, &cfg).unwrap());
    let err = |n: usize| {
        let fwd = integrate(&rot, &zeta, cfg.omega, 0.1, n);
        let back = integrate(&rot, &fwd.zeta, cfg.omega, -0.1, n);
        (&back.zeta - &zeta).norm() / zeta.norm()
    };
    let (coarse, fine) = (err(40), err(80));
    assert!(fine < 1e-6, "{fine}");
    // O(dt⁴): halving dt gains about 16.
    assert!(coarse / fine > 12.0, "{coarse} {fine}");
}

#[test]
fn runs_keep_real_fields_and_energy() {
    let cfg = RunConfig { t_final: 0.2, m0: 2.0, ..small(0.8, 500.0) };
    let mut sim = Simulation::new(cfg).unwrap();
    let e0 = energy(sim.basis(), &sim.state);
    sim.run().unwrap();
    assert!(sim.state.zeta.is_conj_symmetric());
    assert!(sim.state.psi_integral.reality_defect() < 1e-12 * sim.state.psi_integral.max_abs());
    let e1 = energy(sim.basis(), &sim.state);
    assert!(((e1 - e0) / e0).abs() < 1e-6);
}
