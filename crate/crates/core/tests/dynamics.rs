use std::f64::consts::TAU;

use holoq::biortho::{random_pseudo_hermitian, Level};
use holoq::dynamics::{
    adiabatic_gate_extract, adiabatic_loop_gate, evolve, evolve_many, evolve_with, leakage_profile,
    metric_ode_residual, norm_conservation_drift, time_generator, EvolveOptions, FnSystem, GeneratorMode, LoopDrive,
    TimeDependentSystem,
};
use holoq::error::Error;
use holoq::gaugeholo::ParamLoop;
use holoq::matrix::{c64, expm, identity, real, ComplexMatrix, ComplexVector, I};
use holoq::tripod::{u1_gate, Chart, TripodFamily};
use proptest::prelude::*;

#[test]
fn exponential_metric_has_closed_form() {
    // H = 0, η = diag(e^{2t}, 1): Λ = −i·diag(1, 0), so ψ₁ decays as e^{−t}.
    let sys = FnSystem::exponential_metric(2.0).unwrap();
    let psi0 = ComplexVector::from_vec(vec![c64(0.6, 0.2), c64(-0.3, 0.7)]);
    let traj = evolve(&sys, &psi0, 2000).unwrap();
    let want = ComplexVector::from_vec(vec![psi0[0] * (-2.0f64).exp(), psi0[1]]);
    assert!((traj.last() - want).norm() < 1e-10);
    // η̇ comes from finite differences, so the drift sits at their accuracy.
    assert!(norm_conservation_drift(&traj) < 1e-8);
    let g = time_generator(&sys, 1.0, 1e-4).unwrap();
    assert!((g + ComplexMatrix::from_diagonal(&ComplexVector::from_vec(vec![I, real(0.0)]))).norm() < 1e-7);
}

#[test]
fn static_system_matches_exponential() {
    let (h, eta) = random_pseudo_hermitian(3, 17);
    let (h2, eta2) = (h.clone(), eta.matrix().clone());
    let sys = FnSystem::new(3, 1.5, move |_| h2.clone(), move |_| eta2.clone()).unwrap();
    let psi0 = ComplexVector::from_vec(vec![real(1.0), c64(0.0, 0.5), real(-0.25)]);
    let traj = evolve(&sys, &psi0, 3000).unwrap();
    let want = expm(&(h * (-I * 1.5))) * &psi0;
    assert!((traj.last() - want).norm() < 1e-9);
    assert!(norm_conservation_drift(&traj) < 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn breathing_metric_conserves_eta_norm(seed in 0u64..500, strength in 0.2f64..0.6) {
        let sys = FnSystem::breathing_metric(3, 3.0, strength, seed).unwrap();
        let psi0 = ComplexVector::from_vec(vec![real(0.5), c64(0.0, 0.5), real(0.7)]);
        let full = evolve(&sys, &psi0, 3000).unwrap();
        prop_assert!(norm_conservation_drift(&full) < 1e-6);
        for t in [0.4, 1.3, 2.2] {
            prop_assert!(metric_ode_residual(&sys, t, 1e-4).unwrap() < 1e-6);
        }
    }
}

#[test]
fn hamiltonian_only_control_drifts() {
    let sys = FnSystem::breathing_metric(3, 3.0, 0.5, 2).unwrap();
    let psi0 = ComplexVector::from_vec(vec![real(0.5), c64(0.0, 0.5), real(0.7)]);
    let opts = EvolveOptions {
        n_steps: 3000,
        mode: GeneratorMode::HamiltonianOnly,
        fd_step: None,
    };
    assert!(norm_conservation_drift(&evolve_with(&sys, &psi0, &opts).unwrap()) > 1e-2);
}

#[test]
fn shared_integration_matches_single_runs() {
    let sys = FnSystem::breathing_metric(2, 2.0, 0.3, 9).unwrap();
    let a = ComplexVector::from_vec(vec![real(1.0), real(0.0)]);
    let b = ComplexVector::from_vec(vec![c64(0.2, 0.1), real(1.0)]);
    let opts = EvolveOptions {
        n_steps: 500,
        ..EvolveOptions::default()
    };
    let both = evolve_many(&sys, &[a.clone(), b.clone()], &opts).unwrap();
    assert_eq!(both[0], evolve_with(&sys, &a, &opts).unwrap());
    assert_eq!(both[1], evolve_with(&sys, &b, &opts).unwrap());
}

#[test]
fn slow_u1_loop_approaches_closed_form_gate() {
    let fam = TripodFamily::new(Chart::U1, 0.5, 1.0, 1.0).unwrap();
    let t0 = 1.2;
    let path = ParamLoop::rectangle([0.0, 0.0], [t0, TAU]);
    let dark = fam.states(0.0, 0.0).dark;
    let want = u1_gate(-TAU * (t0 / 2.0).sin().powi(2));
    let errors: Vec<f64> = [40.0, 160.0]
        .iter()
        .map(|&t| {
            let opts = EvolveOptions {
                n_steps: (t * 300.0) as usize,
                ..EvolveOptions::default()
            };
            let run = adiabatic_loop_gate(&fam, &path, &dark, t, &opts, f64::INFINITY).unwrap();
            assert!(run.drift < 1e-8);
            (run.gate - &want).norm()
        })
        .collect();
    assert!(errors[1] < errors[0], "{errors:?}");
    assert!(errors[1] < 0.05, "{errors:?}");
}

#[test]
fn fast_loop_reports_leakage() {
    let fam = TripodFamily::new(Chart::U2, 0.6, 1.0, 1.0).unwrap();
    let path = ParamLoop::rectangle([0.0, 0.0], [1.0, TAU]);
    let drive = LoopDrive::new(&fam, path, 5.0).unwrap();
    let dark = fam.states(0.0, 0.0).dark;
    let psi0: Vec<_> = (0..2).map(|j| dark.right.column(j).into_owned()).collect();
    let trajs = evolve_many(&drive, &psi0, &EvolveOptions::default()).unwrap();
    let eta = drive.metric(0.0).unwrap();
    assert!(matches!(
        adiabatic_gate_extract(&trajs, &dark, &eta),
        Err(Error::ExcessLeakage { .. })
    ));
    let profile = leakage_profile(&drive, &trajs[0], Level::Value(real(0.0)), 5).unwrap();
    assert!(profile[0].1 < 1e-12);
    assert!(profile.iter().any(|&(_, p)| p > 1e-2));
}

#[test]
fn drive_visits_loop_vertices() {
    let fam = TripodFamily::new(Chart::U1, 0.5, 1.0, 1.0).unwrap();
    let path = ParamLoop::rectangle([0.0, 0.0], [1.0, 2.0]);
    let drive = LoopDrive::new(&fam, path, 6.0).unwrap();
    // Edge lengths 1, 2, 1, 2 give vertex times 0, 1, 3, 4, 6.
    for (t, p) in [
        (0.0, [0.0, 0.0]),
        (1.0, [1.0, 0.0]),
        (3.0, [1.0, 2.0]),
        (4.0, [0.0, 2.0]),
        (6.0, [0.0, 0.0]),
    ] {
        let q = drive.point(t);
        assert!((q[0] - p[0]).abs() < 1e-12 && (q[1] - p[1]).abs() < 1e-12, "{t}: {q:?}");
    }
}

#[test]
fn invalid_inputs_are_rejected() {
    assert!(matches!(FnSystem::exponential_metric(-1.0), Err(Error::ParamDomain(_))));
    let sys = FnSystem::exponential_metric(1.0).unwrap();
    assert!(matches!(
        evolve(&sys, &ComplexVector::zeros(3), 10),
        Err(Error::DimensionMismatch { .. })
    ));
    let blowup = FnSystem::new(1, 1.0, |_| identity(1) * c64(0.0, 1e9), |_| identity(1)).unwrap();
    let res = evolve(&blowup, &ComplexVector::from_element(1, real(1.0)), 10);
    assert!(matches!(res, Err(Error::NonFiniteState { .. })), "{res:?}");
}
