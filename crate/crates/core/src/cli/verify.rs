//! Quick self-checks of each module, run by `holoq verify`.

use std::f64::consts::{FRAC_PI_3, PI};

use super::Check;
use crate::biortho::{
    biorthogonal_eig, metric_from_left, pseudo_hermiticity_residual, random_pseudo_hermitian,
    random_pseudo_hermitian_with_spectrum, Level, MetricOperator,
};
use crate::bundles::{grassmann_projector, group_action_invariance, random_pseudo_unitary, stiefel_frame};
use crate::dynamics::{
    evolve_with, metric_ode_residual, norm_conservation_drift, EvolveOptions, FnSystem, GeneratorMode,
};
use crate::error::{Error, Result};
use crate::gaugeholo::{
    antihermiticity_residual, holonomy_of_loop, AnalyticFrames, BlockFrame, HamiltonianFamily, HolonomyOptions,
    ParamLoop, RandomDegenerateFamily,
};
use crate::matrix::{real, ComplexVector, ZERO};
use crate::tripod::{self, Chart, TripodFamily};

pub const MODULES: [&str; 5] = ["biortho", "gaugeholo", "dynamics", "tripod", "bundles"];

/// Run every suite, or only the one named by `filter`.
pub fn run_suites(filter: Option<&str>) -> Result<Vec<Check>> {
    if let Some(f) = filter {
        if !MODULES.contains(&f) {
            return Err(Error::ConfigInvalid(format!(
                "unknown module {f:?}; expected one of {MODULES:?}"
            )));
        }
    }
    let mut checks = Vec::new();
    for m in MODULES.iter().filter(|m| filter.is_none_or(|f| f == **m)) {
        let found = match *m {
            "biortho" => biortho()?,
            "gaugeholo" => gaugeholo()?,
            "dynamics" => dynamics()?,
            "tripod" => tripod_suite()?,
            _ => bundles()?,
        };
        checks.extend(found.into_iter().map(|mut c| {
            c.name = format!("{m}.{}", c.name);
            c
        }));
    }
    Ok(checks)
}

fn biortho() -> Result<Vec<Check>> {
    let (mut bi, mut rec, mut ph, mut ph_left) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    for seed in 0..20 {
        let n = 2 + (seed as usize % 6);
        let (h, eta) = random_pseudo_hermitian(n, seed);
        let sys = biorthogonal_eig(&h, None)?;
        bi = bi.max(sys.biorthonormality_residual());
        rec = rec.max(sys.reconstruction_residual());
        ph = ph.max(pseudo_hermiticity_residual(&h, &eta)?);
        ph_left = ph_left.max(pseudo_hermiticity_residual(&h, &metric_from_left(&sys)?)?);
    }
    let (h, _) = random_pseudo_hermitian_with_spectrum(&[1.0, 1.0, -0.5, 2.0], 7);
    let sys = biorthogonal_eig(&h, None)?;
    let (_, blk) = sys.block(Level::Value(real(1.0)))?;
    Ok(vec![
        Check::below("biorthonormality", bi, 1e-10),
        Check::below("reconstruction", rec, 1e-10),
        Check::below("pseudo_hermiticity", ph, 1e-10),
        Check::below("metric_from_left", ph_left, 1e-10),
        Check::below("degenerate_block_size", (blk.len as f64 - 2.0).abs(), 0.5),
    ])
}

fn gaugeholo() -> Result<Vec<Check>> {
    let family = RandomDegenerateFamily::new(&[0.0, 0.0, 1.5, -1.0], 2, 0.3, 11);
    let path = ParamLoop::rectangle([0.0, 0.0], [0.3, 0.2]);
    let opts = HolonomyOptions {
        n_steps: 400,
        ..HolonomyOptions::default()
    };
    let fwd = holonomy_of_loop(&family, &path, Level::Value(ZERO), &opts)?;
    let back = holonomy_of_loop(&family, &path.reversed(), Level::Value(ZERO), &opts)?;
    let inverse_residual = (&fwd.matrix * &back.matrix - crate::matrix::identity(2)).norm();

    let frames = AnalyticFrames(|p: &[f64]| {
        let (r, l) = family.frames(p, &[0, 1])?;
        BlockFrame::new(r, l)
    });
    let anti = antihermiticity_residual(&frames, &family, &[0.1, -0.2], 1e-5)?;
    Ok(vec![
        Check::below("pseudo_unitarity", fwd.pseudo_unitarity_residual, 1e-8),
        Check::below("reversed_loop_inverse", inverse_residual, 1e-6),
        Check::below("antihermiticity", anti, 1e-6),
    ])
}

fn dynamics() -> Result<Vec<Check>> {
    let sys = FnSystem::breathing_metric(3, 4.0, 0.4, 5)?;
    let psi0 = ComplexVector::from_element(3, real(1.0 / 3f64.sqrt()));
    let mut opts = EvolveOptions {
        n_steps: 2000,
        mode: GeneratorMode::Full,
        fd_step: None,
    };
    let full = norm_conservation_drift(&evolve_with(&sys, &psi0, &opts)?);
    opts.mode = GeneratorMode::HamiltonianOnly;
    let control = norm_conservation_drift(&evolve_with(&sys, &psi0, &opts)?);
    let ode = [0.5, 1.7, 3.1]
        .iter()
        .map(|&t| metric_ode_residual(&sys, t, 1e-4))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(vec![
        Check::below("norm_drift", full, 1e-6),
        Check::above("control_drift", control, 1e-2),
        Check::below("metric_ode", ode, 1e-6),
    ])
}

fn tripod_suite() -> Result<Vec<Check>> {
    let (alpha, delta, kappa) = (0.6, 1.0, 1.0);
    let path = ParamLoop::rectangle([0.0, 0.0], [FRAC_PI_3, 2.0 * PI]);
    let opts = HolonomyOptions::default();
    let g1 = tripod::gate_u1(&path, alpha, delta, kappa, &opts)?;
    let g2 = tripod::gate_u2(&path, alpha, delta, kappa, &opts)?;
    let mut comm: f64 = 0.0;
    for i in 0..5 {
        for j in 0..5 {
            let (b1, b2) = (i as f64 * 1.3, j as f64 * 0.9);
            comm = comm.max(tripod::commutator_check(b1, b2));
        }
    }
    let fam = TripodFamily::new(Chart::U2, alpha, delta, kappa)?;
    let h = fam.hamiltonian(&[0.7, 1.1])?;
    let ph = pseudo_hermiticity_residual(&h, &tripod::metric(alpha, delta)?)?;
    Ok(vec![
        Check::below("u1_gate", g1.discrepancy, 1e-6),
        Check::below("u2_gate", g2.discrepancy, 1e-6),
        Check::below("u2_pseudo_unitarity", g2.pseudo_unitarity_residual, 1e-8),
        Check::below("commutator_identity", comm, 1e-12),
        Check::below("pseudo_hermiticity", ph, 1e-10),
    ])
}

fn bundles() -> Result<Vec<Check>> {
    let (mut ortho, mut grass, mut inv) = (0.0_f64, 0.0_f64, 0.0_f64);
    for seed in 0..10 {
        let (h, eta) = random_pseudo_hermitian_with_spectrum(&[0.0, 0.0, 0.0, 1.0, -2.0], 100 + seed);
        let sys = biorthogonal_eig(&h, None)?;
        let eta_a = MetricOperator::new(
            crate::random::hermitian(3, &mut crate::random::rng(seed)) * real(0.2) + crate::matrix::identity(3),
        )?;
        let f = stiefel_frame(&sys, Level::Value(ZERO), &eta, Some(&eta_a))?;
        ortho = ortho.max(f.orthonormality_residual());
        grass = grass.max(grassmann_projector(&f).residuals(&eta)?.max());
        let u = random_pseudo_unitary(&eta_a, 0.7, seed)?;
        inv = inv.max(group_action_invariance(&f, &u)?);
    }
    Ok(vec![
        Check::below("stiefel_orthonormality", ortho, 1e-10),
        Check::below("grassmann_residuals", grass, 1e-10),
        Check::below("group_action_invariance", inv, 1e-10),
    ])
}
