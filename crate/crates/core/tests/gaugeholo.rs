use std::f64::consts::{PI, TAU};

use holoq::biortho::{Level, MetricOperator};
use holoq::error::Error;
use holoq::gaugeholo::{
    gauge_field_sample, gauge_transform, holonomy_in_frames, holonomy_of_loop, line_integral, AnalyticFrames,
    BlockFrame, FnFamily, FrameField, HamiltonianFamily, HolonomyOptions, LoopSpec, ParamLoop, RandomDegenerateFamily,
    RotatedFrames, SegmentRule,
};
use holoq::matrix::{
    c64, expm, hermitian_function, identity, inverse, pauli_x, pauli_y, pauli_z, real, ComplexMatrix, I,
};
use holoq::random;
use proptest::prelude::*;

/// S·(n·σ)·S⁻¹ on the sphere (ϑ, φ) with a fixed non-unitary S.
fn dressed_spin() -> FnFamily {
    let s = ComplexMatrix::from_row_slice(2, 2, &[real(1.0), c64(0.4, 0.2), real(0.0), real(1.3)]);
    let s_inv = inverse(&s).unwrap();
    let eta = s_inv.adjoint() * &s_inv;
    FnFamily::new(2, 2, move |p| {
        let (t, f) = (p[0], p[1]);
        let n = pauli_x() * real(t.sin() * f.cos()) + pauli_y() * real(t.sin() * f.sin()) + pauli_z() * real(t.cos());
        &s * n * &s_inv
    })
    .with_metric(move |_| eta.clone())
}

#[test]
fn dressed_spin_has_berry_phase() {
    // The similarity S leaves the geometric phase of |+n⟩ unchanged:
    // exp(−iπ(1 − cos ϑ₀)) around the cap boundary.
    let fam = dressed_spin();
    for &t0 in &[0.4, PI / 2.0, 2.5] {
        let path = ParamLoop::rectangle([0.0, 0.0], [t0, TAU]);
        let hol = holonomy_of_loop(&fam, &path, Level::Value(real(1.0)), &HolonomyOptions::default()).unwrap();
        let want = c64(0.0, -PI * (1.0 - t0.cos())).exp();
        assert!((hol.matrix[(0, 0)] - want).norm() < 1e-7, "{t0}: {}", hol.matrix);
        assert!(hol.pseudo_unitarity_residual < 1e-8);
    }
}

#[test]
fn magnus_beats_midpoint() {
    let fam = RandomDegenerateFamily::new(&[0.0, 0.0, 1.0, -1.2], 2, 0.4, 21);
    let path = ParamLoop::rectangle([0.0, 0.0], [0.5, 0.4]);
    let run = |n, rule| {
        let opts = HolonomyOptions {
            n_steps: n,
            rule,
            ..HolonomyOptions::default()
        };
        holonomy_of_loop(&fam, &path, Level::Value(real(0.0)), &opts)
            .unwrap()
            .matrix
    };
    let reference = run(4000, SegmentRule::Magnus4);
    let e1 = (run(100, SegmentRule::Midpoint) - &reference).norm();
    let e2 = (run(200, SegmentRule::Midpoint) - &reference).norm();
    assert!(e1 / e2 > 3.5, "midpoint ratio {}", e1 / e2);
    assert!((run(200, SegmentRule::Magnus4) - &reference).norm() < e2 / 100.0);
}

#[test]
fn holonomy_is_frame_covariant() {
    // Changing the base frame by a constant 𝒰 conjugates the holonomy.
    let fam = RandomDegenerateFamily::new(&[0.0, 0.0, 1.5, -1.0], 2, 0.3, 4);
    let path = ParamLoop::rectangle([0.0, 0.0], [0.3, -0.2]);
    let (r, l) = fam.frames(&[0.0, 0.0], &[0, 1]).unwrap();
    let base = BlockFrame::new(r, l).unwrap();
    let u = expm(&(random::hermitian(2, &mut random::rng(5)) * I)) * real(1.7);
    let opts = |frame: BlockFrame| HolonomyOptions {
        base_frame: Some(frame),
        ..HolonomyOptions::default()
    };
    let h0 = holonomy_of_loop(&fam, &path, Level::Value(real(0.0)), &opts(base.clone())).unwrap();
    let h1 = holonomy_of_loop(&fam, &path, Level::Value(real(0.0)), &opts(base.rotated(&u).unwrap())).unwrap();
    let conj = inverse(&u).unwrap() * &h0.matrix * &u;
    assert!((h1.matrix - conj).norm() < 1e-8);
}

#[test]
fn analytic_and_projected_frames_agree() {
    let fam = RandomDegenerateFamily::new(&[0.0, 0.0, 2.0], 2, 0.2, 8);
    let path = ParamLoop::rectangle([0.1, 0.0], [0.4, 0.3]);
    let frames = AnalyticFrames(|p: &[f64]| {
        let (r, l) = fam.frames(p, &[0, 1])?;
        BlockFrame::new(r, l)
    });
    let opts = HolonomyOptions {
        base_frame: Some(frames.frame(&[0.1, 0.0]).unwrap()),
        ..HolonomyOptions::default()
    };
    let a = holonomy_in_frames(&frames, &fam, &path, &opts).unwrap();
    let b = holonomy_of_loop(&fam, &path, Level::Value(real(0.0)), &opts).unwrap();
    assert!((a.matrix - b.matrix).norm() < 1e-7);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn gauge_field_transforms_covariantly(seed in 0u64..1000, s in 0.1f64..1.0) {
        let fam = RandomDegenerateFamily::new(&[0.0, 0.0, 1.0, -0.7], 2, 0.3, seed);
        let mut rng = random::rng(seed ^ 0xabc);
        let m = random::invertible(2, 4.0, &mut rng);
        let eta_d = MetricOperator::new(m.adjoint() * &m).unwrap();
        let base = AnalyticFrames(|p: &[f64]| {
            let (r, l) = fam.frames(p, &[0, 1])?;
            BlockFrame::new(r, l)?.rotated(&m)
        });
        let root = hermitian_function(eta_d.matrix(), f64::sqrt);
        let x = inverse(&root).unwrap() * random::hermitian(2, &mut rng) * &root;
        let u = |p: &[f64]| Ok(expm(&(&x * (I * s * (p[0] + 2.0 * p[1].sin())))));
        let point = [0.2, -0.1];
        let h = 1e-5;
        let sample = gauge_field_sample(&base, &fam, &point, h).unwrap();
        let predicted = gauge_transform(&sample, eta_d.matrix(), u, h).unwrap();
        let direct = gauge_field_sample(&RotatedFrames::new(&base, u), &fam, &point, h).unwrap();
        for (a, b) in predicted.components.iter().zip(&direct.components) {
            prop_assert!((a - b).norm() < 1e-6);
        }
    }

    #[test]
    fn reversed_loop_inverts(seed in 0u64..1000) {
        let fam = RandomDegenerateFamily::new(&[0.0, 0.0, 1.2], 2, 0.3, seed);
        let path = ParamLoop::rectangle([0.0, 0.0], [0.25, 0.2]);
        let opts = HolonomyOptions { n_steps: 400, ..HolonomyOptions::default() };
        let f = holonomy_of_loop(&fam, &path, Level::Value(real(0.0)), &opts).unwrap();
        let b = holonomy_of_loop(&fam, &path.reversed(), Level::Value(real(0.0)), &opts).unwrap();
        prop_assert!((&f.matrix * &b.matrix - identity(2)).norm() < 1e-7);
    }
}

#[test]
fn open_loop_is_rejected() {
    let fam = RandomDegenerateFamily::new(&[0.0, 0.0, 1.0], 2, 0.3, 1);
    let open = ParamLoop::new(vec![vec![0.0, 0.0], vec![0.2, 0.0], vec![0.2, 0.2]], false).unwrap();
    assert!(matches!(
        holonomy_of_loop(&fam, &open, Level::Value(real(0.0)), &HolonomyOptions::default()),
        Err(Error::LoopNotClosed { .. })
    ));
}

#[test]
fn crossing_levels_are_reported() {
    // diag(λ, −λ, 5) is degenerate at λ = 0, which the loop crosses.
    let fam = FnFamily::new(3, 1, |p| {
        ComplexMatrix::from_diagonal(&holoq::matrix::ComplexVector::from_vec(vec![
            real(p[0]),
            real(-p[0]),
            real(5.0),
        ]))
    });
    let path = ParamLoop::closed(vec![vec![1.0], vec![-1.0], vec![1.0]]).unwrap();
    let res = holonomy_of_loop(&fam, &path, Level::Value(real(1.0)), &HolonomyOptions::default());
    assert!(
        matches!(res, Err(Error::GapClosure { .. } | Error::PairingAmbiguity { .. })),
        "{res:?}"
    );
}

#[test]
fn loop_json_round_trips() {
    let spec: LoopSpec =
        serde_json::from_str(r#"{"chart": "u1", "points": [[0, 0], [1, 0], [1, 1], [0, 0]]}"#).unwrap();
    let path = spec.to_loop().unwrap();
    assert!(path.is_closed());
    let back: LoopSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
    assert_eq!(back, spec);
    // ∮ x dy over the triangle (0,0) → (1,0) → (1,1) is its area.
    let area = line_integral(|p| vec![0.0, p[0]], &path, 4);
    assert!((area - 0.5).abs() < 1e-14);
}

#[test]
fn family_reports_its_dimensions() {
    let fam = dressed_spin();
    assert_eq!((fam.dim(), fam.chart_dim()), (2, 2));
    assert!(matches!(fam.hamiltonian(&[0.1]), Err(Error::DimensionMismatch { .. })));
}
