use num_complex::Complex64;
use proptest::prelude::*;
use soliton_lab::dynamics::{
    build_multisoliton, evolve, localized_quantities, modulated_distance, multisoliton_experiment,
    step_strang, MultiSolitonConfig, ProbeConfig, SolitonSpec, Stepper,
};
use soliton_lab::grid::{
    band_limited_noise, compute_functionals, h1_distance, GridSpec, ScalarField,
};
use soliton_lab::groundstate::{
    default_r_max, embed_profile, shoot_profile, solve_q, RadialProfile, DEFAULT_NODES,
};
use soliton_lab::{Error, ProblemParams};

fn params() -> ProblemParams {
    ProblemParams::new(2, 5.0).unwrap()
}

fn profile(omega: f64) -> RadialProfile {
    shoot_profile(&params(), omega, default_r_max(omega), DEFAULT_NODES).unwrap()
}

fn gaussian(grid: GridSpec, amp: f64) -> ScalarField {
    ScalarField::from_fn(grid, |x, y| {
        Complex64::new(amp * (-(x * x + y * y) / 2.0).exp(), 0.0)
    })
}

fn probes(stride: usize) -> ProbeConfig {
    ProbeConfig {
        stride,
        snapshot_stride: None,
    }
}

#[test]
fn free_flow_matches_closed_form() {
    let grid = GridSpec::new(24.0, 256).unwrap();
    let mut phi = gaussian(grid, 1.0);
    let stepper = Stepper::linear_only(grid, params(), 0.1).unwrap();
    stepper.advance(&mut phi, 10).unwrap();
    // e^{−|x|²/2} evolves to e^{−|x|²/(2(1+2it))} / (1+2it).
    let s = Complex64::new(1.0, 2.0);
    let exact = ScalarField::from_fn(grid, |x, y| (-(x * x + y * y) / (2.0 * s)).exp() / s);
    let err = phi.sub(&exact).unwrap().max_abs();
    assert!(err < 1e-8, "{err:e}");
}

#[test]
fn resting_soliton_is_a_fixed_point_modulo_phase() {
    let omega = 0.12;
    let prof = profile(omega);
    let grid = GridSpec::new(24.0, 256).unwrap();
    let q = embed_profile(&prof, &grid, &SolitonSpec::at_rest(omega), 0.0).unwrap();
    let trace = evolve(&q, 0.0, 5.0, 1e-3, &params(), probes(1000)).unwrap();
    let m = modulated_distance(&trace.final_field, &prof).unwrap();
    assert!(m.distance < 1e-4, "{m:?}");
    assert!((m.theta - (5.0 * omega)).abs() < 1e-4);
    assert!(trace.mass_drift() < 1e-10);
}

#[test]
fn short_run_conserves_invariants() {
    let grid = GridSpec::new(16.0, 128).unwrap();
    let phi = gaussian(grid, 1.2).boosted([1.0, 0.5]);
    let trace = evolve(&phi, 0.0, 1.0, 1e-3, &params(), probes(100)).unwrap();
    assert_eq!(trace.times.len(), 11);
    assert!(trace.times.windows(2).all(|w| w[1] > w[0]));
    assert!(trace.mass_drift() < 1e-10);
    assert!(
        trace.momentum_drift() < 1e-8,
        "{:e}",
        trace.momentum_drift()
    );
    assert!(trace.energy_drift() < 1e-5, "{:e}", trace.energy_drift());
}

#[test]
fn energy_drift_is_second_order() {
    let grid = GridSpec::new(16.0, 128).unwrap();
    let phi = gaussian(grid, 1.4);
    let drift = |dt: f64| {
        let steps = (1.0 / dt).round() as usize;
        evolve(&phi, 0.0, 1.0, dt, &params(), probes(steps / 10))
            .unwrap()
            .energy_drift()
    };
    let ratio = drift(0.01) / drift(0.005);
    assert!((3.5..4.5).contains(&ratio), "{ratio}");
}

#[test]
fn splitting_order() {
    let grid = GridSpec::new(16.0, 128).unwrap();
    let phi = gaussian(grid, 1.4);
    let run = |dt: f64| {
        let steps = (1.0 / dt).round() as usize;
        evolve(&phi, 0.0, 1.0, dt, &params(), probes(steps))
            .unwrap()
            .final_field
    };
    let (a, b, c) = (run(0.02), run(0.01), run(0.005));
    let order = (h1_distance(&a, &b).unwrap() / h1_distance(&b, &c).unwrap()).log2();
    assert!((1.9..=2.1).contains(&order), "{order}");
}

#[test]
fn empty_evolution() {
    let grid = GridSpec::new(16.0, 64).unwrap();
    let phi = gaussian(grid, 1.0);
    let trace = evolve(&phi, 2.0, 2.0, 1e-3, &params(), ProbeConfig::default()).unwrap();
    assert_eq!(trace.times, vec![2.0]);
    assert_eq!(trace.final_field, phi);
    assert!(matches!(
        evolve(&phi, 0.0, 1.0, 0.3, &params(), ProbeConfig::default()),
        Err(Error::InvalidParameter(_))
    ));
}

#[test]
fn time_reversal() {
    let grid = GridSpec::new(16.0, 128).unwrap();
    let phi = gaussian(grid, 1.4).boosted([0.5, 0.0]);
    let fwd = evolve(&phi, 0.0, 5.0, 0.01, &params(), probes(500)).unwrap();
    let back = evolve(&fwd.final_field, 5.0, 0.0, -0.01, &params(), probes(500)).unwrap();
    let err = h1_distance(&back.final_field, &phi).unwrap();
    assert!(err < 1e-6, "{err:e}");
}

#[test]
fn galilean_covariance() {
    let grid = GridSpec::new(24.0, 256).unwrap();
    let v = [2.0, 0.0];
    let phi = gaussian(grid, 1.2);
    let t = 1.0;
    let dt = 5e-3;
    let moved = evolve(&phi.boosted(v), 0.0, t, dt, &params(), probes(200))
        .unwrap()
        .final_field;
    let rest = evolve(&phi, 0.0, t, dt, &params(), probes(200))
        .unwrap()
        .final_field;
    let phase = Complex64::from_polar(1.0, -0.25 * (v[0] * v[0] + v[1] * v[1]) * t);
    let expected = rest
        .translated([v[0] * t, v[1] * t])
        .boosted(v)
        .scaled(phase);
    let err = h1_distance(&moved, &expected).unwrap();
    assert!(err < 1e-5, "{err:e}");
}

#[test]
fn phase_covariance() {
    let grid = GridSpec::new(16.0, 64).unwrap();
    let phi = gaussian(grid, 1.3)
        .add(&band_limited_noise(grid, 8, 3).scaled(Complex64::new(0.1, 0.0)))
        .unwrap();
    let rot = Complex64::from_polar(1.0, 0.7);
    let a = evolve(&phi.scaled(rot), 0.0, 0.5, 0.01, &params(), probes(50))
        .unwrap()
        .final_field;
    let b = evolve(&phi, 0.0, 0.5, 0.01, &params(), probes(50))
        .unwrap()
        .final_field
        .scaled(rot);
    assert!(a.sub(&b).unwrap().max_abs() < 1e-12);
}

#[test]
fn blowup_is_reported() {
    let grid = GridSpec::new(8.0, 32).unwrap();
    let phi = gaussian(grid, 1e80);
    assert!(matches!(
        step_strang(&phi, 1e-3, &params()),
        Err(Error::NumericalBlowup { .. })
    ));
    let err = evolve(&phi, 0.0, 0.01, 1e-3, &params(), probes(5)).unwrap_err();
    assert!(
        matches!(err, Error::NumericalBlowup { time } if (time - 1e-3).abs() < 1e-12),
        "{err:?}"
    );
}

#[test]
fn modulated_distance_recovers_orbit_parameters() {
    let q = solve_q(2, 40.0, DEFAULT_NODES).unwrap();
    let grid = GridSpec::new(24.0, 256).unwrap();
    // Q(· + (2, −1)) is centered at (−2, 1).
    let spec = SolitonSpec {
        omega: 1.0,
        x0: [-2.0, 1.0],
        v: [0.0, 0.0],
        gamma: 1.3,
    };
    let phi = embed_profile(&q, &grid, &spec, 0.0).unwrap();
    let m = modulated_distance(&phi, &q).unwrap();
    assert!(m.distance < 1e-10, "{m:?}");
    assert!((m.theta - 1.3).abs() < 1e-9);
    assert!(
        (m.shift[0] - 2.0).abs() < 1e-9 && (m.shift[1] + 1.0).abs() < 1e-9,
        "{m:?}"
    );
}

#[test]
fn modulated_distance_of_perturbed_and_scaled_fields() {
    let omega = 0.12;
    let prof = profile(omega);
    let grid = GridSpec::new(24.0, 256).unwrap();
    let q = embed_profile(&prof, &grid, &SolitonSpec::at_rest(omega), 0.0).unwrap();
    let noisy = q
        .add(&band_limited_noise(grid, 32, 11).scaled(Complex64::new(0.01, 0.0)))
        .unwrap();
    let m = modulated_distance(&noisy, &prof).unwrap();
    assert!(m.distance > 0.0 && m.distance <= 0.05, "{m:?}");

    let m = modulated_distance(&q.scaled(Complex64::new(2.0, 0.0)), &prof).unwrap();
    assert!(
        (m.distance - q.h1_norm()).abs() < 1e-6 * q.h1_norm(),
        "{m:?}"
    );

    assert!(matches!(
        modulated_distance(&ScalarField::zeros(grid), &prof),
        Err(Error::DegenerateInput(_))
    ));
}

#[test]
fn embedding_examples() {
    let omega = 0.1;
    let prof = profile(omega);
    let grid = GridSpec::new(32.0, 256).unwrap();
    let q = embed_profile(&prof, &grid, &SolitonSpec::at_rest(omega), 0.0).unwrap();
    assert!(q.values().iter().all(|z| z.im == 0.0 && z.re > 0.0));
    assert!(((q.mass() - prof.mass) / prof.mass).abs() < 1e-6);

    let moving = SolitonSpec {
        v: [2.0, 0.0],
        ..SolitonSpec::at_rest(omega)
    };
    let phi0 = embed_profile(&prof, &grid, &moving, 0.0).unwrap();
    let f = compute_functionals(&phi0, &params()).unwrap();
    assert!((f.momentum[0] - f.mass).abs() < 1e-6 * f.mass && f.momentum[1].abs() < 1e-6);

    // Same soliton one time unit later: translated by v with a new phase.
    // The boost phase is periodic on the box only when v/2 is a lattice wavenumber.
    let grid = GridSpec::new(16.0 * std::f64::consts::PI, 256).unwrap();
    let phi1 = embed_profile(&prof, &grid, &moving, 1.0).unwrap();
    let back = phi1.translated([-2.0, 0.0]).boosted([-2.0, 0.0]);
    let m = modulated_distance(&back, &prof).unwrap();
    assert!(m.distance < 1e-6, "{m:?}");

    let other = SolitonSpec::at_rest(0.11);
    assert!(matches!(
        embed_profile(&prof, &grid, &other, 0.0),
        Err(Error::ParamMismatch(_))
    ));
}

fn pair(separation: f64, omega: f64) -> MultiSolitonConfig {
    let s = |x: f64, v: f64| SolitonSpec {
        omega,
        x0: [x, 0.0],
        v: [v, 0.0],
        gamma: 0.0,
    };
    MultiSolitonConfig::new(
        vec![s(-separation / 2.0, -2.0), s(separation / 2.0, 2.0)],
        4.0,
    )
    .unwrap()
}

#[test]
fn multisoliton_construction() {
    let omega = 0.1;
    let prof = profile(omega);
    let grid = GridSpec::new(16.0 * std::f64::consts::PI, 256).unwrap();

    let single = MultiSolitonConfig::new(vec![SolitonSpec::at_rest(omega)], 4.0).unwrap();
    let built = build_multisoliton(&single, std::slice::from_ref(&prof), &grid, 0.0).unwrap();
    assert_eq!(
        built,
        embed_profile(&prof, &grid, &SolitonSpec::at_rest(omega), 0.0).unwrap()
    );

    let two = pair(20.0, omega);
    let profiles = vec![prof.clone(), prof.clone()];
    let r = build_multisoliton(&two, &profiles, &grid, 0.0).unwrap();
    let single_mass = embed_profile(&prof, &grid, &two.specs[0], 0.0)
        .unwrap()
        .mass();
    assert!(
        ((r.mass() - 2.0 * single_mass) / r.mass()).abs() < 1e-6,
        "{}",
        r.mass()
    );

    let later = build_multisoliton(&two, &profiles, &grid, 1.0).unwrap();
    let shifted_specs = two
        .specs
        .iter()
        .map(|s| SolitonSpec {
            x0: [s.x0[0] + s.v[0], s.x0[1] + s.v[1]],
            gamma: s.gamma - 0.25 * (s.v[0] * s.v[0] + s.v[1] * s.v[1]) + s.omega,
            ..*s
        })
        .collect();
    let shifted = MultiSolitonConfig::new(shifted_specs, 4.0).unwrap();
    let direct = build_multisoliton(&shifted, &profiles, &grid, 0.0).unwrap();
    assert!(later.sub(&direct).unwrap().max_abs() < 1e-12);

    assert!(matches!(
        build_multisoliton(&two, &profiles[..1], &grid, 0.0),
        Err(Error::ParamMismatch(_))
    ));
}

#[test]
fn localized_masses() {
    let omega = 0.1;
    let prof = profile(omega);
    let grid = GridSpec::new(16.0 * std::f64::consts::PI, 256).unwrap();
    let cfg = pair(40.0, omega);
    let profiles = vec![prof.clone(), prof.clone()];
    let phi = build_multisoliton(&cfg, &profiles, &grid, 0.0).unwrap();
    let (masses, momenta) = localized_quantities(&phi, &cfg, 0.0);
    for (k, m) in masses.iter().enumerate() {
        assert!(((m - prof.mass) / prof.mass).abs() < 1e-4, "I_{k} = {m}");
    }
    assert!((momenta[0][0] + prof.mass).abs() < 1e-3 * prof.mass);
    assert!((momenta[1][0] - prof.mass).abs() < 1e-3 * prof.mass);

    for t in [0.0, 0.7, 3.0] {
        for j in 0..grid.n() {
            let w = cfg.weights(grid.coord(j), t);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(w.iter().all(|&y| (0.0..=1.0).contains(&y)));
        }
    }
}

#[test]
fn single_soliton_multisoliton_run_and_box_exit() {
    let omega = 0.12;
    let prof = profile(omega);
    let grid = GridSpec::new(16.0 * std::f64::consts::PI, 256).unwrap();
    let moving = SolitonSpec {
        v: [2.0, 0.0],
        ..SolitonSpec::at_rest(omega)
    };
    let cfg = MultiSolitonConfig::new(vec![moving], 4.0).unwrap();
    let trace = multisoliton_experiment(
        &cfg,
        std::slice::from_ref(&prof),
        1.0,
        &params(),
        &grid,
        1e-3,
        probes(250),
    )
    .unwrap();
    assert!(trace.max_residual() < 1e-3, "{:e}", trace.max_residual());
    assert_eq!(trace.localized_mass.len(), trace.times.len());

    let runaway = MultiSolitonConfig::new(
        vec![SolitonSpec {
            x0: [30.0, 0.0],
            ..moving
        }],
        4.0,
    )
    .unwrap();
    let err = multisoliton_experiment(&runaway, &[prof], 5.0, &params(), &grid, 1e-3, probes(250))
        .unwrap_err();
    assert!(matches!(err, Error::BoxExit { index: 0, .. }), "{err:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn each_step_is_unitary(seed in 0u64..10_000, amp in 0.1f64..2.0, dt in 1e-4f64..1e-2) {
        let grid = GridSpec::new(12.0, 64).unwrap();
        let phi = gaussian(grid, amp).add(&band_limited_noise(grid, 8, seed)).unwrap();
        let next = step_strang(&phi, dt, &params()).unwrap();
        prop_assert!(((next.mass() - phi.mass()) / phi.mass()).abs() < 1e-13);
    }
}
