use num_complex::Complex64;
use proptest::prelude::*;
use soliton_lab::dynamics::{modulated_distance, SolitonSpec};
use soliton_lab::grid::{band_limited_noise, compute_functionals, GridSpec, ScalarField};
use soliton_lab::groundstate::{
    default_r_max, embed_profile, omega_p, radial_functionals, shoot_profile, DEFAULT_NODES,
};
use soliton_lab::variational::*;
use soliton_lab::{Error, ProblemParams};

fn params() -> ProblemParams {
    ProblemParams::new(2, 5.0).unwrap()
}

fn grid() -> GridSpec {
    GridSpec::new(32.0, 128).unwrap()
}

fn gaussian(grid: GridSpec, amp: f64, width: f64) -> ScalarField {
    ScalarField::from_fn(grid, |x, y| {
        Complex64::new(amp * (-(x * x + y * y) / (2.0 * width * width)).exp(), 0.0)
    })
}

#[test]
fn fixed_mass_minimizer_is_the_ground_state() {
    let q = critical_mass(2).unwrap();
    let m = 1.5 * q;
    let res = minimize_fixed_mass(m, &params(), &grid(), None).unwrap();
    assert!(res.objective < 0.0);
    assert!(res.residual < 1e-8);
    assert!(((res.minimizer.mass() - m) / m).abs() < 1e-10);
    assert!(res.history.windows(2).all(|w| w[1] <= w[0]));

    let prof = shoot_profile(
        &params(),
        res.lagrange_omega,
        default_r_max(res.lagrange_omega),
        DEFAULT_NODES,
    )
    .unwrap();
    let md = modulated_distance(&res.minimizer, &prof).unwrap();
    assert!(md.distance < 1e-3, "{md:?}");

    // Positive after removing the global phase.
    let v = res.minimizer.values();
    let peak = res.minimizer.max_abs();
    let phase = v[grid().len() / 2 + grid().n() / 2].arg();
    let rot = Complex64::from_polar(1.0, -phase);
    assert!(v
        .iter()
        .all(|z| (z * rot).re > 1e-10 * peak && (z * rot).im.abs() < 1e-12 * peak));

    let rotated = res.minimizer.scaled(Complex64::from_polar(1.0, 0.9));
    let again = minimize_fixed_mass(m, &params(), &grid(), Some(&rotated)).unwrap();
    assert!((again.objective - res.objective).abs() < 1e-10);
    assert!((again.lagrange_omega - res.lagrange_omega).abs() < 1e-10);
}

#[test]
fn multiplier_round_trips_through_the_mass_map() {
    let omega = 0.1;
    let prof = shoot_profile(&params(), omega, default_r_max(omega), DEFAULT_NODES).unwrap();
    let res = minimize_fixed_mass(prof.mass, &params(), &grid(), None).unwrap();
    assert!(
        (res.lagrange_omega - omega).abs() < 1e-3,
        "{}",
        res.lagrange_omega
    );
}

#[test]
fn fixed_mass_errors() {
    let p = params();
    let g = grid();
    let q = critical_mass(2).unwrap();
    assert!(matches!(
        minimize_fixed_mass(q, &p, &g, None),
        Err(Error::MassTooSmall { .. })
    ));
    assert!(matches!(
        minimize_fixed_mass(0.9 * q, &p, &g, None),
        Err(Error::MassTooSmall { .. })
    ));
    let other = gaussian(GridSpec::new(16.0, 64).unwrap(), 1.0, 3.0);
    assert_eq!(
        minimize_fixed_mass(2.0 * q, &p, &g, Some(&other)).unwrap_err(),
        Error::GridMismatch
    );
    let zero = ScalarField::zeros(g);
    assert!(matches!(
        minimize_fixed_mass(2.0 * q, &p, &g, Some(&zero)),
        Err(Error::DegenerateInput(_))
    ));
    let short = FlowOptions {
        max_iter: 2,
        ..FlowOptions::default()
    };
    assert!(matches!(
        minimize_fixed_mass_with(2.0 * q, &p, &g, None, &short),
        Err(Error::FlowStalled { iterations: 2, .. })
    ));
    let p3 = ProblemParams::new(3, 3.0).unwrap();
    assert!(matches!(
        minimize_fixed_mass(2.0 * q, &p3, &g, None),
        Err(Error::ParamMismatch(_))
    ));
}

#[test]
fn ground_state_sits_on_the_pohozaev_manifold() {
    let omega = 0.1;
    let prof = shoot_profile(&params(), omega, default_r_max(omega), DEFAULT_NODES).unwrap();
    let q = embed_profile(&prof, &grid(), &SolitonSpec::at_rest(omega), 0.0).unwrap();
    let (lambda, out) = pohozaev_rescale(&q, &params()).unwrap();
    assert!((lambda - 1.0).abs() < 1e-4, "{lambda}");
    assert!(((out.mass() - q.mass()) / q.mass()).abs() < 1e-10);
}

/// `I(u_λ)` for `u_λ = λ·3e^{−λ²|x|²/2}` sampled directly on the grid.
fn scaled_gaussian_pohozaev(grid: GridSpec, lambda: f64) -> f64 {
    let u = gaussian(grid, 3.0 * lambda, 1.0 / lambda);
    compute_functionals(&u, &params()).unwrap().pohozaev
}

#[test]
fn gaussian_root_matches_brute_force_scan() {
    let grid = GridSpec::new(24.0, 128).unwrap();
    let (mut lo, mut step) = (0.05, 0.01);
    while step > 1e-6 {
        let mut x = lo;
        while scaled_gaussian_pohozaev(grid, x + step) < 0.0 {
            x += step;
        }
        lo = x;
        step /= 10.0;
    }
    let (lambda, out) = pohozaev_rescale(&gaussian(grid, 3.0, 1.0), &params()).unwrap();
    assert!((lambda - lo).abs() < 2e-6, "{lambda} {lo}");
    let f = compute_functionals(&out, &params()).unwrap();
    assert!(f.pohozaev.abs() < 1e-8 * f.gradient_sq, "{}", f.pohozaev);
}

#[test]
fn subcritical_gaussian_has_no_pohozaev_root() {
    let g = gaussian(grid(), 1.0, 1.0);
    assert_eq!(
        pohozaev_rescale(&g, &params()).unwrap_err(),
        Error::NoPohozaevRoot
    );
    assert!(matches!(
        pohozaev_rescale(&ScalarField::zeros(grid()), &params()),
        Err(Error::DegenerateInput(_))
    ));
}

#[test]
fn fixed_frequency_problem_recovers_the_shooting_profile() {
    let omega = 0.12;
    let prof = shoot_profile(&params(), omega, default_r_max(omega), DEFAULT_NODES).unwrap();
    let rf = radial_functionals(&prof, &params());
    let res = minimize_pohozaev(omega, 60.0, &params(), &grid()).unwrap();
    assert!(res.residual < 1e-4, "{}", res.residual);
    let md = modulated_distance(&res.minimizer, &prof).unwrap();
    assert!(md.distance < 1e-3, "{md:?}");
    let d_omega = rf.energy + omega * rf.mass;
    assert!(
        ((res.objective - d_omega) / d_omega).abs() < 1e-4,
        "{} {d_omega}",
        res.objective
    );
    assert!(res.minimizer.mass() <= 60.0);

    let warm = minimize_pohozaev_with(
        omega,
        60.0,
        &params(),
        &grid(),
        Some(&res.minimizer),
        &FlowOptions::default(),
    )
    .unwrap();
    assert_eq!(warm.iterations, 0);
    assert!((warm.objective - res.objective).abs() < 1e-12);
}

#[test]
fn fixed_frequency_errors() {
    let p = params();
    let g = grid();
    assert!(matches!(
        minimize_pohozaev(0.12, 20.0, &p, &g),
        Err(Error::WindowViolation(_))
    ));
    assert!(matches!(
        minimize_pohozaev(0.12, 11.0, &p, &g),
        Err(Error::MassTooSmall { .. })
    ));
    assert!(matches!(
        minimize_pohozaev(omega_p(&p), 60.0, &p, &g),
        Err(Error::InvalidParameter(_))
    ));
    assert!(matches!(
        minimize_pohozaev(-0.1, 60.0, &p, &g),
        Err(Error::InvalidParameter(_))
    ));
}

#[test]
fn mass_map_is_increasing_and_records_failures() {
    let p = params();
    let q = critical_mass(2).unwrap();
    let mut omegas: Vec<f64> = (1..=8).map(|i| 0.02 * i as f64).collect();
    omegas.push(0.2);
    omegas.reverse();
    let map = mass_frequency_map(&omegas, &p);
    assert_eq!(map.samples.len(), 8);
    assert_eq!(map.failures.len(), 1);
    assert_eq!(map.failures[0].0, 0.2);
    assert!(map.samples.windows(2).all(|w| w[0].omega < w[1].omega));
    let big: Vec<_> = map.samples.iter().filter(|s| s.mass > q).collect();
    assert!(big.windows(2).all(|w| w[1].mass > w[0].mass));
    for s in &map.samples {
        assert!(
            (s.d_value - (s.energy + s.omega * s.mass)).abs() < 1e-12 * s.d_value.abs().max(1.0)
        );
    }
}

#[test]
fn energy_mass_identity_on_a_fine_map() {
    let omegas: Vec<f64> = (0..=56).map(|i| 0.02 + 0.0025 * i as f64).collect();
    let map = mass_frequency_map(&omegas, &params());
    assert!(map.failures.is_empty());
    let defects = map.energy_identity_defects();
    assert_eq!(defects.len(), 55);
    for (w, d) in defects {
        assert!(d < 1e-2, "omega {w}: {d:e}");
    }
}

#[test]
fn omega_q_estimates() {
    let p = params();
    let q = critical_mass(2).unwrap();
    let omegas: Vec<f64> = (1..=8).map(|i| 0.02 * i as f64).collect();
    let map = mass_frequency_map(&omegas, &p);
    let est = estimate_omega_q(&map.samples, q, &p, 1e-4).unwrap();
    assert!((0.0..omega_p(&p)).contains(&est));
    let above = shoot_profile(&p, est + 1e-3, default_r_max(est + 1e-3), DEFAULT_NODES).unwrap();
    assert!(above.mass > q);
    assert_eq!(est, 0.0);

    // A raised threshold moves the crossing inside the sampled window.
    let threshold = 20.0;
    let coarse = estimate_omega_q(&map.samples, threshold, &p, 1e-4).unwrap();
    let fine = estimate_omega_q(&map.samples, threshold, &p, 5e-5).unwrap();
    assert!(coarse > 0.08 && coarse < 0.1);
    assert!((coarse - fine).abs() < 1e-4);
    let below = shoot_profile(&p, coarse - 1e-4, default_r_max(coarse), DEFAULT_NODES).unwrap();
    let at = shoot_profile(&p, coarse, default_r_max(coarse), DEFAULT_NODES).unwrap();
    assert!(below.mass <= threshold && at.mass > threshold);

    assert_eq!(
        estimate_omega_q(&map.samples, 1e6, &p, 1e-4).unwrap_err(),
        Error::NoBigSolitonInRange
    );
    assert!(matches!(
        estimate_omega_q(&[], q, &p, 1e-4),
        Err(Error::InvalidParameter(_))
    ));
    let mut shuffled = map.samples.clone();
    shuffled.swap(0, 1);
    assert!(matches!(
        estimate_omega_q(&shuffled, q, &p, 1e-4),
        Err(Error::InvalidParameter(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn rescaling_preserves_mass(amp in 2.5f64..4.0, width in 0.8f64..1.6, seed in 0u64..1000) {
        let g = GridSpec::new(24.0, 64).unwrap();
        let field = gaussian(g, amp, width).add(&band_limited_noise(g, 6, seed).scaled(Complex64::new(0.1, 0.0))).unwrap();
        let (lambda, out) = pohozaev_rescale(&field, &params()).unwrap();
        prop_assert!(lambda > 1e-3 && lambda < 1e3);
        prop_assert!(((out.mass() - field.mass()) / field.mass()).abs() < 1e-10);
    }
}
