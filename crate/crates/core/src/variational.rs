//! Constrained minimization on the periodic grid and the mass–frequency map.
//!
//! The fixed-mass problem is solved by a Sobolev-preconditioned nonlinear
//! conjugate gradient flow on the sphere `∫|u|² = m`. Over the Pohozaev
//! manifold the fixed-frequency action `E + ωM` is concave along the mass
//! direction, so that problem is solved as an outer root find on the mass
//! (matching the multiplier to `ω`) around the fixed-mass flow.

use std::sync::OnceLock;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fft::Fft2;
use crate::grid::{power_integrals, GridSpec, Integrals, ScalarField};
use crate::groundstate::{
    default_r_max, omega_p, radial_functionals, shoot_profile, solve_q, DEFAULT_NODES,
};
use crate::numerics::{bisect, pairwise_sum_by, three_point_slope};
use crate::params::{pow_from_sq, ProblemParams};

/// Stopping rules for the flows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowOptions {
    /// Fixed-point defect in `H¹` below which a fixed-mass flow stops.
    pub tol: f64,
    pub max_iter: usize,
    /// Target for `|ω_m − ω|` in the fixed-frequency solve.
    pub omega_tol: f64,
    /// Mass updates allowed in the fixed-frequency solve.
    pub max_outer: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 20_000,
            omega_tol: 1e-9,
            max_outer: 60,
        }
    }
}

/// Outcome of a constrained minimization.
#[derive(Debug, Clone)]
pub struct FlowResult {
    pub minimizer: ScalarField,
    /// Lagrange multiplier `ω_m = −⟨E′(u), u⟩ / (2m)`.
    pub lagrange_omega: f64,
    /// `E(u)` for the fixed-mass problem, `E(u) + ω∫|u|²` for the
    /// fixed-frequency one.
    pub objective: f64,
    pub iterations: usize,
    /// Fixed-point defect for the fixed-mass flow; relative residual of the
    /// stationary equation at the target frequency for the fixed-frequency
    /// solve.
    pub residual: f64,
    /// Objective after every accepted step (fixed mass) or every mass update
    /// (fixed frequency), starting from the initial value.
    pub history: Vec<f64>,
}

/// Mass of the critical ground state `q`, computed once per dimension.
pub fn critical_mass(d: u32) -> Result<f64> {
    static CACHE: [OnceLock<f64>; 2] = [OnceLock::new(), OnceLock::new()];
    let slot = match d {
        2 => &CACHE[0],
        3 => &CACHE[1],
        _ => return Err(Error::InvalidDimension(d)),
    };
    if let Some(&m) = slot.get() {
        return Ok(m);
    }
    let m = solve_q(d, 40.0, DEFAULT_NODES)?.mass;
    Ok(*slot.get_or_init(|| m))
}

fn require_planar(params: &ProblemParams) -> Result<()> {
    if params.d() != 2 {
        return Err(Error::ParamMismatch(format!(
            "grid problems need d = 2, got d = {}",
            params.d()
        )));
    }
    Ok(())
}

/// Grid-dependent pieces shared by every iteration.
struct Landscape {
    params: ProblemParams,
    grid: GridSpec,
    k2: Vec<f64>,
    shift: f64,
    precond: Vec<f64>,
    fft: std::rc::Rc<Fft2>,
}

impl Landscape {
    fn new(params: ProblemParams, grid: GridSpec, shift: f64) -> Self {
        let k2 = full_k_squared(&grid);
        let precond = k2.iter().map(|k| 1.0 / (shift + k)).collect();
        Self {
            params,
            grid,
            k2,
            shift,
            precond,
            fft: Fft2::plan(grid.n()),
        }
    }

    fn set_shift(&mut self, shift: f64) {
        self.shift = shift;
        self.precond = self.k2.iter().map(|k| 1.0 / (shift + k)).collect();
    }

    fn forward(&self, values: &[Complex64]) -> Vec<Complex64> {
        let mut spec = values.to_vec();
        self.fft.forward(&mut spec);
        spec
    }

    fn inverse(&self, mut spec: Vec<Complex64>) -> Vec<Complex64> {
        self.fft.inverse(&mut spec);
        spec
    }

    /// `Σ w_k |ŝ_k|²` scaled to an integral.
    fn parseval<W: Fn(usize) -> f64>(&self, spec: &[Complex64], w: W) -> f64 {
        let norm = self.grid.cell_area() / spec.len() as f64;
        norm * pairwise_sum_by(spec.len(), |i| w(i) * spec[i].norm_sqr())
    }

    /// Integrals of `u` with the gradient term taken from its spectrum.
    fn integrals(&self, u: &[Complex64], spec: &[Complex64]) -> Integrals {
        let area = self.grid.cell_area();
        let s = self.params.sigma();
        let p = self.params.p();
        Integrals {
            mass: area * pairwise_sum_by(u.len(), |i| u[i].norm_sqr()),
            gradient_sq: self.parseval(spec, |i| self.k2[i]),
            critical_power: area
                * pairwise_sum_by(u.len(), |i| pow_from_sq(u[i].norm_sqr(), 2.0 + s)),
            defocusing_power: area
                * pairwise_sum_by(u.len(), |i| pow_from_sq(u[i].norm_sqr(), p + 1.0)),
        }
    }

    /// `−Δu − |u|^{4/d} u + |u|^{p−1} u`, half the `L²` gradient of `E`.
    fn half_gradient(&self, u: &[Complex64], spec: &[Complex64]) -> Vec<Complex64> {
        let lap: Vec<Complex64> = spec.iter().zip(&self.k2).map(|(z, k)| z * *k).collect();
        let mut g = self.inverse(lap);
        let s = self.params.sigma();
        let p = self.params.p();
        for (gi, ui) in g.iter_mut().zip(u) {
            let a2 = ui.norm_sqr();
            *gi += ui * (pow_from_sq(a2, p - 1.0) - pow_from_sq(a2, s));
        }
        g
    }

    /// `E(v) − E(u)` summed from pointwise differences, so it stays accurate
    /// when the difference is far below the rounding error of `E` itself.
    fn energy_change(
        &self,
        u: &[Complex64],
        su: &[Complex64],
        v: &[Complex64],
        sv: &[Complex64],
    ) -> f64 {
        let d = self.params.dim();
        let p = self.params.p();
        let s = self.params.sigma();
        let norm = self.grid.cell_area() / su.len() as f64;
        let grad = norm * pairwise_sum_by(su.len(), |i| self.k2[i] * sq_diff(sv[i], su[i]));
        let area = self.grid.cell_area();
        let crit = area * pairwise_sum_by(u.len(), |i| pow_diff(v[i], u[i], 1.0 + 0.5 * s));
        let defoc = area * pairwise_sum_by(u.len(), |i| pow_diff(v[i], u[i], 0.5 * (p + 1.0)));
        grad - crit / (1.0 + 2.0 / d) + 2.0 / (p + 1.0) * defoc
    }

    fn real_inner(&self, a: &[Complex64], b: &[Complex64]) -> f64 {
        self.grid.cell_area() * pairwise_sum_by(a.len(), |i| (a[i].conj() * b[i]).re)
    }

    fn mass(&self, u: &[Complex64]) -> f64 {
        self.grid.cell_area() * pairwise_sum_by(u.len(), |i| u[i].norm_sqr())
    }
}

/// `|b|² − |a|²` without cancellation.
fn sq_diff(b: Complex64, a: Complex64) -> f64 {
    ((b - a) * (b + a).conj()).re
}

/// `|b|^{2e} − |a|^{2e}` without cancellation.
fn pow_diff(b: Complex64, a: Complex64, e: f64) -> f64 {
    let a2 = a.norm_sqr();
    let t = sq_diff(b, a) / a2;
    if !(t.abs() < 0.5) {
        return pow_from_sq(b.norm_sqr(), 2.0 * e) - pow_from_sq(a2, 2.0 * e);
    }
    a2.powf(e) * (e * t.ln_1p()).exp_m1()
}

/// `|k|²` with the Nyquist wavenumber kept. Dropping it, as the first
/// derivatives do, would leave checkerboard modes with no kinetic cost.
fn full_k_squared(grid: &GridSpec) -> Vec<f64> {
    let n = grid.n();
    let dk = std::f64::consts::PI / grid.half_length();
    let k: Vec<f64> = (0..n).map(|m| if m < n / 2 { m as f64 } else { m as f64 - n as f64 } * dk).collect();
    (0..n * n)
        .map(|i| k[i / n] * k[i / n] + k[i % n] * k[i % n])
        .collect()
}

fn rescale_to_mass(values: &mut [Complex64], current: f64, target: f64) {
    let s = (target / current).sqrt();
    for z in values.iter_mut() {
        *z *= s;
    }
}

/// Mass-`m` Gaussian `a·e^{−|x|²/(2w²)}` with unit peak.
fn default_initial(grid: GridSpec, m: f64) -> ScalarField {
    let w2 = m / std::f64::consts::PI;
    ScalarField::from_fn(grid, |x, y| {
        Complex64::new((-(x * x + y * y) / (2.0 * w2)).exp(), 0.0)
    })
}

/// Ground state at fixed mass `m` by a normalized gradient flow.
pub fn minimize_fixed_mass(
    m: f64,
    params: &ProblemParams,
    grid: &GridSpec,
    init: Option<&ScalarField>,
) -> Result<FlowResult> {
    minimize_fixed_mass_with(m, params, grid, init, &FlowOptions::default())
}

pub fn minimize_fixed_mass_with(
    m: f64,
    params: &ProblemParams,
    grid: &GridSpec,
    init: Option<&ScalarField>,
    options: &FlowOptions,
) -> Result<FlowResult> {
    require_planar(params)?;
    if !(m.is_finite() && m > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "mass must be positive, got {m}"
        )));
    }
    let critical = critical_mass(2)?;
    if m <= critical {
        return Err(Error::MassTooSmall { mass: m, critical });
    }
    let start = match init {
        Some(f) => {
            if f.grid() != grid {
                return Err(Error::GridMismatch);
            }
            f.ensure_finite()?;
            if f.mass() == 0.0 {
                return Err(Error::DegenerateInput("initial field is zero".into()));
            }
            f.clone()
        }
        None => default_initial(*grid, m),
    };
    descend(m, params, start, options)
}

fn descend(
    m: f64,
    params: &ProblemParams,
    start: ScalarField,
    options: &FlowOptions,
) -> Result<FlowResult> {
    let grid = *start.grid();
    let mut u = start.into_values();
    let mut land = Landscape::new(*params, grid, 1.0);
    let m0 = land.mass(&u);
    rescale_to_mass(&mut u, m0, m);
    let mut spec = land.forward(&u);
    let mut g = land.half_gradient(&u, &spec);
    let mut level = land.integrals(&u, &spec).energy(params);
    let mut history = vec![level];
    let mut prev: Option<(Vec<Complex64>, Vec<Complex64>, f64)> = None;
    let mut tau: f64 = 1.0;
    let mut iterations = 0;

    loop {
        let omega = -land.real_inner(&g, &u) / m;
        // The preconditioner shift follows the multiplier; CG restarts when
        // it moves.
        let shift = omega.clamp(0.005, 1.0);
        if (shift - land.shift).abs() > 0.25 * land.shift {
            land.set_shift(shift);
            prev = None;
        }
        let r: Vec<Complex64> = g.iter().zip(&u).map(|(g, u)| g + u * omega).collect();
        let z_spec: Vec<Complex64> = land
            .forward(&r)
            .iter()
            .zip(&land.precond)
            .map(|(z, w)| z * *w)
            .collect();

        // ‖u − normalize(u − z)‖_{H¹}, assembled from spectra.
        let z = land.inverse(z_spec.clone());
        let trial: Vec<Complex64> = u.iter().zip(&z).map(|(u, z)| u - z).collect();
        let s = (m / land.mass(&trial)).sqrt();
        let defect: Vec<Complex64> = spec
            .iter()
            .zip(&z_spec)
            .map(|(u, z)| u - (u - z) * s)
            .collect();
        let residual = land.parseval(&defect, |i| 1.0 + land.k2[i]).sqrt();

        if residual < options.tol {
            let objective = land.integrals(&u, &spec).energy(params);
            return Ok(FlowResult {
                minimizer: ScalarField::new(grid, u)?,
                lagrange_omega: omega,
                objective,
                iterations,
                residual,
                history,
            });
        }
        if iterations >= options.max_iter {
            return Err(Error::FlowStalled {
                iterations,
                residual,
            });
        }

        let zr = land.real_inner(&z, &r);
        let mut dir: Vec<Complex64> = match &prev {
            Some((d_prev, r_prev, zr_prev)) => {
                let beta = ((zr - land.real_inner(&z, r_prev)) / zr_prev).max(0.0);
                z.iter().zip(d_prev).map(|(z, d)| -z + d * beta).collect()
            }
            None => z.iter().map(|z| -z).collect(),
        };
        project_tangent(&land, &mut dir, &u, m);
        let mut slope = 2.0 * land.real_inner(&r, &dir);
        if slope >= 0.0 {
            dir = z.iter().map(|z| -z).collect();
            project_tangent(&land, &mut dir, &u, m);
            slope = 2.0 * land.real_inner(&r, &dir);
        }

        // Armijo line search with one secant refinement toward the minimum of
        // the quadratic model. Large steps use the exactly differenced
        // energy; once the predicted change nears rounding level the change
        // is taken from the trapezoid rule on the directional derivatives,
        // which keep full relative precision.
        let trial = |tau: f64| {
            let w: Vec<Complex64> = u.iter().zip(&dir).map(|(u, d)| u + d * tau).collect();
            let mw = land.mass(&w);
            let scale = (m / mw).sqrt();
            let cand: Vec<Complex64> = w.iter().map(|z| z * scale).collect();
            let cspec = land.forward(&cand);
            let cg = land.half_gradient(&cand, &cspec);
            let c = land.real_inner(&w, &dir) / mw;
            let end_slope =
                2.0 * (scale * land.real_inner(&cg, &dir) - c * land.real_inner(&cg, &cand));
            let delta = if (tau * slope).abs() > 1e-12 {
                land.energy_change(&u, &spec, &cand, &cspec)
            } else {
                0.5 * tau * (slope + end_slope)
            };
            (tau, cand, cspec, cg, delta, end_slope)
        };
        let armijo = |tau: f64, delta: f64| delta <= 1e-4 * tau * slope;
        let secant = |tau: f64, end_slope: f64| {
            if end_slope > slope {
                tau * slope / (slope - end_slope)
            } else {
                4.0 * tau
            }
        };
        let mut accepted = None;
        for _ in 0..60 {
            let first = trial(tau);
            let star = secant(first.0, first.5);
            if armijo(first.0, first.4) {
                if (star - tau).abs() < 0.3 * tau {
                    accepted = Some(first);
                } else {
                    let second = trial(star.clamp(0.1 * tau, 10.0 * tau));
                    accepted = Some(if armijo(second.0, second.4) && second.4 < first.4 {
                        second
                    } else {
                        first
                    });
                }
                break;
            }
            tau = star.clamp(0.1 * tau, 0.5 * tau);
        }
        let accepted = accepted.map(|(t, cand, cspec, cg, delta, _)| {
            tau = t;
            (cand, cspec, cg, delta)
        });
        let Some((cand, cspec, cg, delta)) = accepted else {
            if prev.is_none() {
                return Err(Error::FlowStalled {
                    iterations,
                    residual,
                });
            }
            // Restart from steepest descent.
            prev = None;
            tau = 1.0;
            continue;
        };
        prev = Some((dir, r, zr));
        u = cand;
        spec = cspec;
        g = cg;
        level += delta;
        history.push(level);
        iterations += 1;
    }
}

fn project_tangent(land: &Landscape, dir: &mut [Complex64], u: &[Complex64], m: f64) {
    let c = land.real_inner(u, dir) / m;
    for (d, u) in dir.iter_mut().zip(u) {
        *d -= u * c;
    }
}

/// Periodic trigonometric interpolation (Nyquist mode dropped) from the grid
/// nodes to the points `λ·x_j`; rows for points outside the box are zero.
fn dilation_matrix(grid: &GridSpec, lambda: f64) -> Vec<f64> {
    let n = grid.n();
    let l = grid.half_length();
    let nf = n as f64;
    let kernel = |s: f64| {
        let theta = std::f64::consts::PI * s / l;
        let den = (0.5 * theta).sin();
        if den.abs() > 1e-9 {
            (0.5 * (nf - 1.0) * theta).sin() / (nf * den)
        } else {
            (1.0 + 2.0 * (1..n / 2).map(|k| (k as f64 * theta).cos()).sum::<f64>()) / nf
        }
    };
    let mut mat = vec![0.0; n * n];
    for j in 0..n {
        let y = lambda * grid.coord(j);
        if y.abs() > l {
            continue;
        }
        for a in 0..n {
            mat[j * n + a] = kernel(y - grid.coord(a));
        }
    }
    mat
}

/// Scaling exponent of `∫|u|^{p+1}` under `u_λ = λ^{d/2} u(λx)`.
fn defocusing_scaling(params: &ProblemParams) -> f64 {
    params.dim() * (params.p() - 1.0) / 2.0
}

/// Projects `field` onto the Pohozaev manifold along the mass-preserving
/// dilations `u_λ = λ^{d/2} u(λx)`.
///
/// `λ₀` solves `I(u_λ) = 0` using the exact scaling of each integral; the
/// rescaled field is resampled by trigonometric interpolation and then
/// renormalized to the input mass.
pub fn pohozaev_rescale(field: &ScalarField, params: &ProblemParams) -> Result<(f64, ScalarField)> {
    require_planar(params)?;
    field.ensure_finite()?;
    let parts = power_integrals(field, params);
    if parts.mass == 0.0 {
        return Err(Error::DegenerateInput("zero field".into()));
    }
    let d = params.dim();
    let p = params.p();
    let a = 2.0 * parts.gradient_sq - 2.0 * d / (d + 2.0) * parts.critical_power;
    let c = (p - 1.0) * d / (p + 1.0) * parts.defocusing_power;
    let kappa = defocusing_scaling(params);
    let lambda =
        bisect(|l| a * l * l + c * l.powf(kappa), 1e-3, 1e3, 1e-15).ok_or(Error::NoPohozaevRoot)?;

    let grid = *field.grid();
    let n = grid.n();
    let mat = dilation_matrix(&grid, lambda);
    let v = field.values();
    // T = U Mᵀ, then U' = M T.
    let mut t = vec![Complex64::new(0.0, 0.0); n * n];
    t.par_chunks_mut(n).enumerate().for_each(|(a, row)| {
        for (k, out) in row.iter_mut().enumerate() {
            let mrow = &mat[k * n..(k + 1) * n];
            *out = (0..n).map(|b| v[a * n + b] * mrow[b]).sum();
        }
    });
    let amp = lambda.powf(d / 2.0);
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    out.par_chunks_mut(n).enumerate().for_each(|(j, row)| {
        let mrow = &mat[j * n..(j + 1) * n];
        for (k, o) in row.iter_mut().enumerate() {
            *o = (0..n).map(|a| t[a * n + k] * mrow[a]).sum::<Complex64>() * amp;
        }
    });
    let mut rescaled = ScalarField::new(grid, out)?;
    let got = rescaled.mass();
    if got == 0.0 {
        return Err(Error::NoPohozaevRoot);
    }
    rescale_to_mass(rescaled.values_mut(), got, parts.mass);
    Ok((lambda, rescaled))
}

/// Relative residual of `−Δu + ωu − |u|^{4/d}u + |u|^{p−1}u = 0`, normalized
/// by the largest of the three term norms.
pub fn equation_residual(field: &ScalarField, omega: f64, params: &ProblemParams) -> Result<f64> {
    require_planar(params)?;
    let land = Landscape::new(*params, *field.grid(), 1.0);
    let u = field.values();
    let spec = land.forward(u);
    let g = land.half_gradient(u, &spec);
    let full: Vec<Complex64> = g.iter().zip(u).map(|(g, u)| g + u * omega).collect();
    let lap_norm = land.parseval(&spec, |i| land.k2[i] * land.k2[i]).sqrt();
    let nonlinear: Vec<Complex64> = g
        .iter()
        .zip(land.inverse(spec.iter().zip(&land.k2).map(|(z, k)| z * *k).collect()))
        .map(|(g, l)| g - l)
        .collect();
    let scale = lap_norm
        .max(omega.abs() * land.mass(u).sqrt())
        .max(land.mass(&nonlinear).sqrt());
    if scale == 0.0 {
        return Err(Error::DegenerateInput("zero field".into()));
    }
    Ok(land.mass(&full).sqrt() / scale)
}

/// Ground state at fixed frequency from the problem over the Pohozaev
/// manifold with mass window `∫q² < ∫|u|² ≤ m_cap`.
pub fn minimize_pohozaev(
    omega: f64,
    m_cap: f64,
    params: &ProblemParams,
    grid: &GridSpec,
) -> Result<FlowResult> {
    minimize_pohozaev_with(omega, m_cap, params, grid, None, &FlowOptions::default())
}

/// As [`minimize_pohozaev`], optionally warm-started.
///
/// For each trial mass the current field is rescaled to that mass,
/// projected onto the Pohozaev manifold and relaxed by the fixed-mass flow.
/// The mass is updated by safeguarded regula falsi on `ω_m − ω` in the
/// variable `ln(m − ∫q²)`.
pub fn minimize_pohozaev_with(
    omega: f64,
    m_cap: f64,
    params: &ProblemParams,
    grid: &GridSpec,
    init: Option<&ScalarField>,
    options: &FlowOptions,
) -> Result<FlowResult> {
    require_planar(params)?;
    let wp = omega_p(params);
    if !(omega > 0.0 && omega < wp) {
        return Err(Error::InvalidParameter(format!(
            "omega = {omega} outside (0, {wp})"
        )));
    }
    let q = critical_mass(2)?;
    if !(m_cap > q) {
        return Err(Error::MassTooSmall {
            mass: m_cap,
            critical: q,
        });
    }
    let mut field = match init {
        Some(f) => {
            if f.grid() != grid {
                return Err(Error::GridMismatch);
            }
            f.ensure_finite()?;
            f.clone()
        }
        None => default_initial(*grid, (2.0 * q).min(0.5 * (q + m_cap))),
    };
    let m_start = field.mass();
    if !(m_start > q && m_start <= m_cap) {
        return Err(Error::WindowViolation(format!(
            "initial mass {m_start} outside ({q}, {m_cap}]"
        )));
    }

    let x_cap = (m_cap - q).ln();
    let x_floor = (1e-3 * q).ln();
    let mut iterations = 0;
    let mut history = Vec::new();
    let mut solve = |x: f64, warm: &ScalarField| -> Result<FlowResult> {
        let m = q + x.exp();
        let mut start = warm.scaled(Complex64::new((m / warm.mass()).sqrt(), 0.0));
        // Fields already on the manifold are left alone; resampling them
        // would only add interpolation noise.
        if let Ok((lambda, projected)) = pohozaev_rescale(&start, params) {
            if (lambda - 1.0).abs() > 1e-6 {
                start = projected;
            }
        }
        let res = descend(m, params, start, options)?;
        iterations += res.iterations;
        history.push(res.objective + omega * m);
        Ok(res)
    };

    let mut x0 = (m_start - q).ln();
    let mut r0 = solve(x0, &field)?;
    let mut f0 = r0.lagrange_omega - omega;
    field = r0.minimizer.clone();

    // Expand until ω_m − ω changes sign.
    let mut step = if f0 < 0.0 { 0.5 } else { -0.5 };
    let (mut xa, mut fa, mut xb, mut fb, mut best) = loop {
        if f0.abs() < options.omega_tol {
            break (x0, f0, x0, f0, r0);
        }
        let x1 = (x0 + step).clamp(x_floor, x_cap);
        if x1 == x0 {
            let why = if f0 < 0.0 {
                "frequency needs mass above the cap"
            } else {
                "frequency below the mass window"
            };
            return Err(Error::WindowViolation(why.into()));
        }
        let r1 = solve(x1, &field)?;
        let f1 = r1.lagrange_omega - omega;
        field = r1.minimizer.clone();
        if f1.signum() != f0.signum() {
            break (x0, f0, x1, f1, r1);
        }
        (x0, f0, r0) = (x1, f1, r1);
        step *= 2.0;
    };

    let mut side = 0;
    for _ in 0..options.max_outer {
        if best.lagrange_omega.is_finite()
            && (best.lagrange_omega - omega).abs() < options.omega_tol
        {
            let mass = best.minimizer.mass();
            let residual = equation_residual(&best.minimizer, omega, params)?;
            let objective = best.objective + omega * mass;
            return Ok(FlowResult {
                minimizer: best.minimizer,
                lagrange_omega: best.lagrange_omega,
                objective,
                iterations,
                residual,
                history,
            });
        }
        let x = (xa * fb - xb * fa) / (fb - fa);
        let r = solve(x, &field)?;
        let f = r.lagrange_omega - omega;
        field = r.minimizer.clone();
        if f.signum() == fb.signum() {
            (xb, fb) = (x, f);
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            (xa, fa) = (x, f);
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
        best = r;
    }
    Err(Error::FlowStalled {
        iterations,
        residual: (best.lagrange_omega - omega).abs(),
    })
}

/// One point of the mass–frequency map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MassFrequencySample {
    pub omega: f64,
    /// `m(ω) = ∫Q_ω²`.
    pub mass: f64,
    /// `E(Q_ω)`.
    pub energy: f64,
    /// `E(Q_ω) + ω m(ω)`.
    pub d_value: f64,
}

/// Samples sorted by frequency plus the frequencies whose shooting failed.
#[derive(Debug, Clone, Default)]
pub struct MassFrequencyMap {
    pub samples: Vec<MassFrequencySample>,
    pub failures: Vec<(f64, Error)>,
}

impl MassFrequencyMap {
    /// `(ω, |dE/dω + ω dm/dω| / |dE/dω|)` at every interior sample, from
    /// three-point slopes.
    pub fn energy_identity_defects(&self) -> Vec<(f64, f64)> {
        self.samples
            .windows(3)
            .map(|w| {
                let x = [w[0].omega, w[1].omega, w[2].omega];
                let de = three_point_slope(x, [w[0].energy, w[1].energy, w[2].energy]);
                let dm = three_point_slope(x, [w[0].mass, w[1].mass, w[2].mass]);
                (x[1], (de + x[1] * dm).abs() / de.abs())
            })
            .collect()
    }
}

fn sample(params: &ProblemParams, omega: f64) -> Result<MassFrequencySample> {
    let profile = shoot_profile(params, omega, default_r_max(omega), DEFAULT_NODES)?;
    let f = radial_functionals(&profile, params);
    Ok(MassFrequencySample {
        omega,
        mass: f.mass,
        energy: f.energy,
        d_value: f.energy + omega * f.mass,
    })
}

/// Shoots every frequency in parallel and records mass, energy and action.
pub fn mass_frequency_map(omegas: &[f64], params: &ProblemParams) -> MassFrequencyMap {
    let results: Vec<(f64, Result<MassFrequencySample>)> =
        omegas.par_iter().map(|&w| (w, sample(params, w))).collect();
    let mut map = MassFrequencyMap::default();
    for (w, r) in results {
        match r {
            Ok(s) => map.samples.push(s),
            Err(e) => map.failures.push((w, e)),
        }
    }
    map.samples.sort_by(|a, b| a.omega.total_cmp(&b.omega));
    map.failures.sort_by(|a, b| a.0.total_cmp(&b.0));
    map
}

/// Smallest frequency whose ground state exceeds the critical mass.
///
/// Returns 0 when the first sample is already supercritical. Otherwise the
/// first crossing between adjacent samples is refined by bisection, shooting
/// new profiles, until the bracket is narrower than `tol`; the supercritical
/// end of the final bracket is returned.
pub fn estimate_omega_q(
    map: &[MassFrequencySample],
    q_mass: f64,
    params: &ProblemParams,
    tol: f64,
) -> Result<f64> {
    if map.is_empty() {
        return Err(Error::InvalidParameter("empty mass-frequency map".into()));
    }
    if map.windows(2).any(|w| w[0].omega >= w[1].omega) {
        return Err(Error::InvalidParameter(
            "map must be sorted by frequency".into(),
        ));
    }
    let i = map
        .iter()
        .position(|s| s.mass > q_mass)
        .ok_or(Error::NoBigSolitonInRange)?;
    if i == 0 {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (map[i - 1].omega, map[i].omega);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if sample(params, mid)?.mass > q_mass {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
