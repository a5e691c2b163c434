//! Radial ground states by shooting.
//!
//! The stationary equation `u'' + (d−1)/r u' + u^{1+4/d} − u^p − ω u = 0`
//! (and the critical equation `u'' + (d−1)/r u' + u^{1+4/d} − u = 0` for `q`)
//! is integrated outward from `u(0) = a`, `u'(0) = 0` with fixed-step RK4.
//! Trajectories either cross zero (`a` too large) or turn upward (`a` too
//! small); bisection on `a` isolates the decaying solution. The far tail, where
//! the shooting trajectory inevitably peels off the separatrix, is replaced by
//! the decaying solution of the linearized equation integrated inward from
//! `r_max` and matched in value.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::SolitonSpec;
use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField};
use crate::numerics::{bisect, linear_fit_slope, simpson};
use crate::params::{pow_abs, sphere_area, ProblemParams};

/// Which stationary equation a profile solves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ProfileEquation {
    /// `Δu − ωu + u^{1+4/d} − u^p = 0`.
    DoublePower(ProblemParams),
    /// `Δq − q + q^{1+4/d} = 0`.
    Critical { d: u32 },
}

impl ProfileEquation {
    pub fn d(&self) -> u32 {
        match self {
            ProfileEquation::DoublePower(p) => p.d(),
            ProfileEquation::Critical { d } => *d,
        }
    }

    pub fn params(&self) -> Option<ProblemParams> {
        match self {
            ProfileEquation::DoublePower(p) => Some(*p),
            ProfileEquation::Critical { .. } => None,
        }
    }
}

/// Samples `u(r_i)` of a positive radial solution on `r_i = i·Δr`,
/// `i = 0..=n_nodes`, `Δr = r_max / n_nodes`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    pub equation: ProfileEquation,
    pub omega: f64,
    pub r_max: f64,
    pub n_nodes: usize,
    pub values: Vec<f64>,
    pub center_value: f64,
    /// `∫|u|²` over `R^d`.
    pub mass: f64,
}

impl RadialProfile {
    pub fn d(&self) -> u32 {
        self.equation.d()
    }

    pub fn dr(&self) -> f64 {
        self.r_max / self.n_nodes as f64
    }

    pub fn radius(&self, i: usize) -> f64 {
        i as f64 * self.dr()
    }

    /// `|S^{d−1}| ∫ r^{d−1} f(r) dr` by Simpson's rule.
    pub fn radial_integral<F: Fn(usize, f64) -> f64>(&self, f: F) -> f64 {
        let d = self.d();
        let dr = self.dr();
        let samples: Vec<f64> = (0..self.values.len())
            .map(|i| {
                let r = i as f64 * dr;
                r.powi(d as i32 - 1) * f(i, self.values[i])
            })
            .collect();
        sphere_area(d) * simpson(&samples, dr)
    }

    pub fn compute_mass(&self) -> f64 {
        self.radial_integral(|_, u| u * u)
    }

    /// `u'(r_i)` by fourth-order central differences, even reflection at 0.
    pub fn derivative(&self) -> Vec<f64> {
        let u = &self.values;
        let n = u.len();
        let h = self.dr();
        let at = |i: isize| -> f64 {
            if i < 0 {
                u[(-i) as usize]
            } else if (i as usize) < n {
                u[i as usize]
            } else {
                0.0
            }
        };
        (0..n)
            .map(|i| {
                let i = i as isize;
                if i + 2 < n as isize {
                    (at(i - 2) - 8.0 * at(i - 1) + 8.0 * at(i + 1) - at(i + 2)) / (12.0 * h)
                } else {
                    (at(i) - at(i - 1)) / h
                }
            })
            .collect()
    }

    /// Radial Laplacian `u'' + (d−1)/r u'` by fourth-order differences.
    pub fn laplacian(&self) -> Vec<f64> {
        let u = &self.values;
        let n = u.len();
        let h = self.dr();
        let d = self.d() as f64;
        let du = self.derivative();
        let at = |i: isize| -> f64 {
            if i < 0 {
                u[(-i) as usize]
            } else if (i as usize) < n {
                u[i as usize]
            } else {
                0.0
            }
        };
        (0..n)
            .map(|i| {
                let ii = i as isize;
                let upp = (-at(ii - 2) + 16.0 * at(ii - 1) - 30.0 * at(ii) + 16.0 * at(ii + 1)
                    - at(ii + 2))
                    / (12.0 * h * h);
                if i == 0 {
                    d * upp
                } else {
                    upp + (d - 1.0) / (i as f64 * h) * du[i]
                }
            })
            .collect()
    }

    /// `∫ |Δu + f(u)|²` for the profile's own equation.
    pub fn equation_residual(&self) -> f64 {
        let lap = self.laplacian();
        let source = Source::for_profile(self);
        // The last few nodes use low-order stencils on values ~1e-13.
        let cut = self.values.len().saturating_sub(3);
        self.radial_integral(|i, u| {
            if i >= cut {
                0.0
            } else {
                let res = lap[i] + source.g(u);
                res * res
            }
        })
    }

    /// Cubic Lagrange interpolation of `u` at radius `r`, zero beyond `r_max`.
    pub fn interpolate(&self, r: f64) -> f64 {
        if r > self.r_max {
            return 0.0;
        }
        let h = self.dr();
        let n = self.values.len() as isize;
        let s = r / h;
        let i = (s.floor() as isize).min(n - 2);
        let t = s - i as f64;
        let at = |k: isize| -> f64 {
            if k < 0 {
                self.values[(-k) as usize]
            } else if k < n {
                self.values[k as usize]
            } else {
                0.0
            }
        };
        let (p0, p1, p2, p3) = (at(i - 1), at(i), at(i + 1), at(i + 2));
        // Lagrange basis on nodes −1, 0, 1, 2.
        let w0 = -t * (t - 1.0) * (t - 2.0) / 6.0;
        let w1 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
        let w2 = -(t + 1.0) * t * (t - 2.0) / 2.0;
        let w3 = (t + 1.0) * t * (t - 1.0) / 6.0;
        w0 * p0 + w1 * p1 + w2 * p2 + w3 * p3
    }
}

/// Thresholds and tolerances of the shooting solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootingOptions {
    /// A trajectory exceeding `diverge_factor · a` counts as turned upward.
    pub diverge_factor: f64,
    /// Below `tail_threshold · a` a trajectory is classified by the sign of
    /// its growing asymptotic component instead of being integrated further.
    pub tail_threshold: f64,
    /// Number of amplitudes in the initial bracket scan.
    pub scan_steps: usize,
    /// Bisection stops once the bracket is narrower than this times `a`.
    pub bracket_rel_tol: f64,
    /// Relative disagreement of the two bracket trajectories at which the
    /// shooting solution is handed over to the linear tail.
    pub match_tol: f64,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        Self {
            diverge_factor: 1.5,
            tail_threshold: 1e-13,
            scan_steps: 64,
            bracket_rel_tol: 1e-15,
            match_tol: 1e-6,
        }
    }
}

/// Default integration radius: 32 decay lengths.
pub fn default_r_max(omega: f64) -> f64 {
    32.0 / omega.sqrt()
}

pub const DEFAULT_NODES: usize = 20_000;

/// Closed-form upper end `ω_p` of the existence window.
pub fn omega_p(params: &ProblemParams) -> f64 {
    let s = params.sigma();
    let p = params.p();
    let pre = 2.0 * (p - 1.0 - s) / ((2.0 + s) * (p - 1.0));
    let base = (p + 1.0) * s / ((2.0 + s) * (p - 1.0));
    pre * base.powf(s / (p - 1.0 - s))
}

/// `F(ζ) = ζ^{2+4/d}/(2+4/d) − ζ^{p+1}/(p+1) − ω ζ²/2`.
fn primitive(params: &ProblemParams, omega: f64, z: f64) -> f64 {
    let s = params.sigma();
    let p = params.p();
    pow_abs(z, 2.0 + s) / (2.0 + s) - pow_abs(z, p + 1.0) / (p + 1.0) - 0.5 * omega * z * z
}

/// Positive zeros `ζ₁ < ζ₂` of `ζ^{4/d} − ζ^{p−1} − ω`, if any.
fn stationary_points(params: &ProblemParams, omega: f64) -> Option<(f64, f64)> {
    let s = params.sigma();
    let p = params.p();
    let h = |z: f64| pow_abs(z, s) - pow_abs(z, p - 1.0) - omega;
    let z_peak = (s / (p - 1.0)).powf(1.0 / (p - 1.0 - s));
    if h(z_peak) <= 0.0 {
        return None;
    }
    let mut hi = z_peak;
    while h(hi) > 0.0 {
        hi *= 2.0;
    }
    let z1 = bisect(h, 0.0, z_peak, 1e-15 * z_peak)?;
    let z2 = bisect(h, z_peak, hi, 1e-15 * hi)?;
    Some((z1, z2))
}

/// Whether `max_ζ F(ζ) > 0`, the existence condition for a positive radial
/// solution at frequency `omega`.
pub fn existence_check(params: &ProblemParams, omega: f64) -> bool {
    if !(omega > 0.0) {
        return false;
    }
    match stationary_points(params, omega) {
        Some((_, z2)) => primitive(params, omega, z2) > 0.0,
        None => false,
    }
}

/// Right-hand side `g(u) = u^{1+σ} − u^p − c·u` of `−Δu = g(u)`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Source {
    sigma: f64,
    p: Option<f64>,
    linear: f64,
}

impl Source {
    pub(crate) fn for_profile(profile: &RadialProfile) -> Self {
        match profile.equation {
            ProfileEquation::DoublePower(params) => Self {
                sigma: params.sigma(),
                p: Some(params.p()),
                linear: profile.omega,
            },
            ProfileEquation::Critical { d } => Self {
                sigma: 4.0 / d as f64,
                p: None,
                linear: 1.0,
            },
        }
    }

    #[inline]
    pub(crate) fn g(&self, u: f64) -> f64 {
        let mut v = u * pow_abs(u, self.sigma) - self.linear * u;
        if let Some(p) = self.p {
            v -= u * pow_abs(u, p - 1.0);
        }
        v
    }

    #[inline]
    fn dg(&self, u: f64) -> f64 {
        let mut v = (1.0 + self.sigma) * pow_abs(u, self.sigma) - self.linear;
        if let Some(p) = self.p {
            v -= p * pow_abs(u, p - 1.0);
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Crossed,
    TurnedUp,
}

struct Trajectory {
    outcome: Outcome,
    u: Vec<f64>,
    v: Vec<f64>,
}

struct Shooter {
    d: f64,
    source: Source,
    dr: f64,
    n_nodes: usize,
    decay: f64,
    options: ShootingOptions,
}

impl Shooter {
    #[inline]
    fn rhs(&self, r: f64, u: f64, v: f64) -> (f64, f64) {
        (v, -(self.d - 1.0) / r * v - self.source.g(u))
    }

    /// Integrates from `u(0) = a`; records the path when `record` is set.
    fn shoot(&self, a: f64, record: bool) -> Trajectory {
        let h = self.dr;
        let mut us = Vec::new();
        let mut vs = Vec::new();
        if record {
            us.reserve(self.n_nodes + 1);
            vs.reserve(self.n_nodes + 1);
            us.push(a);
            vs.push(0.0);
        }
        // Series u = a + c₂r² + c₄r⁴ about the regular singular point.
        let c2 = -self.source.g(a) / (2.0 * self.d);
        let c4 = -self.source.dg(a) * c2 / (4.0 * (self.d + 2.0));
        let mut u = a + c2 * h * h + c4 * h.powi(4);
        let mut v = 2.0 * c2 * h + 4.0 * c4 * h.powi(3);
        if record {
            us.push(u);
            vs.push(v);
        }
        for i in 1..self.n_nodes {
            if let Some(outcome) = self.classify(a, i as f64 * h, u, v) {
                return Trajectory {
                    outcome,
                    u: us,
                    v: vs,
                };
            }
            let r = i as f64 * h;
            let (k1u, k1v) = self.rhs(r, u, v);
            let (k2u, k2v) = self.rhs(r + 0.5 * h, u + 0.5 * h * k1u, v + 0.5 * h * k1v);
            let (k3u, k3v) = self.rhs(r + 0.5 * h, u + 0.5 * h * k2u, v + 0.5 * h * k2v);
            let (k4u, k4v) = self.rhs(r + h, u + h * k3u, v + h * k3v);
            u += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
            v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
            if record {
                us.push(u);
                vs.push(v);
            }
        }
        let r = self.n_nodes as f64 * h;
        let outcome = self
            .classify(a, r, u, v)
            .unwrap_or_else(|| self.asymptotic_side(r, u, v));
        Trajectory {
            outcome,
            u: us,
            v: vs,
        }
    }

    fn classify(&self, a: f64, r: f64, u: f64, v: f64) -> Option<Outcome> {
        if !u.is_finite() || !v.is_finite() {
            return Some(Outcome::TurnedUp);
        }
        if u < 0.0 {
            Some(Outcome::Crossed)
        } else if v > 0.0 || u > self.options.diverge_factor * a {
            Some(Outcome::TurnedUp)
        } else if u < self.options.tail_threshold * a {
            Some(self.asymptotic_side(r, u, v))
        } else {
            None
        }
    }

    /// Sign of the growing component of the linearized tail.
    fn asymptotic_side(&self, r: f64, u: f64, v: f64) -> Outcome {
        let kappa = self.decay + (self.d - 1.0) / (2.0 * r.max(self.dr));
        if v + kappa * u < 0.0 {
            Outcome::Crossed
        } else {
            Outcome::TurnedUp
        }
    }

    /// Decaying solution of `w'' + (d−1)/r w' − c w = 0`, integrated inward
    /// from `r_max` where it is stable, returned on nodes `from..=n_nodes`.
    fn linear_tail(&self, from: usize) -> Vec<f64> {
        let h = self.dr;
        let n = self.n_nodes;
        let c = self.decay * self.decay;
        let rhs = |r: f64, w: f64, dw: f64| (dw, -(self.d - 1.0) / r * dw + c * w);
        let r_end = n as f64 * h;
        let mut w = 1.0;
        let mut dw = -(self.decay + (self.d - 1.0) / (2.0 * r_end)) * w;
        let mut out = vec![0.0; n - from + 1];
        out[n - from] = w;
        for i in (from..n).rev() {
            let r = (i + 1) as f64 * h;
            let hh = -h;
            let (k1u, k1v) = rhs(r, w, dw);
            let (k2u, k2v) = rhs(r + 0.5 * hh, w + 0.5 * hh * k1u, dw + 0.5 * hh * k1v);
            let (k3u, k3v) = rhs(r + 0.5 * hh, w + 0.5 * hh * k2u, dw + 0.5 * hh * k2v);
            let (k4u, k4v) = rhs(r + hh, w + hh * k3u, dw + hh * k3v);
            w += hh / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
            dw += hh / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
            out[i - from] = w;
            if w > 1e200 {
                for x in out.iter_mut() {
                    *x *= 1e-200;
                }
                w *= 1e-200;
                dw *= 1e-200;
            }
        }
        out
    }

    /// Scans `[lo, hi]` for the turn-up → cross transition and bisects it.
    fn solve(&self, lo: f64, hi: f64) -> Result<(Trajectory, Trajectory)> {
        let steps = self.options.scan_steps.max(2);
        let mut bracket = None;
        let mut prev = (lo, self.shoot(lo, false).outcome);
        for i in 1..steps {
            let a = lo + (hi - lo) * i as f64 / steps as f64;
            let out = self.shoot(a, false).outcome;
            if prev.1 == Outcome::TurnedUp && out == Outcome::Crossed {
                bracket = Some((prev.0, a));
                break;
            }
            prev = (a, out);
        }
        // Near the top of the window the decaying solution sits exponentially
        // close to the upper equilibrium; close in on `hi` geometrically.
        if bracket.is_none() && prev.1 == Outcome::TurnedUp {
            let gap = hi - prev.0;
            for j in 1..=60 {
                let a = hi - gap * 0.5f64.powi(j);
                if a <= prev.0 || a >= hi {
                    break;
                }
                let out = self.shoot(a, false).outcome;
                if out == Outcome::Crossed {
                    bracket = Some((prev.0, a));
                    break;
                }
                prev = (a, out);
            }
        }
        let (mut a_lo, mut a_hi) = bracket.ok_or(Error::BracketFailure {
            omega: self.decay * self.decay,
        })?;
        for _ in 0..200 {
            let mid = 0.5 * (a_lo + a_hi);
            if a_hi - a_lo < self.options.bracket_rel_tol * a_hi || mid == a_lo || mid == a_hi {
                break;
            }
            match self.shoot(mid, false).outcome {
                Outcome::TurnedUp => a_lo = mid,
                Outcome::Crossed => a_hi = mid,
            }
        }
        Ok((self.shoot(a_lo, true), self.shoot(a_hi, true)))
    }

    fn assemble(&self, lo: &Trajectory, hi: &Trajectory) -> Result<Vec<f64>> {
        let n = self.n_nodes;
        let len = lo.u.len().min(hi.u.len());
        let mut matched = 0;
        for i in 1..len {
            let (ul, uh) = (lo.u[i], hi.u[i]);
            if ul <= 0.0 || uh <= 0.0 || lo.v[i] >= 0.0 || hi.v[i] >= 0.0 {
                break;
            }
            if (ul - uh).abs() > self.options.match_tol * ul {
                break;
            }
            matched = i;
        }
        if matched < 2 {
            return Err(Error::ShootFailure(
                "bracket trajectories disagree near the origin".into(),
            ));
        }
        // The linear tail is only valid once the nonlinear terms are
        // negligible; splitting earlier means bisection ran out of
        // floating-point resolution on the separatrix.
        let u_match = lo.u[matched];
        let nonlinear = (self.source.g(u_match) + self.decay * self.decay * u_match).abs();
        if nonlinear > 1e-6 * self.decay * self.decay * u_match {
            return Err(Error::ShootFailure(format!(
                "separatrix unresolved: trajectories split at u = {u_match:e}"
            )));
        }
        let mut values: Vec<f64> = (0..=matched).map(|i| 0.5 * (lo.u[i] + hi.u[i])).collect();
        if matched < n {
            let tail = self.linear_tail(matched);
            let scale = values[matched] / tail[0];
            values.extend(tail[1..].iter().map(|w| w * scale));
        }
        Ok(values)
    }
}

fn validate_profile(values: &[f64]) -> Result<()> {
    let center = values[0];
    if !(center > 0.0) {
        return Err(Error::ShootFailure("non-positive center value".into()));
    }
    if let Some(i) = values.iter().position(|&u| !(u > 0.0) || !u.is_finite()) {
        return Err(Error::ShootFailure(format!(
            "profile not positive at node {i}"
        )));
    }
    if values[1] > center {
        return Err(Error::ShootFailure(
            "profile increases at the origin".into(),
        ));
    }
    for i in 1..values.len() - 1 {
        if values[i + 1] >= values[i] {
            return Err(Error::ShootFailure(format!(
                "profile not decreasing at node {i}"
            )));
        }
    }
    if values[values.len() - 1] >= 1e-8 * center {
        return Err(Error::ShootFailure(
            "profile has not decayed by r_max".into(),
        ));
    }
    Ok(())
}

fn build_profile(
    equation: ProfileEquation,
    omega: f64,
    r_max: f64,
    n_nodes: usize,
    scan: (f64, f64),
    options: ShootingOptions,
) -> Result<RadialProfile> {
    if n_nodes < 16 {
        return Err(Error::InvalidParameter(format!(
            "n_nodes = {n_nodes} too small"
        )));
    }
    if !(r_max > 0.0) {
        return Err(Error::InvalidParameter("r_max must be positive".into()));
    }
    let (sigma, p, linear) = match equation {
        ProfileEquation::DoublePower(params) => (params.sigma(), Some(params.p()), omega),
        ProfileEquation::Critical { d } => (4.0 / d as f64, None, 1.0),
    };
    let shooter = Shooter {
        d: equation.d() as f64,
        source: Source { sigma, p, linear },
        dr: r_max / n_nodes as f64,
        n_nodes,
        decay: linear.sqrt(),
        options,
    };
    let (lo, hi) = shooter.solve(scan.0, scan.1)?;
    let values = shooter.assemble(&lo, &hi)?;
    validate_profile(&values)?;
    let mut profile = RadialProfile {
        equation,
        omega,
        r_max,
        n_nodes,
        center_value: values[0],
        values,
        mass: 0.0,
    };
    profile.mass = profile.compute_mass();
    Ok(profile)
}

/// Positive decaying solution `Q_ω` of the double-power stationary equation.
pub fn shoot_profile(
    params: &ProblemParams,
    omega: f64,
    r_max: f64,
    n_nodes: usize,
) -> Result<RadialProfile> {
    shoot_profile_with(params, omega, r_max, n_nodes, ShootingOptions::default())
}

pub fn shoot_profile_with(
    params: &ProblemParams,
    omega: f64,
    r_max: f64,
    n_nodes: usize,
    options: ShootingOptions,
) -> Result<RadialProfile> {
    if !(omega > 0.0) {
        return Err(Error::BracketFailure { omega });
    }
    // Admissible peaks lie between the zero of F and the upper zero of g(s)/s.
    let (z1, z2) = stationary_points(params, omega).ok_or(Error::BracketFailure { omega })?;
    let f = |z: f64| primitive(params, omega, z);
    if f(z2) <= 0.0 {
        return Err(Error::BracketFailure { omega });
    }
    let zeta0 = bisect(f, z1, z2, 1e-15 * z2).ok_or(Error::BracketFailure { omega })?;
    build_profile(
        ProfileEquation::DoublePower(*params),
        omega,
        r_max,
        n_nodes,
        (zeta0, z2),
        options,
    )
}

/// Critical ground state `q` solving `Δq − q + q^{1+4/d} = 0`.
pub fn solve_q(d: u32, r_max: f64, n_nodes: usize) -> Result<RadialProfile> {
    if d != 2 && d != 3 {
        return Err(Error::InvalidDimension(d));
    }
    let s = 4.0 / d as f64;
    let zeta0 = ((2.0 + s) / 2.0).powf(1.0 / s);
    build_profile(
        ProfileEquation::Critical { d },
        1.0,
        r_max,
        n_nodes,
        (zeta0, 8.0 * zeta0),
        ShootingOptions::default(),
    )
}

/// Relative residuals of the two Pohozaev-type identities satisfied by every
/// solution of the stationary equation, each normalized by its largest term.
pub fn pohozaev_residuals(profile: &RadialProfile) -> Result<(f64, f64)> {
    let params = profile
        .equation
        .params()
        .ok_or_else(|| Error::ParamMismatch("identities need a double-power profile".into()))?;
    if profile.values.iter().all(|&u| u == 0.0) {
        return Err(Error::DegenerateInput("zero profile".into()));
    }
    let d = params.dim();
    let p = params.p();
    let s = params.sigma();
    let du = profile.derivative();
    let grad = profile.radial_integral(|i, _| du[i] * du[i]);
    let crit = profile.radial_integral(|_, u| pow_abs(u, 2.0 + s));
    let defoc = profile.radial_integral(|_, u| pow_abs(u, p + 1.0));
    let mass = profile.radial_integral(|_, u| u * u);

    let first = [
        (2.0 * d / (p + 1.0) + 2.0 - d) * grad,
        (d / (1.0 + 2.0 / d) - 2.0 * d / (p + 1.0)) * crit,
        (2.0 * d / (p + 1.0) - d) * profile.omega * mass,
    ];
    let second = [
        2.0 * grad,
        -2.0 * d / (d + 2.0) * crit,
        (p - 1.0) * d / (p + 1.0) * defoc,
    ];
    let rel = |terms: [f64; 3]| {
        let scale = terms.iter().fold(0.0f64, |m, t| m.max(t.abs()));
        (terms[0] + terms[1] + terms[2]).abs() / scale
    };
    Ok((rel(first), rel(second)))
}

/// Radial integrals of a profile used by the functionals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialFunctionals {
    pub mass: f64,
    pub gradient_sq: f64,
    pub critical_power: f64,
    pub defocusing_power: f64,
    pub energy: f64,
    pub pohozaev: f64,
}

/// Mass, energy and Pohozaev functional of a profile under `params`.
pub fn radial_functionals(profile: &RadialProfile, params: &ProblemParams) -> RadialFunctionals {
    let p = params.p();
    let s = params.sigma();
    let d = params.dim();
    let du = profile.derivative();
    let gradient_sq = profile.radial_integral(|i, _| du[i] * du[i]);
    let critical_power = profile.radial_integral(|_, u| pow_abs(u, 2.0 + s));
    let defocusing_power = profile.radial_integral(|_, u| pow_abs(u, p + 1.0));
    let mass = profile.radial_integral(|_, u| u * u);
    let energy =
        gradient_sq - critical_power / (1.0 + 2.0 / d) + 2.0 / (p + 1.0) * defocusing_power;
    let pohozaev =
        crate::grid::pohozaev_from_parts(gradient_sq, critical_power, defocusing_power, params);
    RadialFunctionals {
        mass,
        gradient_sq,
        critical_power,
        defocusing_power,
        energy,
        pohozaev,
    }
}

/// Exponential decay rate of the profile tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    /// Least-squares slope of `−log u` on `[r_max/2, 3 r_max/4]`.
    pub fitted_rate: f64,
    /// `√ω / 2`.
    pub bound_rate: f64,
}

impl DecayFit {
    pub fn satisfies_bound(&self) -> bool {
        self.fitted_rate >= self.bound_rate
    }
}

pub fn decay_fit(profile: &RadialProfile) -> Result<DecayFit> {
    let n = profile.n_nodes;
    let (start, end) = (n / 2, 3 * n / 4);
    let mut xs = Vec::with_capacity(end - start + 1);
    let mut ys = Vec::with_capacity(end - start + 1);
    for i in start..=end {
        let u = profile.values[i];
        if !(u > 1e-14) {
            return Err(Error::TailUnderflow);
        }
        xs.push(profile.radius(i));
        ys.push(-u.ln());
    }
    Ok(DecayFit {
        fitted_rate: linear_fit_slope(&xs, &ys),
        bound_rate: 0.5 * profile.omega.sqrt(),
    })
}

/// Samples the moving soliton `Q_ω(x − x⁰ − vt) e^{i(v·x/2 − |v|²t/4 + ωt + γ)}`
/// on a 2-D grid.
///
/// The amplitude is periodized over the nearest images of the box, so the
/// sampled field is smooth across the periodic boundary.
pub fn embed_profile(
    profile: &RadialProfile,
    grid: &GridSpec,
    spec: &SolitonSpec,
    t: f64,
) -> Result<ScalarField> {
    if profile.d() != 2 {
        return Err(Error::ParamMismatch(format!(
            "embedding needs d = 2, profile has d = {}",
            profile.d()
        )));
    }
    if (profile.omega - spec.omega).abs() > 1e-12 * profile.omega.abs().max(1.0) {
        return Err(Error::ParamMismatch(format!(
            "profile omega {} differs from soliton omega {}",
            profile.omega, spec.omega
        )));
    }
    let center = [spec.x0[0] + spec.v[0] * t, spec.x0[1] + spec.v[1] * t];
    let v2 = spec.v[0] * spec.v[0] + spec.v[1] * spec.v[1];
    let phase0 = -0.25 * v2 * t + spec.omega * t + spec.gamma;
    let period = 2.0 * grid.half_length();
    Ok(ScalarField::from_fn(*grid, |x, y| {
        let [dx, dy] = grid.periodic_displacement([x, y], center);
        let mut amp = 0.0;
        for i in -1..=1 {
            for j in -1..=1 {
                let (ex, ey) = (dx + i as f64 * period, dy + j as f64 * period);
                amp += profile.interpolate((ex * ex + ey * ey).sqrt());
            }
        }
        if amp == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::from_polar(amp, 0.5 * (spec.v[0] * x + spec.v[1] * y) + phase0)
    }))
}
