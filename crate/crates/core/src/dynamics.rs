//! Time evolution on the periodic grid and the soliton experiments built on it.

use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::Fft2;
use crate::grid::{band_limited_noise, compute_functionals, GridSpec, ScalarField};
use crate::groundstate::{embed_profile, RadialProfile};
use crate::numerics::pairwise_sum_by;
use crate::params::{pow_from_sq, ProblemParams};

/// One moving soliton `Q_ω(x − x⁰ − vt) e^{i(v·x/2 − |v|²t/4 + ωt + γ)}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolitonSpec {
    pub omega: f64,
    pub x0: [f64; 2],
    pub v: [f64; 2],
    pub gamma: f64,
}

impl SolitonSpec {
    pub fn at_rest(omega: f64) -> Self {
        Self {
            omega,
            x0: [0.0, 0.0],
            v: [0.0, 0.0],
            gamma: 0.0,
        }
    }

    pub fn center(&self, t: f64) -> [f64; 2] {
        [self.x0[0] + self.v[0] * t, self.x0[1] + self.v[1] * t]
    }

    fn validate(&self) -> Result<()> {
        let finite = self.x0.iter().chain(&self.v).all(|x| x.is_finite()) && self.gamma.is_finite();
        if !(self.omega > 0.0) || !finite {
            return Err(Error::InvalidParameter(format!(
                "bad soliton spec {self:?}"
            )));
        }
        Ok(())
    }
}

/// Strang splitting for `i φ_t + Δφ + |φ|^{4/d}φ − |φ|^{p−1}φ = 0`.
///
/// The nonlinear substep only rotates phases, so it is solved exactly; the
/// linear substep is the Fourier multiplier `e^{−i|k|²dt}`.
pub struct Stepper {
    grid: GridSpec,
    params: ProblemParams,
    dt: f64,
    nonlinear: bool,
    propagator: Vec<Complex64>,
}

impl Stepper {
    pub fn new(grid: GridSpec, params: ProblemParams, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt != 0.0) {
            return Err(Error::InvalidParameter(format!("time step {dt}")));
        }
        let propagator = grid
            .k_squared()
            .iter()
            .map(|k2| Complex64::from_polar(1.0, -k2 * dt))
            .collect();
        Ok(Self {
            grid,
            params,
            dt,
            nonlinear: true,
            propagator,
        })
    }

    /// Free Schrödinger flow only.
    pub fn linear_only(grid: GridSpec, params: ProblemParams, dt: f64) -> Result<Self> {
        let mut s = Self::new(grid, params, dt)?;
        s.nonlinear = false;
        Ok(s)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Exact phase flow of the nonlinearity over `fraction · dt`; reports
    /// whether every value was finite.
    fn nonlinear_phase(&self, values: &mut [Complex64], fraction: f64) -> bool {
        if !self.nonlinear {
            return values.iter().all(|z| z.re.is_finite() && z.im.is_finite());
        }
        let h = fraction * self.dt;
        let sigma = self.params.sigma();
        let pm1 = self.params.p() - 1.0;
        let mut finite = true;
        for z in values.iter_mut() {
            let a2 = z.norm_sqr();
            finite &= a2.is_finite();
            let rate = pow_from_sq(a2, sigma) - pow_from_sq(a2, pm1);
            *z *= Complex64::from_polar(1.0, h * rate);
        }
        finite
    }

    /// Advances `field` by one step in place.
    pub fn step(&self, field: &mut ScalarField) -> Result<()> {
        if *field.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        let values = field.values_mut();
        let ok = self.nonlinear_phase(values, 0.5)
            & self.linear(values)
            & self.nonlinear_phase(values, 0.5);
        if ok {
            Ok(())
        } else {
            Err(Error::NumericalBlowup { time: f64::NAN })
        }
    }

    /// Advances `steps` steps, merging the adjacent nonlinear half steps of
    /// consecutive steps into one (the phase flow is exact, so this only
    /// changes rounding).
    pub fn advance(&self, field: &mut ScalarField, steps: usize) -> Result<()> {
        if *field.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        self.advance_values(field.values_mut(), steps)
            .map_err(|s| Error::NumericalBlowup {
                time: s as f64 * self.dt,
            })
    }

    /// As [`Stepper::advance`]; the error carries the number of the first
    /// step that produced a non-finite value.
    fn advance_values(
        &self,
        values: &mut [Complex64],
        steps: usize,
    ) -> std::result::Result<(), usize> {
        if steps == 0 {
            return Ok(());
        }
        let mut ok = self.nonlinear_phase(values, 0.5);
        for s in 0..steps {
            ok &= self.linear(values);
            ok &= self.nonlinear_phase(values, if s + 1 == steps { 0.5 } else { 1.0 });
            if !ok {
                return Err(s + 1);
            }
        }
        Ok(())
    }

    /// Free flow over `dt`; the multiplier is symmetric in the two axes, so
    /// it can be applied to the transposed spectrum.
    fn linear(&self, values: &mut [Complex64]) -> bool {
        let plan = Fft2::plan(self.grid.n());
        plan.forward_transposed(values);
        for (z, e) in values.iter_mut().zip(&self.propagator) {
            *z *= e;
        }
        plan.inverse_transposed(values);
        true
    }
}

/// One Strang step.
pub fn step_strang(field: &ScalarField, dt: f64, params: &ProblemParams) -> Result<ScalarField> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("time step {dt}")));
    }
    field.ensure_finite()?;
    let mut out = field.clone();
    Stepper::new(*field.grid(), *params, dt)?.step(&mut out)?;
    Ok(out)
}

/// Sampling of an evolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeConfig {
    /// Steps between samples of the conserved quantities.
    pub stride: usize,
    /// Steps between stored fields, if any.
    pub snapshot_stride: Option<usize>,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            stride: 100,
            snapshot_stride: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionTrace {
    pub times: Vec<f64>,
    pub mass_series: Vec<f64>,
    pub energy_series: Vec<f64>,
    pub momentum_series: Vec<[f64; 2]>,
    /// Experiment-specific distance; for a plain run the `H¹` distance to
    /// the initial datum.
    pub residual_series: Vec<f64>,
    /// Per sample, the localized masses `I_k` (multi-soliton runs only).
    pub localized_mass: Vec<Vec<f64>>,
    /// Per sample, the localized momenta `M_k` (multi-soliton runs only).
    pub localized_momentum: Vec<Vec<[f64; 2]>>,
    pub snapshots: Vec<(f64, ScalarField)>,
    pub final_field: ScalarField,
}

impl EvolutionTrace {
    fn max_relative_drift(series: &[f64]) -> f64 {
        let base = series[0];
        series.iter().map(|x| (x - base).abs()).fold(0.0, f64::max) / base.abs()
    }

    pub fn mass_drift(&self) -> f64 {
        Self::max_relative_drift(&self.mass_series)
    }

    pub fn energy_drift(&self) -> f64 {
        Self::max_relative_drift(&self.energy_series)
    }

    /// Largest absolute change of either momentum component.
    pub fn momentum_drift(&self) -> f64 {
        let p0 = self.momentum_series[0];
        self.momentum_series
            .iter()
            .map(|p| (p[0] - p0[0]).abs().max((p[1] - p0[1]).abs()))
            .fold(0.0, f64::max)
    }

    pub fn max_residual(&self) -> f64 {
        self.residual_series.iter().copied().fold(0.0, f64::max)
    }
}

/// Per-sample hook: returns the residual and optional localized quantities.
type Probe<'a> =
    dyn FnMut(f64, &ScalarField) -> Result<(f64, Option<(Vec<f64>, Vec<[f64; 2]>)>)> + 'a;

fn step_count(t0: f64, t1: f64, dt: f64) -> Result<usize> {
    let span = t1 - t0;
    if span != 0.0 && span.signum() != dt.signum() {
        return Err(Error::InvalidParameter(format!(
            "dt = {dt} points away from t1 = {t1}"
        )));
    }
    let steps = (span / dt).round();
    if (steps * dt - span).abs() > 1e-9 * span.abs().max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "dt = {dt} does not divide {span}"
        )));
    }
    Ok(steps as usize)
}

fn run(
    field: &ScalarField,
    t0: f64,
    t1: f64,
    stepper: &Stepper,
    params: &ProblemParams,
    probes: ProbeConfig,
    probe: &mut Probe<'_>,
) -> Result<EvolutionTrace> {
    field.ensure_finite()?;
    if *field.grid() != stepper.grid {
        return Err(Error::GridMismatch);
    }
    if probes.stride == 0 {
        return Err(Error::InvalidParameter(
            "probe stride must be positive".into(),
        ));
    }
    let dt = stepper.dt();
    let steps = step_count(t0, t1, dt)?;
    let mut trace = EvolutionTrace {
        times: Vec::new(),
        mass_series: Vec::new(),
        energy_series: Vec::new(),
        momentum_series: Vec::new(),
        residual_series: Vec::new(),
        localized_mass: Vec::new(),
        localized_momentum: Vec::new(),
        snapshots: Vec::new(),
        final_field: field.clone(),
    };
    let mut record =
        |trace: &mut EvolutionTrace, t: f64, phi: &ScalarField, step: usize| -> Result<()> {
            let f = compute_functionals(phi, params)?;
            let (res, local) = probe(t, phi)?;
            trace.times.push(t);
            trace.mass_series.push(f.mass);
            trace.energy_series.push(f.energy);
            trace.momentum_series.push(f.momentum);
            trace.residual_series.push(res);
            if let Some((masses, momenta)) = local {
                trace.localized_mass.push(masses);
                trace.localized_momentum.push(momenta);
            }
            if probes
                .snapshot_stride
                .is_some_and(|s| s > 0 && step.is_multiple_of(s))
            {
                trace.snapshots.push((t, phi.clone()));
            }
            Ok(())
        };
    let mut phi = field.clone();
    record(&mut trace, t0, &phi, 0)?;
    let mut step = 0;
    while step < steps {
        let chunk = (probes.stride - step % probes.stride).min(steps - step);
        stepper
            .advance_values(phi.values_mut(), chunk)
            .map_err(|s| Error::NumericalBlowup {
                time: t0 + (step + s) as f64 * dt,
            })?;
        step += chunk;
        record(&mut trace, t0 + step as f64 * dt, &phi, step)?;
    }
    trace.final_field = phi;
    Ok(trace)
}

/// Evolves from `t0` to `t1`. A negative `dt` with `t1 < t0` runs backward.
pub fn evolve(
    field: &ScalarField,
    t0: f64,
    t1: f64,
    dt: f64,
    params: &ProblemParams,
    probes: ProbeConfig,
) -> Result<EvolutionTrace> {
    let stepper = Stepper::new(*field.grid(), *params, dt)?;
    let initial = field.clone();
    let mut probe =
        |_: f64, phi: &ScalarField| Ok((crate::grid::h1_distance(phi, &initial)?, None));
    run(field, t0, t1, &stepper, params, probes, &mut probe)
}

/// Result of fitting a field to the orbit `{e^{iθ} Q(· + y)}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Modulation {
    /// `‖φ − e^{iθ}Q(· + y)‖_{H¹}` at the fitted parameters.
    pub distance: f64,
    pub theta: f64,
    pub shift: [f64; 2],
}

/// Signed grid wavenumber index in `(−N/2, N/2]`.
fn signed_index(m: usize, n: usize) -> i64 {
    let m = m as i64;
    let n = n as i64;
    if m > n / 2 {
        m - n
    } else {
        m
    }
}

/// `H¹` cross-correlation `C(y) = ⟨Q(·+y), φ⟩_{H¹}` written as a trigonometric
/// sum `Σ_k g_k e^{−ik·y}` and its derivatives in `y`.
struct Correlation {
    n: usize,
    k: Vec<f64>,
    g: Vec<Complex64>,
}

impl Correlation {
    fn new(field: &ScalarField, reference: &ScalarField) -> Self {
        let grid = *field.grid();
        let n = grid.n();
        let phi = field.spectrum();
        let q = reference.spectrum();
        let k2 = grid.k_squared();
        // Parseval: ∫ ā b = h²/N² Σ conj(â) b̂.
        let norm = grid.cell_area() / grid.len() as f64;
        let g = (0..grid.len())
            .map(|m| q[m].conj() * phi[m] * (1.0 + k2[m]) * norm)
            .collect();
        Self {
            n,
            k: grid.wavenumbers(),
            g,
        }
    }

    /// `C` at every grid shift, via one FFT.
    fn on_grid(&self) -> Vec<Complex64> {
        let mut data = self.g.clone();
        Fft2::plan(self.n).forward(&mut data);
        data
    }

    /// `C`, `∇C` and the Hessian of `C` at an arbitrary shift.
    fn eval(&self, y: [f64; 2]) -> (Complex64, [Complex64; 2], [[Complex64; 2]; 2]) {
        let n = self.n;
        let i = Complex64::new(0.0, 1.0);
        let ex: Vec<Complex64> = self
            .k
            .iter()
            .map(|k| Complex64::from_polar(1.0, -k * y[0]))
            .collect();
        let ey: Vec<Complex64> = self
            .k
            .iter()
            .map(|k| Complex64::from_polar(1.0, -k * y[1]))
            .collect();
        let mut c = Complex64::new(0.0, 0.0);
        let mut grad = [c; 2];
        let mut hess = [[c; 2]; 2];
        for a in 0..n {
            let ka = self.k[a];
            let mut row = Complex64::new(0.0, 0.0);
            let mut row_kb = row;
            let mut row_kb2 = row;
            for b in 0..n {
                let term = self.g[a * n + b] * ey[b];
                let kb = self.k[b];
                row += term;
                row_kb += term * kb;
                row_kb2 += term * kb * kb;
            }
            let e = ex[a];
            c += row * e;
            grad[0] += -i * ka * row * e;
            grad[1] += -i * row_kb * e;
            hess[0][0] += -ka * ka * row * e;
            hess[0][1] += -ka * row_kb * e;
            hess[1][1] += -row_kb2 * e;
        }
        hess[1][0] = hess[0][1];
        (c, grad, hess)
    }
}

/// Maximizes `|C(y)|²` by Newton steps from the best grid shift.
fn refine_shift(corr: &Correlation, start: [f64; 2], cell: f64) -> [f64; 2] {
    let mut y = start;
    for _ in 0..30 {
        let (c, g, h) = corr.eval(y);
        // f = |C|², ∇f = 2 Re(C̄ ∇C), ∇²f = 2 Re(∇C̄ ∇Cᵀ + C̄ ∇²C).
        let grad = [2.0 * (c.conj() * g[0]).re, 2.0 * (c.conj() * g[1]).re];
        let mut hess = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                hess[a][b] = 2.0 * (g[a].conj() * g[b] + c.conj() * h[a][b]).re;
            }
        }
        let det = hess[0][0] * hess[1][1] - hess[0][1] * hess[1][0];
        let mut step = if det > 0.0 && hess[0][0] < 0.0 {
            [
                -(hess[1][1] * grad[0] - hess[0][1] * grad[1]) / det,
                -(-hess[1][0] * grad[0] + hess[0][0] * grad[1]) / det,
            ]
        } else {
            // Not locally concave: small ascent step.
            let norm = (grad[0] * grad[0] + grad[1] * grad[1]).sqrt();
            if norm == 0.0 {
                break;
            }
            [0.25 * cell * grad[0] / norm, 0.25 * cell * grad[1] / norm]
        };
        let len = (step[0] * step[0] + step[1] * step[1]).sqrt();
        if len > cell {
            step = [step[0] * cell / len, step[1] * cell / len];
        }
        y = [y[0] + step[0], y[1] + step[1]];
        if len < 1e-13 * cell {
            break;
        }
    }
    y
}

/// Distance from `field` to the orbit `{e^{iθ} Q_ω(· + y)}` with the phase
/// and shift that maximize the `H¹` correlation.
///
/// Close to the orbit the maximizer is the unique local minimizer of the
/// distance; far from it the result is a best effort.
pub fn modulated_distance(field: &ScalarField, profile: &RadialProfile) -> Result<Modulation> {
    field.ensure_finite()?;
    if field.max_abs() == 0.0 {
        return Err(Error::DegenerateInput("zero field".into()));
    }
    let grid = *field.grid();
    let spec = SolitonSpec::at_rest(profile.omega);
    let reference = embed_profile(profile, &grid, &spec, 0.0)?;
    let corr = Correlation::new(field, &reference);
    let values = corr.on_grid();
    let (best, _) = values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (m, z)| {
            if z.norm_sqr() > acc.1 {
                (m, z.norm_sqr())
            } else {
                acc
            }
        });
    let n = grid.n();
    let h = grid.spacing();
    let start = [
        signed_index(best / n, n) as f64 * h,
        signed_index(best % n, n) as f64 * h,
    ];
    let mut shift = refine_shift(&corr, start, h);
    let wrap = |s: f64| s - 2.0 * grid.half_length() * (s / (2.0 * grid.half_length())).round();
    shift = [wrap(shift[0]), wrap(shift[1])];

    // Evaluate against a direct embedding at the fitted center.
    let centered = SolitonSpec {
        x0: [-shift[0], -shift[1]],
        ..spec
    };
    let q = embed_profile(profile, &grid, &centered, 0.0)?;
    let c = h1_inner(&q, field);
    let theta = if c.norm() > 0.0 { c.arg() } else { 0.0 };
    let diff = field.sub(&q.scaled(Complex64::from_polar(1.0, theta)))?;
    Ok(Modulation {
        distance: diff.h1_norm(),
        theta,
        shift,
    })
}

/// `∫ ā b + ∇ā·∇b`.
pub fn h1_inner(a: &ScalarField, b: &ScalarField) -> Complex64 {
    let sa = a.spectrum();
    let sb = b.spectrum();
    let k2 = a.grid().k_squared();
    let norm = a.grid().cell_area() / a.grid().len() as f64;
    let re = pairwise_sum_by(sa.len(), |m| (sa[m].conj() * sb[m]).re * (1.0 + k2[m]));
    let im = pairwise_sum_by(sa.len(), |m| (sa[m].conj() * sb[m]).im * (1.0 + k2[m]));
    Complex64::new(re, im) * norm
}

/// `K` solitons ordered by the first velocity component, with the partition
/// of unity that separates them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiSolitonConfig {
    pub specs: Vec<SolitonSpec>,
    /// `(min{gaps between first velocity components, √ω_k} / 16)²`.
    pub theta0: f64,
    /// Thresholds `σ_k = (v_{k−1,1} + v_{k,1}) / 2`, `k = 2..K`.
    pub sigmas: Vec<f64>,
    pub cutoff_width: f64,
}

impl MultiSolitonConfig {
    pub fn new(specs: Vec<SolitonSpec>, cutoff_width: f64) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::InvalidParameter("need at least one soliton".into()));
        }
        if !(cutoff_width > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "cutoff width {cutoff_width}"
            )));
        }
        for s in &specs {
            s.validate()?;
        }
        if specs.windows(2).any(|w| !(w[0].v[0] < w[1].v[0])) {
            return Err(Error::InvalidParameter(
                "first velocity components must be strictly increasing".into(),
            ));
        }
        let mut rate = specs
            .iter()
            .map(|s| s.omega.sqrt())
            .fold(f64::INFINITY, f64::min);
        for w in specs.windows(2) {
            rate = rate.min(w[1].v[0] - w[0].v[0]);
        }
        let sigmas = specs
            .windows(2)
            .map(|w| 0.5 * (w[0].v[0] + w[1].v[0]))
            .collect();
        Ok(Self {
            theta0: (rate / 16.0).powi(2),
            sigmas,
            specs,
            cutoff_width,
        })
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    /// Cutoff weights `y_k(t, x)` at first coordinate `x1`.
    pub fn weights(&self, x1: f64, t: f64) -> Vec<f64> {
        let k = self.specs.len();
        if k == 1 {
            return vec![1.0];
        }
        let ys: Vec<f64> = self
            .sigmas
            .iter()
            .map(|s| cutoff((x1 - s * t) / self.cutoff_width))
            .collect();
        let mut w = Vec::with_capacity(k);
        w.push(1.0 - ys[0]);
        for j in 1..k - 1 {
            w.push(ys[j - 1] - ys[j]);
        }
        w.push(ys[k - 2]);
        w
    }
}

fn blend_coefficients() -> &'static [f64; 4] {
    static COEFFS: OnceLock<[f64; 4]> = OnceLock::new();
    COEFFS.get_or_init(|| {
        // Odd blend ½ + a₁s + a₃s³ + a₅s⁵ + a₇s⁷ matching the quartic
        // 1 − (1−s)⁴/16 through third derivatives at s = 0.9.
        let s: f64 = 0.9;
        let e = 1.0 - s;
        let mut m = [
            [
                s,
                s.powi(3),
                s.powi(5),
                s.powi(7),
                1.0 - e.powi(4) / 16.0 - 0.5,
            ],
            [
                1.0,
                3.0 * s * s,
                5.0 * s.powi(4),
                7.0 * s.powi(6),
                e.powi(3) / 4.0,
            ],
            [
                0.0,
                6.0 * s,
                20.0 * s.powi(3),
                42.0 * s.powi(5),
                -0.75 * e * e,
            ],
            [0.0, 6.0, 60.0 * s * s, 210.0 * s.powi(4), 1.5 * e],
        ];
        for col in 0..4 {
            let pivot = (col..4)
                .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
                .unwrap();
            m.swap(col, pivot);
            for row in 0..4 {
                if row != col {
                    let f = m[row][col] / m[col][col];
                    for c in col..5 {
                        m[row][c] -= f * m[col][c];
                    }
                }
            }
        }
        [
            m[0][4] / m[0][0],
            m[1][4] / m[1][1],
            m[2][4] / m[2][2],
            m[3][4] / m[3][3],
        ]
    })
}

/// Monotone `C³` step: 0 for `s ≤ −1`, 1 for `s ≥ 1`, `(1+s)⁴/16` just
/// above −1 and `1 − (1−s)⁴/16` just below 1.
pub fn cutoff(s: f64) -> f64 {
    if s <= -1.0 {
        0.0
    } else if s >= 1.0 {
        1.0
    } else if s <= -0.9 {
        (1.0 + s).powi(4) / 16.0
    } else if s >= 0.9 {
        1.0 - (1.0 - s).powi(4) / 16.0
    } else {
        let [a1, a3, a5, a7] = *blend_coefficients();
        let s2 = s * s;
        0.5 + s * (a1 + s2 * (a3 + s2 * (a5 + s2 * a7)))
    }
}

/// Sum of the embedded solitons of `config` at time `t`.
pub fn build_multisoliton(
    config: &MultiSolitonConfig,
    profiles: &[RadialProfile],
    grid: &GridSpec,
    t: f64,
) -> Result<ScalarField> {
    if profiles.len() != config.specs.len() {
        return Err(Error::ParamMismatch(format!(
            "{} profiles for {} solitons",
            profiles.len(),
            config.specs.len()
        )));
    }
    let mut total = ScalarField::zeros(*grid);
    for (spec, profile) in config.specs.iter().zip(profiles) {
        total = total.add(&embed_profile(profile, grid, spec, t)?)?;
    }
    Ok(total)
}

/// Localized masses `I_k = ∫|φ|² y_k` and momenta `M_k = Im ∫ φ̄ ∇φ y_k`.
pub fn localized_quantities(
    field: &ScalarField,
    config: &MultiSolitonConfig,
    t: f64,
) -> (Vec<f64>, Vec<[f64; 2]>) {
    let grid = field.grid();
    let n = grid.n();
    let k = config.len();
    let area = grid.cell_area();
    let [dx, dy] = field.gradient();
    let v = field.values();
    let rows: Vec<Vec<f64>> = (0..n).map(|j| config.weights(grid.coord(j), t)).collect();
    let masses = (0..k)
        .map(|c| area * pairwise_sum_by(v.len(), |i| v[i].norm_sqr() * rows[i / n][c]))
        .collect();
    let momenta = (0..k)
        .map(|c| {
            [
                area * pairwise_sum_by(v.len(), |i| {
                    (v[i].conj() * dx.values()[i]).im * rows[i / n][c]
                }),
                area * pairwise_sum_by(v.len(), |i| {
                    (v[i].conj() * dy.values()[i]).im * rows[i / n][c]
                }),
            ]
        })
        .collect();
    (masses, momenta)
}

/// Seed of the fixed perturbation used by stability runs.
pub const PERTURBATION_SEED: u64 = 0x5eed_0001;

/// Evolves `Q_ω + ε‖Q_ω‖_{H¹} η` with a fixed band-limited unit perturbation
/// `η` and records the modulated distance to the soliton orbit.
pub fn stability_experiment(
    profile: &RadialProfile,
    perturbation_size: f64,
    t_end: f64,
    params: &ProblemParams,
    grid: &GridSpec,
    dt: f64,
    probes: ProbeConfig,
) -> Result<EvolutionTrace> {
    if !(0.0..=0.1).contains(&perturbation_size) {
        return Err(Error::InvalidParameter(format!(
            "perturbation size {perturbation_size}"
        )));
    }
    if profile.equation.params() != Some(*params) {
        return Err(Error::ParamMismatch(
            "profile was computed for other parameters".into(),
        ));
    }
    let q = embed_profile(profile, grid, &SolitonSpec::at_rest(profile.omega), 0.0)?;
    let noise = band_limited_noise(*grid, grid.n() / 8, PERTURBATION_SEED);
    let phi0 = q.add(&noise.scaled(Complex64::new(perturbation_size * q.h1_norm(), 0.0)))?;
    let stepper = Stepper::new(*grid, *params, dt)?;
    let mut probe =
        |_: f64, phi: &ScalarField| Ok((modulated_distance(phi, profile)?.distance, None));
    run(&phi0, 0.0, t_end, &stepper, params, probes, &mut probe)
}

/// Evolves the multi-soliton ansatz and records `‖φ(t) − R(t)‖_{H¹}` together
/// with the localized masses and momenta.
pub fn multisoliton_experiment(
    config: &MultiSolitonConfig,
    profiles: &[RadialProfile],
    t_end: f64,
    params: &ProblemParams,
    grid: &GridSpec,
    dt: f64,
    probes: ProbeConfig,
) -> Result<EvolutionTrace> {
    if profiles
        .iter()
        .any(|p| p.equation.params() != Some(*params))
    {
        return Err(Error::ParamMismatch(
            "profile was computed for other parameters".into(),
        ));
    }
    let omega_min = config
        .specs
        .iter()
        .map(|s| s.omega)
        .fold(f64::INFINITY, f64::min);
    let limit = grid.half_length() - 4.0 / omega_min.sqrt();
    let check_box = |t: f64| -> Result<()> {
        for (index, spec) in config.specs.iter().enumerate() {
            let c = spec.center(t);
            if c[0].abs() > limit || c[1].abs() > limit {
                return Err(Error::BoxExit { index, time: t });
            }
        }
        Ok(())
    };
    check_box(0.0)?;
    let phi0 = build_multisoliton(config, profiles, grid, 0.0)?;
    let stepper = Stepper::new(*grid, *params, dt)?;
    let mut probe = |t: f64, phi: &ScalarField| {
        check_box(t)?;
        let r = build_multisoliton(config, profiles, grid, t)?;
        let res = phi.sub(&r)?.h1_norm();
        Ok((res, Some(localized_quantities(phi, config, t))))
    };
    run(&phi0, 0.0, t_end, &stepper, params, probes, &mut probe)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_shape() {
        assert_eq!(cutoff(-2.0), 0.0);
        assert_eq!(cutoff(2.0), 1.0);
        assert!((cutoff(0.0) - 0.5).abs() < 1e-15);
        let mut prev = 0.0;
        for i in 0..=4000 {
            let s = -2.0 + i as f64 * 1e-3;
            let y = cutoff(s);
            assert!(y >= prev && (0.0..=1.0).contains(&y), "s = {s}");
            prev = y;
        }
        // Odd symmetry about (0, ½).
        for &s in &[0.1, 0.5, 0.95] {
            assert!((cutoff(s) + cutoff(-s) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn cutoff_is_c3_at_the_joins() {
        let [a1, a3, a5, a7] = *blend_coefficients();
        let s: f64 = 0.9;
        let e = 1.0 - s;
        let blend = [
            0.5 + a1 * s + a3 * s.powi(3) + a5 * s.powi(5) + a7 * s.powi(7),
            a1 + 3.0 * a3 * s * s + 5.0 * a5 * s.powi(4) + 7.0 * a7 * s.powi(6),
            6.0 * a3 * s + 20.0 * a5 * s.powi(3) + 42.0 * a7 * s.powi(5),
            6.0 * a3 + 60.0 * a5 * s * s + 210.0 * a7 * s.powi(4),
        ];
        let quartic = [
            1.0 - e.powi(4) / 16.0,
            e.powi(3) / 4.0,
            -0.75 * e * e,
            1.5 * e,
        ];
        for k in 0..4 {
            assert!((blend[k] - quartic[k]).abs() < 1e-12, "derivative {k}");
        }
    }

    #[test]
    fn theta0_and_sigmas() {
        let s = |v: f64| SolitonSpec {
            omega: 0.1,
            x0: [0.0, 0.0],
            v: [v, 0.0],
            gamma: 0.0,
        };
        let cfg = MultiSolitonConfig::new(vec![s(-2.0), s(2.0)], 4.0).unwrap();
        assert_eq!(cfg.sigmas, vec![0.0]);
        assert!((cfg.theta0 - (0.1f64.sqrt() / 16.0).powi(2)).abs() < 1e-15);
        assert!(MultiSolitonConfig::new(vec![s(2.0), s(-2.0)], 4.0).is_err());
    }
}
