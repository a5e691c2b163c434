//! Uniform periodic 2-D grids, complex fields, spectral derivatives and the
//! conserved/variational functionals evaluated on them.
//!
//! Integrals are plain sums times `h²`. Derivatives are Fourier multipliers
//! with the Nyquist mode zeroed, so every derivative-based quantity is the
//! same whether computed from derivative fields or from Fourier sums.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::Fft2;
use crate::numerics::pairwise_sum_by;
use crate::params::{pow_from_sq, ProblemParams};

/// The periodic box `[−L, L)²` sampled by `N × N` nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    half_length: f64,
    n: usize,
}

impl GridSpec {
    pub fn new(half_length: f64, points_per_axis: usize) -> Result<Self> {
        if !(half_length.is_finite() && half_length > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "half length {half_length} must be positive"
            )));
        }
        if points_per_axis < 16 || !points_per_axis.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points per axis {points_per_axis} must be a power of two >= 16"
            )));
        }
        Ok(Self {
            half_length,
            n: points_per_axis,
        })
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_length / self.n as f64
    }

    /// Cell area `h²`.
    pub fn cell_area(&self) -> f64 {
        let h = self.spacing();
        h * h
    }

    /// Coordinate of node index `j` along either axis.
    pub fn coord(&self, j: usize) -> f64 {
        -self.half_length + j as f64 * self.spacing()
    }

    /// Physical position of the flat index `idx`.
    pub fn position(&self, idx: usize) -> [f64; 2] {
        [self.coord(idx / self.n), self.coord(idx % self.n)]
    }

    /// Angular wavenumbers along one axis, FFT order, Nyquist set to zero.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.n as i64;
        let dk = PI / self.half_length;
        (0..n)
            .map(|m| {
                if m == n / 2 {
                    0.0
                } else if m < n / 2 {
                    m as f64 * dk
                } else {
                    (m - n) as f64 * dk
                }
            })
            .collect()
    }

    /// `|k|²` for every Fourier bin, row-major.
    pub fn k_squared(&self) -> Vec<f64> {
        let k = self.wavenumbers();
        let n = self.n;
        (0..n * n)
            .map(|i| k[i / n] * k[i / n] + k[i % n] * k[i % n])
            .collect()
    }

    /// Minimum-image displacement `x − c` on the periodic box.
    pub fn periodic_displacement(&self, x: [f64; 2], c: [f64; 2]) -> [f64; 2] {
        let period = 2.0 * self.half_length;
        let wrap = |d: f64| d - period * (d / period).round();
        [wrap(x[0] - c[0]), wrap(x[1] - c[1])]
    }
}

/// Complex samples on a [`GridSpec`], row-major: index `(j, k)` holds the
/// value at `x = (−L + j h, −L + k h)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<Complex64>,
}

impl ScalarField {
    pub fn new(grid: GridSpec, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_fn<F: Fn(f64, f64) -> Complex64>(grid: GridSpec, f: F) -> Self {
        let values = (0..grid.len())
            .map(|i| {
                let [x, y] = grid.position(i);
                f(x, y)
            })
            .collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub(crate) fn ensure_finite(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidField)
        }
    }

    pub(crate) fn ensure_same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn scaled(&self, c: Complex64) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|z| z * c).collect(),
        }
    }

    pub fn map<F: Fn(Complex64) -> Complex64>(&self, f: F) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn sub(&self, other: &ScalarField) -> Result<ScalarField> {
        self.ensure_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(ScalarField {
            grid: self.grid,
            values,
        })
    }

    pub fn add(&self, other: &ScalarField) -> Result<ScalarField> {
        self.ensure_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + b)
            .collect();
        Ok(ScalarField {
            grid: self.grid,
            values,
        })
    }

    /// `∫|φ|²`.
    pub fn mass(&self) -> f64 {
        self.grid.cell_area() * pairwise_sum_by(self.values.len(), |i| self.values[i].norm_sqr())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest amplitude on the outermost rows and columns relative to the peak.
    pub fn boundary_amplitude_ratio(&self) -> f64 {
        let n = self.grid.n;
        let peak = self.max_abs();
        if peak == 0.0 {
            return 0.0;
        }
        let mut edge: f64 = 0.0;
        for i in 0..n {
            for &idx in &[i, (n - 1) * n + i, i * n, i * n + n - 1] {
                edge = edge.max(self.values[idx].norm());
            }
        }
        edge / peak
    }

    /// Forward FFT of the samples.
    pub fn spectrum(&self) -> Vec<Complex64> {
        let mut data = self.values.clone();
        Fft2::plan(self.grid.n).forward(&mut data);
        data
    }

    pub fn from_spectrum(grid: GridSpec, mut spectrum: Vec<Complex64>) -> ScalarField {
        Fft2::plan(grid.n).inverse(&mut spectrum);
        ScalarField {
            grid,
            values: spectrum,
        }
    }

    /// Spectral gradient `(∂_x φ, ∂_y φ)`.
    pub fn gradient(&self) -> [ScalarField; 2] {
        let spec = self.spectrum();
        let k = self.grid.wavenumbers();
        let n = self.grid.n;
        let i = Complex64::new(0.0, 1.0);
        let dx: Vec<Complex64> = (0..n * n).map(|m| spec[m] * i * k[m / n]).collect();
        let dy: Vec<Complex64> = (0..n * n).map(|m| spec[m] * i * k[m % n]).collect();
        [
            ScalarField::from_spectrum(self.grid, dx),
            ScalarField::from_spectrum(self.grid, dy),
        ]
    }

    /// Spectral Laplacian.
    pub fn laplacian(&self) -> ScalarField {
        let mut spec = self.spectrum();
        for (z, k2) in spec.iter_mut().zip(self.grid.k_squared()) {
            *z *= -k2;
        }
        ScalarField::from_spectrum(self.grid, spec)
    }

    /// `∫|∇φ|²` from the derivative fields.
    pub fn gradient_energy(&self) -> f64 {
        let [dx, dy] = self.gradient();
        self.grid.cell_area()
            * pairwise_sum_by(self.values.len(), |i| {
                dx.values[i].norm_sqr() + dy.values[i].norm_sqr()
            })
    }

    /// `∫|∇φ|²` from Parseval: `h²/N² Σ |k|² |φ̂_k|²`.
    pub fn gradient_energy_parseval(&self) -> f64 {
        let spec = self.spectrum();
        let k2 = self.grid.k_squared();
        let norm = self.grid.cell_area() / self.values.len() as f64;
        norm * pairwise_sum_by(spec.len(), |i| k2[i] * spec[i].norm_sqr())
    }

    /// Real `L²` inner product `Re ∫ ā b`.
    pub fn real_inner(&self, other: &ScalarField) -> f64 {
        self.grid.cell_area()
            * pairwise_sum_by(self.values.len(), |i| {
                (self.values[i].conj() * other.values[i]).re
            })
    }

    /// Complex `L²` inner product `∫ ā b`.
    pub fn inner(&self, other: &ScalarField) -> Complex64 {
        let re = pairwise_sum_by(self.values.len(), |i| {
            (self.values[i].conj() * other.values[i]).re
        });
        let im = pairwise_sum_by(self.values.len(), |i| {
            (self.values[i].conj() * other.values[i]).im
        });
        Complex64::new(re, im) * self.grid.cell_area()
    }

    /// `‖φ‖_{H¹}² = ∫|φ|² + |∇φ|²`.
    pub fn h1_norm_sq(&self) -> f64 {
        self.mass() + self.gradient_energy()
    }

    pub fn h1_norm(&self) -> f64 {
        self.h1_norm_sq().sqrt()
    }

    /// Periodic translation by an arbitrary vector via Fourier phases:
    /// returns `φ(x − a)`.
    pub fn translated(&self, a: [f64; 2]) -> ScalarField {
        let mut spec = self.spectrum();
        let k = self.grid.wavenumbers();
        let n = self.grid.n;
        for (m, z) in spec.iter_mut().enumerate() {
            let phase = -(k[m / n] * a[0] + k[m % n] * a[1]);
            *z *= Complex64::from_polar(1.0, phase);
        }
        ScalarField::from_spectrum(self.grid, spec)
    }

    /// Multiplies by the Galilean phase `e^{i v·x/2}`.
    pub fn boosted(&self, v: [f64; 2]) -> ScalarField {
        let mut out = self.clone();
        for (i, z) in out.values.iter_mut().enumerate() {
            let [x, y] = self.grid.position(i);
            *z *= Complex64::from_polar(1.0, 0.5 * (v[0] * x + v[1] * y));
        }
        out
    }
}

/// Values of the functionals for one field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalReport {
    /// `M = ∫|φ|²`.
    pub mass: f64,
    /// `E = ∫|∇φ|² − (1+2/d)^{-1} ∫|φ|^{2+4/d} + 2/(p+1) ∫|φ|^{p+1}`.
    pub energy: f64,
    /// `P = Im ∫ φ̄ ∇φ`.
    pub momentum: [f64; 2],
    /// The Pohozaev functional `I`.
    pub pohozaev: f64,
    /// `∫|φ|² + |∇φ|²`.
    pub h1_sq: f64,
    /// `∫|∇φ|²`.
    pub gradient_sq: f64,
    /// `∫|φ|^{2+4/d}`.
    pub critical_power: f64,
    /// `∫|φ|^{p+1}`.
    pub defocusing_power: f64,
}

/// The three integrals every functional is assembled from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Integrals {
    pub mass: f64,
    pub gradient_sq: f64,
    pub critical_power: f64,
    pub defocusing_power: f64,
}

impl Integrals {
    pub fn energy(&self, params: &ProblemParams) -> f64 {
        let d = params.dim();
        let p = params.p();
        self.gradient_sq - self.critical_power / (1.0 + 2.0 / d)
            + 2.0 / (p + 1.0) * self.defocusing_power
    }

    pub fn pohozaev(&self, params: &ProblemParams) -> f64 {
        pohozaev_from_parts(
            self.gradient_sq,
            self.critical_power,
            self.defocusing_power,
            params,
        )
    }
}

/// `I = 2∫|∇u|² − 2d/(d+2) ∫|u|^{2+4/d} + (p−1)d/(p+1) ∫|u|^{p+1}`.
pub(crate) fn pohozaev_from_parts(grad: f64, crit: f64, defoc: f64, params: &ProblemParams) -> f64 {
    let d = params.dim();
    let p = params.p();
    2.0 * grad - 2.0 * d / (d + 2.0) * crit + (p - 1.0) * d / (p + 1.0) * defoc
}

pub(crate) fn power_integrals(field: &ScalarField, params: &ProblemParams) -> Integrals {
    let sigma = params.sigma();
    let p = params.p();
    let v = field.values();
    let area = field.grid().cell_area();
    Integrals {
        mass: field.mass(),
        gradient_sq: field.gradient_energy(),
        critical_power: area
            * pairwise_sum_by(v.len(), |i| pow_from_sq(v[i].norm_sqr(), 2.0 + sigma)),
        defocusing_power: area
            * pairwise_sum_by(v.len(), |i| pow_from_sq(v[i].norm_sqr(), p + 1.0)),
    }
}

/// Mass, energy, momentum, Pohozaev functional and `H¹` norm of `field`.
pub fn compute_functionals(
    field: &ScalarField,
    params: &ProblemParams,
) -> Result<FunctionalReport> {
    field.ensure_finite()?;
    let sigma = params.sigma();
    let p = params.p();
    let area = field.grid().cell_area();
    let v = field.values();
    let [dx, dy] = field.gradient();
    let (dxv, dyv) = (dx.values(), dy.values());

    let mass = field.mass();
    let gradient_sq = area * pairwise_sum_by(v.len(), |i| dxv[i].norm_sqr() + dyv[i].norm_sqr());
    let critical_power =
        area * pairwise_sum_by(v.len(), |i| pow_from_sq(v[i].norm_sqr(), 2.0 + sigma));
    let defocusing_power =
        area * pairwise_sum_by(v.len(), |i| pow_from_sq(v[i].norm_sqr(), p + 1.0));
    let momentum = [
        area * pairwise_sum_by(v.len(), |i| (v[i].conj() * dxv[i]).im),
        area * pairwise_sum_by(v.len(), |i| (v[i].conj() * dyv[i]).im),
    ];
    let parts = Integrals {
        mass,
        gradient_sq,
        critical_power,
        defocusing_power,
    };
    Ok(FunctionalReport {
        mass,
        energy: parts.energy(params),
        momentum,
        pohozaev: parts.pohozaev(params),
        h1_sq: mass + gradient_sq,
        gradient_sq,
        critical_power,
        defocusing_power,
    })
}

/// Ratio of the two sides of the sharp Gagliardo–Nirenberg inequality,
/// `∫|φ|^{2+4/d} / [ (2+d)/d · (∫q²)^{−2/d} · ∫|∇φ|² · (∫|φ|²)^{2/d} ]`,
/// which never exceeds one and equals one at the critical ground state.
pub fn gn_ratio(field: &ScalarField, q_mass: f64, d: u32) -> Result<f64> {
    field.ensure_finite()?;
    let dim = d as f64;
    let mass = field.mass();
    let grad = field.gradient_energy();
    if mass == 0.0 || grad == 0.0 {
        return Err(Error::DivisionByZeroField);
    }
    let sigma = 4.0 / dim;
    let v = field.values();
    let lhs = field.grid().cell_area()
        * pairwise_sum_by(v.len(), |i| pow_from_sq(v[i].norm_sqr(), 2.0 + sigma));
    let rhs = (2.0 + dim) / dim * q_mass.powf(-2.0 / dim) * grad * mass.powf(2.0 / dim);
    Ok(lhs / rhs)
}

/// Discrete symmetric-decreasing rearrangement.
///
/// Moduli are sorted in decreasing order and assigned to nodes sorted by
/// distance from the origin, ties broken by flat index.
pub fn rearrange_decreasing(field: &ScalarField) -> ScalarField {
    let grid = *field.grid();
    let n = grid.n() as i64;
    let mut nodes: Vec<(i64, usize)> = (0..grid.len())
        .map(|idx| {
            let j = (idx as i64) / n - n / 2;
            let k = (idx as i64) % n - n / 2;
            (j * j + k * k, idx)
        })
        .collect();
    nodes.sort_unstable();
    let mut moduli: Vec<f64> = field.values().iter().map(|z| z.norm()).collect();
    moduli.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut values = vec![Complex64::new(0.0, 0.0); grid.len()];
    for ((_, idx), m) in nodes.into_iter().zip(moduli) {
        values[idx] = Complex64::new(m, 0.0);
    }
    ScalarField { grid, values }
}

/// `‖a − b‖_{H¹}`.
pub fn h1_distance(a: &ScalarField, b: &ScalarField) -> Result<f64> {
    Ok(a.sub(b)?.h1_norm())
}

/// Deterministic band-limited random field with unit `H¹` norm.
///
/// Fourier modes with index radius `|m| ≤ max_mode` get independent
/// uniform amplitudes and phases drawn from a ChaCha stream seeded by `seed`.
pub fn band_limited_noise(grid: GridSpec, max_mode: usize, seed: u64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = grid.n();
    let half = (n / 2) as i64;
    let mut spec = vec![Complex64::new(0.0, 0.0); grid.len()];
    let r2 = (max_mode * max_mode) as i64;
    for (idx, z) in spec.iter_mut().enumerate() {
        let mut mj = (idx / n) as i64;
        let mut mk = (idx % n) as i64;
        if mj >= half {
            mj -= n as i64;
        }
        if mk >= half {
            mk -= n as i64;
        }
        if mj * mj + mk * mk <= r2 {
            let amp: f64 = rng.gen_range(-1.0..1.0);
            let phase: f64 = rng.gen_range(0.0..2.0 * PI);
            *z = Complex64::from_polar(amp, phase);
        }
    }
    let field = ScalarField::from_spectrum(grid, spec);
    let norm = field.h1_norm();
    field.scaled(Complex64::new(1.0 / norm, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(grid: GridSpec) -> ScalarField {
        ScalarField::from_fn(grid, |x, y| {
            Complex64::new((-(x * x + y * y) / 2.0).exp(), 0.0)
        })
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(10.0, 64).is_ok());
        assert!(GridSpec::new(10.0, 8).is_err());
        assert!(GridSpec::new(10.0, 100).is_err());
        assert!(GridSpec::new(-1.0, 64).is_err());
        let g = GridSpec::new(12.0, 256).unwrap();
        assert_eq!(g.spacing(), 24.0 / 256.0);
    }

    #[test]
    fn gaussian_functionals_closed_form() {
        let grid = GridSpec::new(12.0, 256).unwrap();
        let params = ProblemParams::new(2, 5.0).unwrap();
        let r = compute_functionals(&gaussian(grid), &params).unwrap();
        assert!((r.mass - PI).abs() < 1e-8);
        assert!((r.gradient_sq - PI).abs() < 1e-8);
        assert!((r.energy - (PI - PI / 4.0 + PI / 9.0)).abs() < 1e-8);
        assert!((r.pohozaev - (2.0 * PI - PI / 2.0 + 4.0 * PI / 9.0)).abs() < 1e-8);
        assert!(r.momentum[0].abs() < 1e-12 && r.momentum[1].abs() < 1e-12);
    }

    #[test]
    fn zero_field_functionals() {
        let grid = GridSpec::new(8.0, 32).unwrap();
        let params = ProblemParams::new(2, 5.0).unwrap();
        let r = compute_functionals(&ScalarField::zeros(grid), &params).unwrap();
        assert_eq!(
            (r.mass, r.energy, r.pohozaev, r.momentum),
            (0.0, 0.0, 0.0, [0.0, 0.0])
        );
    }

    #[test]
    fn plane_wave_momentum() {
        let grid = GridSpec::new(12.0, 256).unwrap();
        let params = ProblemParams::new(2, 5.0).unwrap();
        let field = gaussian(grid).boosted([2.0, 0.0]);
        let r = compute_functionals(&field, &params).unwrap();
        assert!((r.momentum[0] - PI).abs() < 1e-8);
        assert!(r.momentum[1].abs() < 1e-8);
    }

    #[test]
    fn non_finite_rejected() {
        let grid = GridSpec::new(8.0, 16).unwrap();
        let mut f = ScalarField::zeros(grid);
        f.values_mut()[3] = Complex64::new(f64::NAN, 0.0);
        let params = ProblemParams::new(2, 5.0).unwrap();
        assert_eq!(compute_functionals(&f, &params), Err(Error::InvalidField));
    }

    #[test]
    fn gn_ratio_homogeneous_and_zero() {
        let grid = GridSpec::new(12.0, 128).unwrap();
        let g = gaussian(grid);
        let r1 = gn_ratio(&g, 11.7, 2).unwrap();
        let r2 = gn_ratio(&g.scaled(Complex64::new(3.7, 0.0)), 11.7, 2).unwrap();
        assert!((r1 - r2).abs() < 1e-12);
        assert_eq!(
            gn_ratio(&ScalarField::zeros(grid), 11.7, 2),
            Err(Error::DivisionByZeroField)
        );
    }

    #[test]
    fn rearrangement_of_radial_decreasing_is_identity() {
        let grid = GridSpec::new(8.0, 64).unwrap();
        let g = gaussian(grid);
        let r = rearrange_decreasing(&g);
        for (a, b) in r.values().iter().zip(g.values()) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn h1_distance_constant_offset() {
        let grid = GridSpec::new(6.0, 32).unwrap();
        let b = gaussian(grid);
        let c = Complex64::new(0.3, -0.4);
        let a = b.map(|z| z + c);
        let d = h1_distance(&a, &b).unwrap();
        assert!((d - (c.norm_sqr() * 144.0).sqrt()).abs() < 1e-10);
        assert_eq!(h1_distance(&b, &b).unwrap(), 0.0);
        let other = ScalarField::zeros(GridSpec::new(7.0, 32).unwrap());
        assert_eq!(h1_distance(&b, &other), Err(Error::GridMismatch));
    }

    #[test]
    fn translation_matches_analytic_shift() {
        let grid = GridSpec::new(12.0, 128).unwrap();
        let g = gaussian(grid);
        let shifted = g.translated([1.3, -0.7]);
        let exact = ScalarField::from_fn(grid, |x, y| {
            let (dx, dy) = (x - 1.3, y + 0.7);
            Complex64::new((-(dx * dx + dy * dy) / 2.0).exp(), 0.0)
        });
        assert!(h1_distance(&shifted, &exact).unwrap() < 1e-10);
    }

    #[test]
    fn noise_is_deterministic_and_normalized() {
        let grid = GridSpec::new(10.0, 64).unwrap();
        let a = band_limited_noise(grid, 8, 7);
        let b = band_limited_noise(grid, 8, 7);
        assert_eq!(a, b);
        assert!((a.h1_norm() - 1.0).abs() < 1e-12);
    }
}
