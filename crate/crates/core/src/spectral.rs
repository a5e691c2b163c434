//! Linearized operators about a ground state and their low spectrum.
//!
//! `L₊ = −Δ + ω − (1+4/d)Q^{4/d} + pQ^{p−1}` and `L₋ = −Δ + ω − Q^{4/d} + Q^{p−1}`
//! are restricted to a single angular mode `ℓ` and discretized by finite
//! volumes on the profile's radial nodes, with a Dirichlet condition at
//! `r_max`. The symmetrized tridiagonal matrix is diagonalized by Sturm
//! sequence bisection.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::groundstate::{radial_functionals, RadialProfile};
use crate::numerics::three_point_slope;
use crate::params::{pow_abs, ProblemParams};

/// Which linearization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// Acts on the real part of a perturbation.
    Plus,
    /// Acts on the imaginary part; `Q` spans its `ℓ = 0` kernel.
    Minus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialOperator {
    pub params: ProblemParams,
    pub omega: f64,
    pub potential_plus: Vec<f64>,
    pub potential_minus: Vec<f64>,
    pub dr: f64,
    pub angular_mode: u32,
    /// Unknowns are nodes `first..n_nodes`; node `n_nodes` is the Dirichlet
    /// boundary and node 0 is dropped for `ℓ ≥ 1`.
    first: usize,
    n_nodes: usize,
    volumes: Vec<f64>,
    fluxes: Vec<f64>,
}

/// Symmetric tridiagonal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

pub fn build_operators(profile: &RadialProfile, angular_mode: u32) -> Result<RadialOperator> {
    let params = profile
        .equation
        .params()
        .ok_or_else(|| Error::ParamMismatch("linearization needs a double-power profile".into()))?;
    let d = params.d() as i32;
    let s = params.sigma();
    let p = params.p();
    let n = profile.n_nodes;
    let h = profile.dr();
    let potential_plus = profile
        .values
        .iter()
        .map(|&q| -(1.0 + s) * pow_abs(q, s) + p * pow_abs(q, p - 1.0))
        .collect();
    let potential_minus = profile
        .values
        .iter()
        .map(|&q| -pow_abs(q, s) + pow_abs(q, p - 1.0))
        .collect();
    // Exact shell volumes ∫ r^{d−1} dr over each cell (the sphere area
    // cancels out of the eigenproblem).
    let volumes = (0..=n)
        .map(|i| {
            let outer = (i as f64 + 0.5) * h;
            let inner = if i == 0 { 0.0 } else { (i as f64 - 0.5) * h };
            (outer.powi(d) - inner.powi(d)) / d as f64
        })
        .collect();
    // fluxes[i] couples nodes i and i+1.
    let fluxes = (0..n)
        .map(|i| ((i as f64 + 0.5) * h).powi(d - 1) / h)
        .collect();
    Ok(RadialOperator {
        params,
        omega: profile.omega,
        potential_plus,
        potential_minus,
        dr: h,
        angular_mode,
        first: if angular_mode == 0 { 0 } else { 1 },
        n_nodes: n,
        volumes,
        fluxes,
    })
}

impl RadialOperator {
    fn potential(&self, branch: Branch) -> &[f64] {
        match branch {
            Branch::Plus => &self.potential_plus,
            Branch::Minus => &self.potential_minus,
        }
    }

    /// Centrifugal term `ℓ(ℓ+d−2)/r²` at node `i ≥ 1`.
    pub fn centrifugal(&self, i: usize) -> f64 {
        let l = self.angular_mode as f64;
        if l == 0.0 {
            return 0.0;
        }
        let r = i as f64 * self.dr;
        l * (l + self.params.dim() - 2.0) / (r * r)
    }

    /// Nodes carrying unknowns.
    pub fn unknowns(&self) -> std::ops::Range<usize> {
        self.first..self.n_nodes
    }

    fn diagonal(&self, branch: Branch, i: usize) -> f64 {
        let mut k = self.fluxes[i];
        if i > 0 {
            k += self.fluxes[i - 1];
        }
        k / self.volumes[i] + self.omega + self.potential(branch)[i] + self.centrifugal(i)
    }

    /// Symmetrized matrix `V^{1/2} A V^{−1/2}` on the unknown nodes.
    pub fn symmetric_matrix(&self, branch: Branch) -> Tridiagonal {
        let range = self.unknowns();
        let diag = range.clone().map(|i| self.diagonal(branch, i)).collect();
        let off = range
            .clone()
            .take(range.len().saturating_sub(1))
            .map(|i| -self.fluxes[i] / (self.volumes[i] * self.volumes[i + 1]).sqrt())
            .collect();
        Tridiagonal { diag, off }
    }

    /// Applies the (unsymmetrized) operator to nodal values `u` given on all
    /// nodes `0..=n_nodes`; entries outside the unknowns are treated as zero.
    pub fn apply(&self, branch: Branch, u: &[f64]) -> Vec<f64> {
        assert_eq!(u.len(), self.n_nodes + 1);
        let at = |i: usize| {
            if self.unknowns().contains(&i) {
                u[i]
            } else {
                0.0
            }
        };
        let mut out = vec![0.0; self.n_nodes + 1];
        for i in self.unknowns() {
            let mut flux = self.fluxes[i] * (at(i) - at(i + 1));
            if i > 0 {
                flux += self.fluxes[i - 1] * (at(i) - at(i - 1));
            }
            out[i] = flux / self.volumes[i]
                + (self.omega + self.potential(branch)[i] + self.centrifugal(i)) * at(i);
        }
        out
    }

    /// `‖A u‖ / ‖u‖` in the discrete radial `L²` norm.
    pub fn relative_residual(&self, branch: Branch, u: &[f64]) -> f64 {
        let au = self.apply(branch, u);
        self.norm(&au) / self.norm(u)
    }

    pub fn norm(&self, u: &[f64]) -> f64 {
        self.unknowns()
            .map(|i| self.volumes[i] * u[i] * u[i])
            .sum::<f64>()
            .sqrt()
    }

    /// Discrete radial inner product over the unknown nodes.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.unknowns().map(|i| self.volumes[i] * u[i] * v[i]).sum()
    }
}

/// Number of eigenvalues of `m` strictly below `x`.
pub fn sturm_count(m: &Tridiagonal, x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..m.diag.len() {
        let coupling = if i == 0 {
            0.0
        } else {
            m.off[i - 1] * m.off[i - 1] / q
        };
        q = m.diag[i] - x - coupling;
        if q == 0.0 {
            q = -f64::EPSILON * (m.diag[i].abs() + x.abs()).max(f64::MIN_POSITIVE);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// The `k` smallest eigenvalues of `m`, ascending.
pub fn tridiagonal_lowest(m: &Tridiagonal, k: usize) -> Vec<f64> {
    let n = m.diag.len();
    let k = k.min(n);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let radius = if i > 0 { m.off[i - 1].abs() } else { 0.0 }
            + if i + 1 < n { m.off[i].abs() } else { 0.0 };
        lo = lo.min(m.diag[i] - radius);
        hi = hi.max(m.diag[i] + radius);
    }
    let scale = lo.abs().max(hi.abs()).max(1.0);
    (0..k)
        .map(|j| {
            let (mut a, mut b) = (lo, hi);
            while b - a > 4.0 * f64::EPSILON * scale {
                let mid = 0.5 * (a + b);
                if mid == a || mid == b {
                    break;
                }
                if sturm_count(m, mid) > j {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            0.5 * (a + b)
        })
        .collect()
}

pub fn lowest_eigs(op: &RadialOperator, branch: Branch, k: usize) -> Result<Vec<f64>> {
    if k > 8 {
        return Err(Error::InvalidParameter(format!(
            "at most 8 eigenvalues, asked for {k}"
        )));
    }
    Ok(tridiagonal_lowest(&op.symmetric_matrix(branch), k))
}

/// Eigenvalues below this count as negative.
pub const NEGATIVE_THRESHOLD: f64 = -1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    /// Increasing mass and a single negative direction of `L₊`.
    StableCandidate,
    /// Mass non-increasing in `ω`.
    VkUnstable,
    /// Increasing mass but an unexpected count of negative eigenvalues.
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::StableCandidate => "stable-candidate",
            Verdict::VkUnstable => "vk-unstable",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralReport {
    pub omega: f64,
    /// Lowest eigenvalues of `L₊` for `ℓ = 0`.
    pub lowest_eigs_plus: Vec<f64>,
    /// Lowest eigenvalues of `L₊` for `ℓ = 1`.
    pub lowest_eigs_plus_l1: Vec<f64>,
    pub lowest_eigs_minus: Vec<f64>,
    pub n_negative_plus: usize,
    /// `‖L₋Q‖/‖Q‖`.
    pub kernel_residual_minus: f64,
    /// `‖L₊^{(ℓ=1)} Q'‖/‖Q'‖`.
    pub kernel_residual_plus_translation: f64,
    /// `dm/dω` by centered differences.
    pub vk_slope: f64,
    /// `D''(ω)`; equal to `dm/dω`.
    pub dprime2: f64,
    /// `dE/dω` by centered differences.
    pub energy_slope: f64,
    /// `|dE/dω + ω dm/dω| / |dE/dω|`.
    pub energy_identity_residual: f64,
    /// Rayleigh quotient `⟨L₊Q, Q⟩ / ⟨Q, Q⟩`.
    pub rayleigh_plus: f64,
    /// `‖L₊Q − λQ‖/‖Q‖` with `λ = rayleigh_plus`; zero only if `Q` were an
    /// eigenfunction of `L₊`.
    pub eigen_relation_residual: f64,
    pub verdict: Verdict,
}

/// Per-profile spectral data, independent of neighbouring frequencies.
#[derive(Debug, Clone, PartialEq)]
struct LocalSpectrum {
    plus: Vec<f64>,
    plus_l1: Vec<f64>,
    minus: Vec<f64>,
    kernel_minus: f64,
    kernel_translation: f64,
    rayleigh_plus: f64,
    eigen_relation: f64,
    energy: f64,
}

const REPORTED_EIGS: usize = 4;

fn local_spectrum(profile: &RadialProfile) -> Result<LocalSpectrum> {
    let params = profile
        .equation
        .params()
        .ok_or_else(|| Error::ParamMismatch("linearization needs a double-power profile".into()))?;
    let l0 = build_operators(profile, 0)?;
    let l1 = build_operators(profile, 1)?;
    let q = &profile.values;
    let dq = profile.derivative();
    let lq = l0.apply(Branch::Plus, q);
    let rayleigh_plus = l0.inner(&lq, q) / l0.inner(q, q);
    let shifted: Vec<f64> = lq
        .iter()
        .zip(q)
        .map(|(a, b)| a - rayleigh_plus * b)
        .collect();
    Ok(LocalSpectrum {
        plus: lowest_eigs(&l0, Branch::Plus, REPORTED_EIGS)?,
        plus_l1: lowest_eigs(&l1, Branch::Plus, REPORTED_EIGS)?,
        minus: lowest_eigs(&l0, Branch::Minus, REPORTED_EIGS)?,
        kernel_minus: l0.relative_residual(Branch::Minus, q),
        kernel_translation: l1.relative_residual(Branch::Plus, &dq),
        rayleigh_plus,
        eigen_relation: l0.norm(&shifted) / l0.norm(q),
        energy: radial_functionals(profile, &params).energy,
    })
}

/// Derivative at `x[1]` of the quadratic through three points.
/// Spectral and slope report at every interior frequency of `profiles`.
pub fn vk_report(profiles: &[RadialProfile]) -> Result<Vec<SpectralReport>> {
    if profiles.len() < 3 {
        return Err(Error::InsufficientSamples(profiles.len()));
    }
    let params = profiles[0].equation.params();
    if profiles
        .iter()
        .any(|p| p.equation.params() != params || params.is_none())
    {
        return Err(Error::ParamMismatch(
            "profiles must share double-power parameters".into(),
        ));
    }
    let mut sorted: Vec<&RadialProfile> = profiles.iter().collect();
    sorted.sort_by(|a, b| a.omega.total_cmp(&b.omega));
    if sorted.windows(2).any(|w| w[0].omega == w[1].omega) {
        return Err(Error::InvalidParameter("repeated frequency".into()));
    }
    let local: Vec<LocalSpectrum> = sorted
        .par_iter()
        .map(|p| local_spectrum(p))
        .collect::<Result<_>>()?;
    Ok((1..sorted.len() - 1)
        .map(|i| {
            let x = [sorted[i - 1].omega, sorted[i].omega, sorted[i + 1].omega];
            let vk_slope =
                three_point_slope(x, [sorted[i - 1].mass, sorted[i].mass, sorted[i + 1].mass]);
            let energy_slope = three_point_slope(
                x,
                [local[i - 1].energy, local[i].energy, local[i + 1].energy],
            );
            let omega = x[1];
            let spec = &local[i];
            let n_negative_plus = spec
                .plus
                .iter()
                .filter(|&&e| e < NEGATIVE_THRESHOLD)
                .count();
            let verdict = if vk_slope <= 0.0 {
                Verdict::VkUnstable
            } else if n_negative_plus == 1 {
                Verdict::StableCandidate
            } else {
                Verdict::Inconclusive
            };
            SpectralReport {
                omega,
                lowest_eigs_plus: spec.plus.clone(),
                lowest_eigs_plus_l1: spec.plus_l1.clone(),
                lowest_eigs_minus: spec.minus.clone(),
                n_negative_plus,
                kernel_residual_minus: spec.kernel_minus,
                kernel_residual_plus_translation: spec.kernel_translation,
                vk_slope,
                dprime2: vk_slope,
                energy_slope,
                energy_identity_residual: (energy_slope + omega * vk_slope).abs()
                    / energy_slope.abs(),
                rayleigh_plus: spec.rayleigh_plus,
                eigen_relation_residual: spec.eigen_relation,
                verdict,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sturm_on_known_matrix() {
        // Discrete Dirichlet Laplacian: eigenvalues 2 − 2cos(jπ/(n+1)).
        let n = 50;
        let m = Tridiagonal {
            diag: vec![2.0; n],
            off: vec![-1.0; n - 1],
        };
        let eigs = tridiagonal_lowest(&m, 5);
        for (j, e) in eigs.iter().enumerate() {
            let exact = 2.0 - 2.0 * ((j + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((e - exact).abs() < 1e-13, "{e} vs {exact}");
        }
        assert_eq!(sturm_count(&m, 0.0), 0);
        assert_eq!(sturm_count(&m, 4.0), n);
    }

    #[test]
    fn centered_slope_exact_for_quadratics() {
        let f = |x: f64| 3.0 * x * x - x + 2.0;
        let x = [0.1, 0.13, 0.2];
        let s = three_point_slope(x, [f(x[0]), f(x[1]), f(x[2])]);
        assert!((s - (6.0 * 0.13 - 1.0)).abs() < 1e-12);
    }
}
