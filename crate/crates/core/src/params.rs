//! Problem parameters of the double-power equation
//! `i φ_t + Δφ + |φ|^{4/d} φ − |φ|^{p−1} φ = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Space dimension `d` and defocusing exponent `p`.
///
/// The focusing term is always the L²-critical power `4/d`; `p` must lie
/// strictly above `1 + 4/d` (and below the Sobolev exponent `(d+2)/(d−2)`
/// when `d = 3`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    d: u32,
    p: f64,
}

impl ProblemParams {
    pub fn new(d: u32, p: f64) -> Result<Self> {
        if d != 2 && d != 3 {
            return Err(Error::InvalidDimension(d));
        }
        let lower = 1.0 + 4.0 / d as f64;
        let upper = if d == 3 { 5.0 } else { f64::INFINITY };
        if !(p.is_finite() && p > lower && p < upper) {
            return Err(Error::InvalidExponent { d, p });
        }
        Ok(Self { d, p })
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn dim(&self) -> f64 {
        self.d as f64
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// The critical exponent `4/d`.
    pub fn sigma(&self) -> f64 {
        4.0 / self.d as f64
    }

    /// Pointwise nonlinearity `g(s) = s^{1+4/d} − s^p` for `s ≥ 0`.
    pub fn nonlinearity(&self, s: f64) -> f64 {
        s * (pow_abs(s, self.sigma()) - pow_abs(s, self.p - 1.0))
    }
}

/// `|s|^e` with integer fast paths for the common exponents.
#[inline]
pub(crate) fn pow_abs(s: f64, e: f64) -> f64 {
    let a = s.abs();
    if e == 2.0 {
        a * a
    } else if e == 4.0 {
        let a2 = a * a;
        a2 * a2
    } else if e == 1.0 {
        a
    } else if e == 3.0 {
        a * a * a
    } else if a == 0.0 {
        0.0
    } else {
        a.powf(e)
    }
}

/// `|z|^e` evaluated from `|z|²` so the square root is only taken when needed.
#[inline]
pub(crate) fn pow_from_sq(abs_sq: f64, e: f64) -> f64 {
    if e == 2.0 {
        abs_sq
    } else if e == 4.0 {
        abs_sq * abs_sq
    } else if abs_sq == 0.0 {
        0.0
    } else {
        abs_sq.powf(0.5 * e)
    }
}

/// Volume of the unit sphere `S^{d−1}`.
pub(crate) fn sphere_area(d: u32) -> f64 {
    match d {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI,
        _ => unreachable!("dimension validated at construction"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponent_window() {
        assert!(ProblemParams::new(2, 5.0).is_ok());
        assert!(ProblemParams::new(3, 3.0).is_ok());
        assert!(matches!(
            ProblemParams::new(2, 3.0),
            Err(Error::InvalidExponent { .. })
        ));
        assert!(matches!(
            ProblemParams::new(3, 5.0),
            Err(Error::InvalidExponent { .. })
        ));
        assert!(matches!(
            ProblemParams::new(4, 5.0),
            Err(Error::InvalidDimension(4))
        ));
    }

    #[test]
    fn pow_paths_agree() {
        for &s in &[0.0, 0.3, 1.7] {
            for &e in &[1.0, 2.0, 3.0, 4.0, 4.0 / 3.0, 2.5] {
                let direct = if s == 0.0 { 0.0 } else { f64::powf(s, e) };
                assert!((pow_abs(s, e) - direct).abs() < 1e-14);
                assert!((pow_from_sq(s * s, e) - direct).abs() < 1e-13);
            }
        }
    }
}
