//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

/// Adaptive Dormand–Prince 5(4) shooting for `u'' + (d−1)/r u' + g(u) = 0`,
/// independent of the library's fixed-step solver.
pub struct RadialOracle {
    pub d: f64,
    pub g: Box<dyn Fn(f64) -> f64>,
}

#[derive(Debug, PartialEq, Eq, Clone, Copy)]
enum Side {
    Cross,
    Up,
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

impl RadialOracle {
    fn rhs(&self, r: f64, y: [f64; 3]) -> [f64; 3] {
        let area = if self.d == 2.0 {
            2.0 * std::f64::consts::PI
        } else {
            4.0 * std::f64::consts::PI
        };
        [
            y[1],
            -(self.d - 1.0) / r * y[1] - (self.g)(y[0]),
            area * r.powf(self.d - 1.0) * y[0] * y[0],
        ]
    }

    /// Integrates from `u(0) = a` until the trajectory leaves the separatrix.
    /// Returns the side and the accumulated mass up to the exit point.
    fn run(&self, a: f64, r_end: f64) -> (Side, f64) {
        // Start slightly off the origin with the leading series term.
        let r0 = 1e-6;
        let c2 = -(self.g)(a) / (2.0 * self.d);
        let mut r = r0;
        let mut y = [a + c2 * r0 * r0, 2.0 * c2 * r0, 0.0];
        let mut h: f64 = 1e-3;
        let tol = 1e-13;
        while r < r_end {
            h = h.min(r_end - r);
            let mut k = [[0.0; 3]; 7];
            for s in 0..7 {
                let mut ys = y;
                for j in 0..s {
                    for c in 0..3 {
                        ys[c] += h * A[s][j] * k[j][c];
                    }
                }
                k[s] = self.rhs(r + C[s] * h, ys);
            }
            let mut y5 = y;
            let mut err = 0.0f64;
            for c in 0..3 {
                let mut s5 = 0.0;
                let mut s4 = 0.0;
                for s in 0..7 {
                    s5 += B5[s] * k[s][c];
                    s4 += B4[s] * k[s][c];
                }
                y5[c] += h * s5;
                let scale = tol * (1.0 + y[c].abs().max(y5[c].abs()));
                err = err.max((h * (s5 - s4)).abs() / scale);
            }
            if err <= 1.0 {
                r += h;
                y = y5;
                if y[0] < 0.0 {
                    return (Side::Cross, y[2]);
                }
                if y[1] > 0.0 || y[0] > 1.5 * a {
                    return (Side::Up, y[2]);
                }
            }
            h *= (0.9 * err.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
        }
        let side = if y[1] + y[0] < 0.0 {
            Side::Cross
        } else {
            Side::Up
        };
        (side, y[2])
    }

    /// Center value and mass of the decaying solution with peak in `[lo, hi]`.
    pub fn ground_state(&self, mut lo: f64, mut hi: f64, r_end: f64) -> (f64, f64) {
        assert_eq!(self.run(lo, r_end).0, Side::Up, "lower bracket");
        assert_eq!(self.run(hi, r_end).0, Side::Cross, "upper bracket");
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            match self.run(mid, r_end).0 {
                Side::Up => lo = mid,
                Side::Cross => hi = mid,
            }
        }
        (lo, self.run(lo, r_end).1)
    }
}

pub fn critical_oracle(d: u32) -> (f64, f64) {
    let s = 4.0 / d as f64;
    let oracle = RadialOracle {
        d: d as f64,
        g: Box::new(move |u: f64| u * u.abs().powf(s) - u),
    };
    oracle.ground_state(1.0, 6.0, 40.0)
}
