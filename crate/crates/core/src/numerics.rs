//! Small numerical kernels shared across modules.

/// Pairwise summation with a fixed block size.
///
/// The reduction tree depends only on the slice length, so the result is
/// bit-reproducible.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 128;
    if xs.len() <= BLOCK {
        let mut acc = 0.0;
        for &x in xs {
            acc += x;
        }
        acc
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

/// Sum of `f(i)` for `i in 0..n` with the same fixed pairwise tree.
pub fn pairwise_sum_by<F: Fn(usize) -> f64>(n: usize, f: F) -> f64 {
    fn rec<F: Fn(usize) -> f64>(lo: usize, hi: usize, f: &F) -> f64 {
        const BLOCK: usize = 128;
        if hi - lo <= BLOCK {
            let mut acc = 0.0;
            for i in lo..hi {
                acc += f(i);
            }
            acc
        } else {
            let mid = lo + (hi - lo) / 2;
            rec(lo, mid, f) + rec(mid, hi, f)
        }
    }
    rec(0, n, &f)
}

/// Composite Simpson rule on `samples.len()` uniform nodes spaced `h`.
///
/// An odd number of intervals falls back to Simpson on all but the last
/// three intervals plus the 3/8 rule on those.
pub fn simpson(samples: &[f64], h: f64) -> f64 {
    let n = samples.len();
    match n {
        0 | 1 => 0.0,
        2 => 0.5 * h * (samples[0] + samples[1]),
        3 => h / 3.0 * (samples[0] + 4.0 * samples[1] + samples[2]),
        _ => {
            let intervals = n - 1;
            if intervals.is_multiple_of(2) {
                simpson_even(samples, h)
            } else {
                let head = &samples[..n - 3];
                let tail = &samples[n - 4..];
                simpson_even(head, h)
                    + 3.0 * h / 8.0 * (tail[0] + 3.0 * tail[1] + 3.0 * tail[2] + tail[3])
            }
        }
    }
}

fn simpson_even(samples: &[f64], h: f64) -> f64 {
    let n = samples.len();
    let odd = pairwise_sum_by((n - 1) / 2, |i| samples[2 * i + 1]);
    let even = pairwise_sum_by((n - 1) / 2 - 1, |i| samples[2 * i + 2]);
    h / 3.0 * (samples[0] + samples[n - 1] + 4.0 * odd + 2.0 * even)
}

/// Bisection for a sign change of `f` on `[lo, hi]`.
///
/// Returns `None` when `f(lo)` and `f(hi)` have the same sign.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> Option<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Some(lo);
    }
    if fhi == 0.0 {
        return Some(hi);
    }
    if flo.signum() == fhi.signum() {
        return None;
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() <= tol || mid == lo || mid == hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Some(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Least-squares slope of `ys` against `xs`.
pub fn linear_fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = pairwise_sum(xs) / n;
    let my = pairwise_sum(ys) / n;
    let sxy = pairwise_sum_by(xs.len(), |i| (xs[i] - mx) * (ys[i] - my));
    let sxx = pairwise_sum_by(xs.len(), |i| (xs[i] - mx) * (xs[i] - mx));
    sxy / sxx
}

/// Derivative at the middle node of the quadratic through three samples.
pub fn three_point_slope(x: [f64; 3], y: [f64; 3]) -> f64 {
    y[0] * (x[1] - x[2]) / ((x[0] - x[1]) * (x[0] - x[2]))
        + y[1] * (2.0 * x[1] - x[0] - x[2]) / ((x[1] - x[0]) * (x[1] - x[2]))
        + y[2] * (x[1] - x[0]) / ((x[2] - x[0]) * (x[2] - x[1]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_is_exact_for_cubics() {
        for n in [5usize, 6, 9, 10] {
            let h = 2.0 / (n - 1) as f64;
            let ys: Vec<f64> = (0..n)
                .map(|i| {
                    let x = i as f64 * h;
                    x * x * x - 2.0 * x + 1.0
                })
                .collect();
            // ∫_0^2 x³ − 2x + 1 = 4 − 4 + 2
            assert!((simpson(&ys, h) - 2.0).abs() < 1e-13, "n = {n}");
        }
    }

    #[test]
    fn pairwise_matches_naive() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        let naive: f64 = xs.iter().sum();
        assert!((pairwise_sum(&xs) - naive).abs() < 1e-12);
        assert_eq!(pairwise_sum(&xs), pairwise_sum_by(xs.len(), |i| xs[i]));
    }

    #[test]
    fn bisect_finds_root() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
        assert!(bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-10).is_none());
    }
}
