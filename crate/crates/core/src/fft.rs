//! Two-dimensional complex FFT on square row-major arrays.

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

pub struct Fft2 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch_len: usize,
}

thread_local! {
    static PLANS: RefCell<HashMap<usize, Rc<Fft2>>> = RefCell::new(HashMap::new());
}

impl Fft2 {
    /// Cached plan for an `n × n` transform on the current thread.
    pub fn plan(n: usize) -> Rc<Fft2> {
        PLANS.with(|plans| {
            plans
                .borrow_mut()
                .entry(n)
                .or_insert_with(|| {
                    let mut planner = FftPlanner::new();
                    let forward = planner.plan_fft_forward(n);
                    let inverse = planner.plan_fft_inverse(n);
                    let scratch_len = forward
                        .get_inplace_scratch_len()
                        .max(inverse.get_inplace_scratch_len());
                    Rc::new(Fft2 {
                        n,
                        forward,
                        inverse,
                        scratch_len,
                    })
                })
                .clone()
        })
    }

    /// Unnormalized forward transform, in place.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.forward);
    }

    /// Inverse transform including the `1/n²` normalization, in place.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inverse);
        let scale = 1.0 / (self.n * self.n) as f64;
        for z in data.iter_mut() {
            *z *= scale;
        }
    }

    /// Forward transform leaving the spectrum transposed (index `(k_y, k_x)`).
    /// Saves two transposes when the caller only applies a multiplier that
    /// is symmetric under swapping the axes before transforming back.
    pub fn forward_transposed(&self, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.n * self.n);
        self.rows(data, &self.forward);
        transpose(data, self.n);
        self.rows(data, &self.forward);
    }

    /// Inverse of [`Fft2::forward_transposed`].
    pub fn inverse_transposed(&self, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.n * self.n);
        self.rows(data, &self.inverse);
        transpose(data, self.n);
        self.rows(data, &self.inverse);
        let scale = 1.0 / (self.n * self.n) as f64;
        for z in data.iter_mut() {
            *z *= scale;
        }
    }

    fn run(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        assert_eq!(data.len(), self.n * self.n);
        self.rows(data, fft);
        transpose(data, self.n);
        self.rows(data, fft);
        transpose(data, self.n);
    }

    /// Row transforms are independent, so splitting them across threads
    /// leaves every output bit unchanged.
    fn rows(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let zero = Complex64::new(0.0, 0.0);
        if self.n < 128 {
            let mut scratch = vec![zero; self.scratch_len];
            fft.process_with_scratch(data, &mut scratch);
        } else {
            data.par_chunks_mut(self.n * 16).for_each_init(
                || vec![zero; self.scratch_len],
                |scratch, rows| fft.process_with_scratch(rows, scratch),
            );
        }
    }
}

fn transpose(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_single_mode() {
        let n = 16;
        let plan = Fft2::plan(n);
        let mut data: Vec<Complex64> = (0..n * n)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let orig = data.clone();
        plan.forward(&mut data);
        plan.inverse(&mut data);
        for (a, b) in data.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-13);
        }

        let mut t = orig.clone();
        plan.forward_transposed(&mut t);
        let mut full = orig.clone();
        plan.forward(&mut full);
        assert!((t[5 * n + 7] - full[7 * n + 5]).norm() < 1e-12);
        plan.inverse_transposed(&mut t);
        for (a, b) in t.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-13);
        }

        // e^{2πi(2j + 3k)/n} lands in bin (2, 3)
        let mut wave: Vec<Complex64> = (0..n * n)
            .map(|idx| {
                let (j, k) = ((idx / n) as f64, (idx % n) as f64);
                Complex64::from_polar(
                    1.0,
                    2.0 * std::f64::consts::PI * (2.0 * j + 3.0 * k) / n as f64,
                )
            })
            .collect();
        plan.forward(&mut wave);
        assert!((wave[2 * n + 3].re - (n * n) as f64).abs() < 1e-9);
        assert!(wave[3 * n + 2].norm() < 1e-9);
    }
}
