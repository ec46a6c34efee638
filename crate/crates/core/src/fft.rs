//! Two-dimensional complex FFT on square grids, with per-thread plan caching.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub(crate) struct Fft2 {
    side: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    transposed: Vec<Complex64>,
}

impl Fft2 {
    fn new(side: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(side);
        let inverse = planner.plan_fft_inverse(side);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            side,
            forward,
            inverse,
            scratch: vec![Complex64::default(); scratch_len],
            transposed: vec![Complex64::default(); side * side],
        }
    }

    /// Unnormalized forward transform, in place.
    pub fn forward(&mut self, buf: &mut [Complex64]) {
        let fft = Arc::clone(&self.forward);
        self.apply(buf, fft.as_ref());
    }

    /// Inverse transform scaled by `1/side^2`, in place.
    pub fn inverse(&mut self, buf: &mut [Complex64]) {
        let fft = Arc::clone(&self.inverse);
        self.apply(buf, fft.as_ref());
        let scale = 1.0 / (self.side * self.side) as f64;
        for v in buf.iter_mut() {
            *v *= scale;
        }
    }

    fn apply(&mut self, buf: &mut [Complex64], fft: &dyn Fft<f64>) {
        let n = self.side;
        assert_eq!(buf.len(), n * n, "buffer does not match the planned size");
        fft.process_with_scratch(buf, &mut self.scratch);
        transpose(buf, &mut self.transposed, n);
        fft.process_with_scratch(&mut self.transposed, &mut self.scratch);
        transpose(&self.transposed, buf, n);
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], n: usize) {
    const BLOCK: usize = 16;
    for rb in (0..n).step_by(BLOCK) {
        for cb in (0..n).step_by(BLOCK) {
            for r in rb..(rb + BLOCK).min(n) {
                for c in cb..(cb + BLOCK).min(n) {
                    dst[c * n + r] = src[r * n + c];
                }
            }
        }
    }
}

thread_local! {
    static PLANS: RefCell<HashMap<usize, Fft2>> = RefCell::new(HashMap::new());
}

/// Runs `f` with a cached transform for `side`x`side` grids.
pub(crate) fn with_fft2<R>(side: usize, f: impl FnOnce(&mut Fft2) -> R) -> R {
    PLANS.with(|plans| {
        let mut plans = plans.borrow_mut();
        let plan = plans.entry(side).or_insert_with(|| Fft2::new(side));
        f(plan)
    })
}

pub(crate) fn to_complex(data: &[f64]) -> Vec<Complex64> {
    data.iter().map(|&v| Complex64::new(v, 0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn naive_dft(data: &[Complex64], n: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::default(); n * n];
        for u in 0..n {
            for v in 0..n {
                let mut acc = Complex64::default();
                for r in 0..n {
                    for c in 0..n {
                        let phase = -2.0 * PI * ((u * r + v * c) % n) as f64 / n as f64;
                        acc += data[r * n + c] * Complex64::from_polar(1.0, phase);
                    }
                }
                out[u * n + v] = acc;
            }
        }
        out
    }

    #[test]
    fn matches_naive_dft_and_inverts() {
        let n = 6;
        let data: Vec<Complex64> = (0..n * n)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let expected = naive_dft(&data, n);
        let mut buf = data.clone();
        with_fft2(n, |f| f.forward(&mut buf));
        for (a, b) in buf.iter().zip(&expected) {
            assert!((a - b).norm() < 1e-10);
        }
        with_fft2(n, |f| f.inverse(&mut buf));
        for (a, b) in buf.iter().zip(&data) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
