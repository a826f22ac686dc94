use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub fn forward_plan(n: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n))
}

pub fn inverse_plan(n: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n))
}

/// Unnormalised forward DFT in place.
pub fn fft_in_place(buf: &mut [Complex64]) {
    forward_plan(buf.len()).process(buf);
}

/// Inverse DFT in place, normalised by `1/n`.
pub fn ifft_in_place(buf: &mut [Complex64]) {
    let n = buf.len();
    inverse_plan(n).process(buf);
    let s = 1.0 / n as f64;
    for v in buf.iter_mut() {
        *v *= s;
    }
}

/// Signed mode index of FFT slot `idx`, in `[-n/2, n/2)`.
#[inline]
pub fn mode_of_slot(idx: usize, n: usize) -> i64 {
    if idx < n / 2 {
        idx as i64
    } else {
        idx as i64 - n as i64
    }
}

/// Physical wavenumbers `2πm/L` in FFT slot order.
pub fn wavenumbers(n: usize, box_length: f64) -> Vec<f64> {
    (0..n).map(|i| 2.0 * PI * mode_of_slot(i, n) as f64 / box_length).collect()
}
