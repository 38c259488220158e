//! Axis-wise FFTs over row-major arrays of arbitrary shape.

use std::cell::RefCell;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

/// Unnormalized transform of every line along `axis`.
pub(crate) fn fft_axis(data: &mut [Complex64], shape: &[usize], axis: usize, inverse: bool) {
    let n = shape[axis];
    let stride: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let fft = plan(n, inverse);
    if stride == 1 {
        fft.process(data);
        return;
    }
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    for o in 0..outer {
        let base = o * n * stride;
        for inner in 0..stride {
            let start = base + inner;
            for (j, c) in line.iter_mut().enumerate() {
                *c = data[start + j * stride];
            }
            fft.process(&mut line);
            for (j, c) in line.iter().enumerate() {
                data[start + j * stride] = *c;
            }
        }
    }
}

/// Unnormalized transform over every axis.
pub(crate) fn fft_all(data: &mut [Complex64], shape: &[usize], inverse: bool) {
    for axis in 0..shape.len() {
        fft_axis(data, shape, axis, inverse);
    }
}

pub(crate) fn to_complex(samples: &[f64]) -> Vec<Complex64> {
    samples.iter().map(|&v| Complex64::new(v, 0.0)).collect()
}

/// Signed wavenumber of bin `j` on an axis of `n` points.
pub(crate) fn wavenumber(j: usize, n: usize) -> i64 {
    if j < n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// Spectral derivative of order `order` along one periodic axis of length
/// `length`. Odd orders drop the Nyquist bin.
pub(crate) fn spectral_axis_derivative(
    samples: &[f64],
    shape: &[usize],
    axis: usize,
    order: usize,
    length: f64,
) -> Vec<f64> {
    if order == 0 {
        return samples.to_vec();
    }
    let n = shape[axis];
    let stride: usize = shape[axis + 1..].iter().product();
    let mut data = to_complex(samples);
    fft_axis(&mut data, shape, axis, false);
    let scale = 2.0 * std::f64::consts::PI / length;
    for (flat, c) in data.iter_mut().enumerate() {
        let j = (flat / stride) % n;
        let k = wavenumber(j, n);
        if order % 2 == 1 && n % 2 == 0 && j == n / 2 {
            *c = Complex64::new(0.0, 0.0);
            continue;
        }
        let ik = Complex64::new(0.0, k as f64 * scale);
        *c *= ik.powu(order as u32);
    }
    fft_axis(&mut data, shape, axis, true);
    let norm = 1.0 / n as f64;
    data.iter().map(|c| c.re * norm).collect()
}
