//! Fourier representation of grid fields and the spectral differential
//! operators built on it.
//!
//! Coefficients are normalized so that `f(x) = Σ_k c_k e^{i k·x}`; the
//! constant field `1` therefore has `c_0 = 1`.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft;
use crate::grid::{GridField, TorusGrid};

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    grid: TorusGrid,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    /// Coefficients in FFT bin order.
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Coefficient of wavevector `k`; zero outside the resolved band.
    pub fn coeff(&self, k: &[i64]) -> Complex64 {
        self.grid
            .bin_of(k)
            .map(|b| self.coeffs[b])
            .unwrap_or_default()
    }

    /// `Σ_k V |c_k|^2`, which equals `‖f‖²_{L²}` by Parseval.
    pub fn energy(&self) -> f64 {
        self.grid.volume() * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }

    /// Largest violation of `c(-k) = conj(c(k))` over bins whose mirror is resolved.
    pub fn conjugate_symmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for flat in 0..self.grid.len() {
            let k = self.grid.wavevector(flat);
            let neg: Vec<i64> = k.iter().map(|v| -v).collect();
            if let Some(b) = self.grid.bin_of(&neg) {
                worst = worst.max((self.coeffs[b] - self.coeffs[flat].conj()).norm());
            }
        }
        worst
    }

    /// Multiply every coefficient by `m(k)`.
    pub fn apply(&self, m: impl Fn(&[i64]) -> Complex64) -> SpectralField {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(flat, c)| c * m(&self.grid.wavevector(flat)))
            .collect();
        SpectralField {
            grid: self.grid,
            coeffs,
        }
    }

    pub(crate) fn from_coeffs(grid: TorusGrid, coeffs: Vec<Complex64>) -> Self {
        debug_assert_eq!(coeffs.len(), grid.len());
        Self { grid, coeffs }
    }
}

pub fn forward_transform(f: &GridField) -> SpectralField {
    let grid = *f.grid();
    let mut data = fft::to_complex(f.samples());
    fft::fft_all(&mut data, &grid.shape(), false);
    let norm = 1.0 / grid.len() as f64;
    data.iter_mut().for_each(|c| *c *= norm);
    SpectralField { grid, coeffs: data }
}

pub fn inverse_transform(spec: &SpectralField) -> GridField {
    let grid = spec.grid;
    let mut data = spec.coeffs.clone();
    fft::fft_all(&mut data, &grid.shape(), true);
    let samples = data.iter().map(|c| c.re).collect();
    GridField::new(grid, samples).expect("inverse transform of finite coefficients is finite")
}

/// `Π_a (i k_a)^{orders[a]}`, with the Nyquist bin dropped on axes of odd order.
fn partial_multiplier(grid: &TorusGrid, orders: &[usize]) -> impl Fn(&[i64]) -> Complex64 {
    let half = grid.points_per_axis() as i64 / 2;
    let orders = orders.to_vec();
    move |k: &[i64]| {
        let mut m = Complex64::new(1.0, 0.0);
        for (a, &p) in orders.iter().enumerate() {
            if p == 0 {
                continue;
            }
            if p % 2 == 1 && k[a] == -half {
                return Complex64::new(0.0, 0.0);
            }
            m *= Complex64::new(0.0, k[a] as f64).powu(p as u32);
        }
        m
    }
}

/// Mixed partial derivative `∂^α f` with `α = orders`.
pub fn partial(f: &GridField, orders: &[usize]) -> Result<GridField> {
    let grid = f.grid();
    if orders.len() != grid.dim() {
        return Err(Error::GridMismatch(format!(
            "multi-index of length {} on a {}-dimensional grid",
            orders.len(),
            grid.dim()
        )));
    }
    if orders.iter().all(|&p| p == 0) {
        return Ok(f.clone());
    }
    let spec = forward_transform(f);
    Ok(inverse_transform(&spec.apply(partial_multiplier(grid, orders))))
}

pub fn laplacian(f: &GridField) -> GridField {
    let spec = forward_transform(f);
    inverse_transform(&spec.apply(|k| {
        Complex64::new(-(k.iter().map(|v| (v * v) as f64).sum::<f64>()), 0.0)
    }))
}

pub fn gradient(f: &GridField) -> Vec<GridField> {
    let grid = *f.grid();
    let spec = forward_transform(f);
    (0..grid.dim())
        .map(|a| {
            let mut orders = vec![0; grid.dim()];
            orders[a] = 1;
            inverse_transform(&spec.apply(partial_multiplier(&grid, &orders)))
        })
        .collect()
}

/// Pointwise `<∇f, ∇g>` on the flat torus.
pub fn grad_dot(f: &GridField, g: &GridField) -> Result<GridField> {
    f.grid().check_same(g.grid())?;
    let gf = gradient(f);
    let gg = gradient(g);
    let mut out = vec![0.0; f.grid().len()];
    for (a, b) in gf.iter().zip(&gg) {
        for ((o, x), y) in out.iter_mut().zip(a.samples()).zip(b.samples()) {
            *o += x * y;
        }
    }
    GridField::new(*f.grid(), out)
}

/// Trigonometric interpolation onto a grid with `n` points per axis
/// (zero-padding or truncation of the spectrum).
pub fn resample(f: &GridField, n: usize) -> Result<GridField> {
    let src = *f.grid();
    let dst = TorusGrid::new(src.dim(), n)?;
    if dst == src {
        return Ok(f.clone());
    }
    let spec = forward_transform(f);
    let mut coeffs = vec![Complex64::new(0.0, 0.0); dst.len()];
    let src_half = src.points_per_axis() as i64 / 2;
    let dst_half = n as i64 / 2;
    let upsampling = n > src.points_per_axis();
    for (flat, c) in spec.coeffs.iter().enumerate() {
        let k = src.wavevector(flat);
        if !upsampling {
            // Modes at ±N/2 of the coarse grid alias onto its Nyquist bin.
            if k.iter().all(|v| v.abs() <= dst_half) {
                let b = k
                    .iter()
                    .fold(0usize, |acc, &v| acc * n + v.rem_euclid(n as i64) as usize);
                coeffs[b] += c;
            }
            continue;
        }
        // Source Nyquist bins are split evenly between ±N/2 to keep the field real.
        let nyq: Vec<usize> = (0..k.len()).filter(|&a| k[a] == -src_half).collect();
        let share = *c / (1u64 << nyq.len()) as f64;
        for mask in 0..(1usize << nyq.len()) {
            let mut kk = k.clone();
            for (bit, &a) in nyq.iter().enumerate() {
                if mask & (1 << bit) != 0 {
                    kk[a] = src_half;
                }
            }
            let b = dst.bin_of(&kk).expect("refined band contains the coarse band");
            coeffs[b] += share;
        }
    }
    Ok(inverse_transform(&SpectralField::from_coeffs(dst, coeffs)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid1(n: usize) -> TorusGrid {
        TorusGrid::new(1, n).unwrap()
    }

    #[test]
    fn constant_mode() {
        let f = GridField::constant(TorusGrid::new(2, 8).unwrap(), 1.0).unwrap();
        let s = forward_transform(&f);
        assert!((s.coeff(&[0, 0]) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        let rest: f64 = s.coeffs().iter().skip(1).map(|c| c.norm()).sum();
        assert!(rest < 1e-14);
    }

    #[test]
    fn single_sine_mode() {
        let f = GridField::from_fn(TorusGrid::new(2, 8).unwrap(), |x| x[0].sin()).unwrap();
        let s = forward_transform(&f);
        assert!((s.coeff(&[1, 0]) - Complex64::new(0.0, -0.5)).norm() < 1e-15);
        assert!((s.coeff(&[-1, 0]) - Complex64::new(0.0, 0.5)).norm() < 1e-15);
        let others: f64 = (0..s.grid().len())
            .filter(|&b| {
                let k = s.grid().wavevector(b);
                !(k[1] == 0 && k[0].abs() == 1)
            })
            .map(|b| s.coeffs()[b].norm())
            .sum();
        assert!(others < 1e-14);
        assert!(s.conjugate_symmetry_defect() < 1e-15);
    }

    #[test]
    fn derivatives_of_constants_vanish() {
        let f = GridField::constant(TorusGrid::new(2, 8).unwrap(), 3.5).unwrap();
        assert!(laplacian(&f).max_abs() < 1e-14);
        assert!(gradient(&f).iter().all(|g| g.max_abs() < 1e-14));
    }

    #[test]
    fn sine_is_a_laplacian_eigenfunction() {
        let f = GridField::from_fn(grid1(32), |x| x[0].sin()).unwrap();
        let lap = laplacian(&f);
        let err = lap.add(&f).unwrap().max_abs();
        assert!(err < 1e-13);
        let d = gradient(&f).remove(0);
        let cos = GridField::from_fn(grid1(32), |x| x[0].cos()).unwrap();
        assert!(d.sub(&cos).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn mixed_partial() {
        let g = TorusGrid::new(2, 16).unwrap();
        let f = GridField::from_fn(g, |x| (2.0 * x[0]).sin() * x[1].cos()).unwrap();
        let d = partial(&f, &[1, 2]).unwrap();
        let exact = GridField::from_fn(g, |x| -2.0 * (2.0 * x[0]).cos() * x[1].cos()).unwrap();
        assert!(d.sub(&exact).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn resample_is_exact_for_band_limited() {
        let f = GridField::from_fn(grid1(16), |x| (3.0 * x[0]).cos() + 0.5 * x[0].sin()).unwrap();
        let up = resample(&f, 64).unwrap();
        let exact =
            GridField::from_fn(grid1(64), |x| (3.0 * x[0]).cos() + 0.5 * x[0].sin()).unwrap();
        assert!(up.sub(&exact).unwrap().max_abs() < 1e-13);
        let down = resample(&up, 16).unwrap();
        assert!(down.sub(&f).unwrap().max_abs() < 1e-13);
        // Nyquist content survives refinement as a real cosine.
        let nyq = GridField::from_fn(grid1(8), |x| (4.0 * x[0]).cos()).unwrap();
        let up = resample(&nyq, 16).unwrap();
        let exact = GridField::from_fn(grid1(16), |x| (4.0 * x[0]).cos()).unwrap();
        assert!(up.sub(&exact).unwrap().max_abs() < 1e-13);
        assert!((nyq.l2_norm().powi(2) - 2.0 * PI).abs() < 1e-12);
    }
}
