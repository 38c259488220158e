//! Seeded random band-limited fields for property sweeps and Picard seeds.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{GridField, TorusGrid};
use crate::spectral::{inverse_transform, SpectralField};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Real trigonometric polynomial with modes `|k|_∞ ≤ band`, coefficient
/// magnitudes drawn uniformly and damped by `(1 + |k|²)^{-decay/2}`, then
/// scaled so the maximum is `amplitude`.
pub fn band_limited<R: Rng>(
    grid: TorusGrid,
    band: usize,
    decay: f64,
    amplitude: f64,
    rng: &mut R,
) -> Result<GridField> {
    if 2 * band >= grid.points_per_axis() {
        return Err(Error::param(
            "band",
            format!("{band} is not below N/2 = {}", grid.points_per_axis() / 2),
        ));
    }
    let band = band as i64;
    let mut raw = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (flat, c) in raw.iter_mut().enumerate() {
        let k = grid.wavevector(flat);
        if k.iter().all(|v| v.abs() <= band) {
            let k2: i64 = k.iter().map(|v| v * v).sum();
            let damp = (1.0 + k2 as f64).powf(-decay / 2.0);
            *c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * damp;
        }
    }
    let mut coeffs = raw.clone();
    for (flat, c) in coeffs.iter_mut().enumerate() {
        let neg: Vec<i64> = grid.wavevector(flat).iter().map(|v| -v).collect();
        let mirror = grid.bin_of(&neg).map(|b| raw[b]).unwrap_or_default();
        *c = 0.5 * (raw[flat] + mirror.conj());
    }
    let f = inverse_transform(&SpectralField::from_coeffs(grid, coeffs));
    let peak = f.max_abs();
    if peak == 0.0 {
        return Ok(f);
    }
    f.scale(amplitude / peak)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::forward_transform;

    #[test]
    fn deterministic_and_band_limited() {
        let grid = TorusGrid::new(2, 16).unwrap();
        let a = band_limited(grid, 3, 1.0, 0.5, &mut rng(7)).unwrap();
        let b = band_limited(grid, 3, 1.0, 0.5, &mut rng(7)).unwrap();
        assert_eq!(a, b);
        assert!((a.max_abs() - 0.5).abs() < 1e-14);
        let spec = forward_transform(&a);
        for (flat, c) in spec.coeffs().iter().enumerate() {
            if grid.wavevector(flat).iter().any(|v| v.abs() > 3) {
                assert!(c.norm() < 1e-14);
            }
        }
        assert!(band_limited(grid, 8, 1.0, 1.0, &mut rng(0)).is_err());
    }
}
