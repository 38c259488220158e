use nalgebra::DMatrix;

use crate::error::{Error, Result};

use super::product::{packed_index, packed_len, DeformationField, ProductGrid, ProductManifoldSpec};

/// A symmetric positive-definite tensor field on a [`ProductGrid`], stored
/// as packed upper triangles together with its inverse and determinant.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricField {
    grid: ProductGrid,
    dim: usize,
    packed: Vec<f64>,
    inverse: Vec<f64>,
    det: Vec<f64>,
}

impl MetricField {
    pub fn from_packed(grid: ProductGrid, packed: Vec<f64>) -> Result<Self> {
        let dim = grid.dim();
        let pl = packed_len(dim);
        if packed.len() != grid.len() * pl {
            return Err(Error::GridMismatch(format!(
                "{} packed values for {} points of a rank-{dim} metric",
                packed.len(),
                grid.len()
            )));
        }
        crate::grid::check_finite(&packed)?;
        let mut inverse = vec![0.0; packed.len()];
        let mut det = vec![0.0; grid.len()];
        for p in 0..grid.len() {
            let k = &packed[p * pl..(p + 1) * pl];
            let mat = DMatrix::from_fn(dim, dim, |a, b| k[packed_index(dim, a, b)]);
            let Some(chol) = mat.clone().cholesky() else {
                let min_eigenvalue = mat.symmetric_eigenvalues().min();
                return Err(Error::NotPositiveDefinite {
                    point: p,
                    min_eigenvalue,
                });
            };
            let d = chol.determinant();
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::SingularMetric { point: p });
            }
            let inv = chol.inverse();
            for a in 0..dim {
                for b in a..dim {
                    inverse[p * pl + packed_index(dim, a, b)] = inv[(a, b)];
                }
            }
            det[p] = d;
        }
        Ok(Self {
            grid,
            dim,
            packed,
            inverse,
            det,
        })
    }

    /// Samples `f(coords, out)` with `out` the packed upper triangle.
    pub fn from_fn(grid: ProductGrid, f: impl Fn(&[f64], &mut [f64])) -> Result<Self> {
        let pl = packed_len(grid.dim());
        let mut packed = vec![0.0; grid.len() * pl];
        for p in 0..grid.len() {
            f(&grid.coords(p), &mut packed[p * pl..(p + 1) * pl]);
        }
        Self::from_packed(grid, packed)
    }

    /// `e^{2φ} δ` on a torus grid.
    pub fn conformally_flat(grid: ProductGrid, phi: &[f64]) -> Result<Self> {
        if phi.len() != grid.len() {
            return Err(Error::GridMismatch("conformal factor has wrong length".into()));
        }
        let dim = grid.dim();
        let pl = packed_len(dim);
        let mut packed = vec![0.0; grid.len() * pl];
        for (p, f) in phi.iter().enumerate() {
            for a in 0..dim {
                packed[p * pl + packed_index(dim, a, a)] = (2.0 * f).exp();
            }
        }
        Self::from_packed(grid, packed)
    }

    pub fn grid(&self) -> &ProductGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn component(&self, p: usize, a: usize, b: usize) -> f64 {
        self.packed[p * packed_len(self.dim) + packed_index(self.dim, a, b)]
    }

    #[inline]
    pub fn inverse_component(&self, p: usize, a: usize, b: usize) -> f64 {
        self.inverse[p * packed_len(self.dim) + packed_index(self.dim, a, b)]
    }

    pub fn det(&self, p: usize) -> f64 {
        self.det[p]
    }

    /// `max_p max_{ab} |(K K⁻¹)_ab − δ_ab|`.
    pub fn identity_defect(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for p in 0..self.grid.len() {
            for a in 0..d {
                for b in 0..d {
                    let s: f64 = (0..d)
                        .map(|c| self.component(p, a, c) * self.inverse_component(p, c, b))
                        .sum();
                    worst = worst.max((s - f64::from(u8::from(a == b))).abs());
                }
            }
        }
        worst
    }
}

/// `K = ρⁿ g ⊕ ρ⁻ᵐ h` with `ρ = e^{2u}`.
#[derive(Clone, Debug, PartialEq)]
pub struct DeformedMetric {
    metric: MetricField,
    m: usize,
    n: usize,
}

impl DeformedMetric {
    pub fn metric(&self) -> &MetricField {
        &self.metric
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Largest `|K_iα|` over all points.
    pub fn off_block_max(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for p in 0..self.metric.grid.len() {
            for i in 0..self.m {
                for a in self.m..self.m + self.n {
                    worst = worst.max(self.metric.component(p, i, a).abs());
                }
            }
        }
        worst
    }
}

/// Relative tolerance for `det K = det g · det h`.
pub const VOLUME_TOLERANCE: f64 = 1e-10;

pub fn assemble_deformed_metric(
    spec: &ProductManifoldSpec,
    u: &DeformationField,
) -> Result<DeformedMetric> {
    let grid = spec.grid().clone();
    if u.samples().len() != grid.len() {
        return Err(Error::GridMismatch(
            "deformation is not sampled on the product grid".into(),
        ));
    }
    let (m, n) = (spec.m(), spec.n());
    let dim = m + n;
    let pl = packed_len(dim);
    let mut packed = vec![0.0; grid.len() * pl];
    let mut det_g = vec![0.0; grid.len()];
    for p in 0..grid.len() {
        let rho = u.rho(p);
        let rn = rho.powi(n as i32);
        let rm = rho.powi(-(m as i32));
        let k = &mut packed[p * pl..(p + 1) * pl];
        for i in 0..m {
            for j in i..m {
                k[packed_index(dim, i, j)] = rn * spec.g(p, i, j);
            }
        }
        for a in m..dim {
            k[packed_index(dim, a, a)] = rm;
        }
        let g = DMatrix::from_fn(m, m, |i, j| spec.g(p, i, j));
        det_g[p] = g.determinant();
    }
    let metric = MetricField::from_packed(grid, packed)?;
    for (p, &dg) in det_g.iter().enumerate() {
        let dk = metric.det(p);
        if (dk - dg).abs() > VOLUME_TOLERANCE * dg.abs() {
            return Err(Error::VolumeNotPreserved {
                point: p,
                det_k: dk,
                det_gh: dg,
            });
        }
    }
    Ok(DeformedMetric { metric, m, n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;

    #[test]
    fn zero_deformation_is_the_product_metric() {
        let grid = ProductGrid::uniform(2, 1, 8, 1.0).unwrap();
        let spec = ProductManifoldSpec::flat(grid.clone());
        let k = assemble_deformed_metric(&spec, &DeformationField::zero(&grid)).unwrap();
        for p in 0..grid.len() {
            for a in 0..3 {
                for b in 0..3 {
                    let expect = f64::from(u8::from(a == b));
                    assert_eq!(k.metric().component(p, a, b), expect);
                }
            }
        }
    }

    #[test]
    fn constant_deformation_scales_blocks() {
        let grid = ProductGrid::uniform(2, 2, 4, 1.0).unwrap();
        let spec = ProductManifoldSpec::flat(grid.clone());
        let c = 0.4;
        let u = DeformationField::from_samples(&grid, vec![c; grid.len()]).unwrap();
        let k = assemble_deformed_metric(&spec, &u).unwrap();
        let p = 5;
        assert!((k.metric().component(p, 0, 0) - (4.0 * c).exp()).abs() < 1e-14);
        assert!((k.metric().component(p, 3, 3) - (-4.0 * c).exp()).abs() < 1e-14);
        assert!((k.metric().det(p) - 1.0).abs() < 1e-12);
        assert_eq!(k.off_block_max(), 0.0);
    }

    #[test]
    fn volume_is_preserved_pointwise() {
        let grid = ProductGrid::uniform(1, 1, 16, 1.0).unwrap();
        let spec = ProductManifoldSpec::flat(grid.clone());
        let u = DeformationField::from_expr(&grid, Expr::parse("0.3*sin(x)*cos(t)").unwrap())
            .unwrap();
        let k = assemble_deformed_metric(&spec, &u).unwrap();
        for p in 0..grid.len() {
            assert!((k.metric().det(p) - 1.0).abs() < 1e-12);
        }
        assert!(k.metric().identity_defect() < 1e-12);
    }

    #[test]
    fn indefinite_samples_are_rejected() {
        let grid = ProductGrid::torus(2, 4).unwrap();
        let mut packed = vec![0.0; grid.len() * 3];
        for p in 0..grid.len() {
            packed[p * 3] = 1.0;
            packed[p * 3 + 1] = 2.0;
            packed[p * 3 + 2] = 1.0;
        }
        assert!(matches!(
            MetricField::from_packed(grid, packed),
            Err(Error::NotPositiveDefinite { point: 0, .. })
        ));
    }
}
