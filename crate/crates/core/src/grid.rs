//! Uniform periodic grids on the flat torus `[0, 2π)^m` and the sampled
//! fields that live on them.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid with `n` points per axis on the `dim`-dimensional flat torus.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TorusGrid {
    dim: usize,
    n: usize,
}

impl TorusGrid {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidGrid("dimension must be positive".into()));
        }
        if n < 4 || n % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be even and at least 4, got {n}"
            )));
        }
        if (n as f64).powi(dim as i32) > 1e9 {
            return Err(Error::InvalidGrid(format!("{n}^{dim} points is too many")));
        }
        Ok(Self { dim, n })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Measure of the torus, `(2π)^m`.
    pub fn volume(&self) -> f64 {
        (2.0 * PI).powi(self.dim as i32)
    }

    /// Quadrature weight of a single grid point.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Highest derivative order the grid is considered to resolve.
    pub fn max_order(&self) -> usize {
        self.n / 2
    }

    pub fn shape(&self) -> Vec<usize> {
        vec![self.n; self.dim]
    }

    /// Row-major multi-index of a flat index (axis 0 slowest).
    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim];
        for a in (0..self.dim).rev() {
            idx[a] = flat % self.n;
            flat /= self.n;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &j| acc * self.n + j)
    }

    pub fn coords(&self, flat: usize) -> Vec<f64> {
        let h = self.spacing();
        self.multi_index(flat)
            .into_iter()
            .map(|j| j as f64 * h)
            .collect()
    }

    /// Signed wavenumber of FFT bin `j`, in `{-N/2, ..., N/2 - 1}`.
    pub fn wavenumber(&self, j: usize) -> i64 {
        let n = self.n as i64;
        let j = j as i64;
        if j < n / 2 {
            j
        } else {
            j - n
        }
    }

    pub fn wavevector(&self, flat: usize) -> Vec<i64> {
        self.multi_index(flat)
            .into_iter()
            .map(|j| self.wavenumber(j))
            .collect()
    }

    /// Flat FFT index of a wavevector, or `None` when outside the resolved band.
    pub fn bin_of(&self, k: &[i64]) -> Option<usize> {
        if k.len() != self.dim {
            return None;
        }
        let n = self.n as i64;
        let mut flat = 0usize;
        for &ka in k {
            if ka < -n / 2 || ka >= n / 2 {
                return None;
            }
            flat = flat * self.n + ka.rem_euclid(n) as usize;
        }
        Some(flat)
    }

    pub(crate) fn check_same(&self, other: &TorusGrid) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!(
                "{}^{} vs {}^{}",
                self.n, self.dim, other.n, other.dim
            )));
        }
        Ok(())
    }
}

pub(crate) fn check_finite(samples: &[f64]) -> Result<()> {
    match samples.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}

/// Real samples on a [`TorusGrid`], row-major over the axes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridField {
    grid: TorusGrid,
    samples: Vec<f64>,
}

impl GridField {
    pub fn new(grid: TorusGrid, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} samples, got {}",
                grid.len(),
                samples.len()
            )));
        }
        check_finite(&samples)?;
        Ok(Self { grid, samples })
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        Self {
            grid,
            samples: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: TorusGrid, value: f64) -> Result<Self> {
        Self::new(grid, vec![value; grid.len()])
    }

    pub fn from_fn(grid: TorusGrid, mut f: impl FnMut(&[f64]) -> f64) -> Result<Self> {
        let samples = (0..grid.len()).map(|i| f(&grid.coords(i))).collect();
        Self::new(grid, samples)
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid, self.samples.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_with(&self, other: &GridField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        let samples = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::new(self.grid, samples)
    }

    pub fn add(&self, other: &GridField) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &GridField) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &GridField) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> Result<Self> {
        self.map(|v| c * v)
    }

    /// Rectangle-rule integral over the torus.
    pub fn integral(&self) -> f64 {
        self.samples.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn inner(&self, other: &GridField) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        let s: f64 = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a * b)
            .sum();
        Ok(s * self.grid.cell_volume())
    }

    pub fn l2_norm(&self) -> f64 {
        (self.samples.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// A sequence of [`GridField`]s on strictly increasing time nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeField {
    grid: TorusGrid,
    times: Vec<f64>,
    nodes: Vec<GridField>,
}

impl SpaceTimeField {
    pub fn new(times: Vec<f64>, nodes: Vec<GridField>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::TooFewNodes {
                needed: 2,
                got: times.len(),
            });
        }
        if times.len() != nodes.len() {
            return Err(Error::InvalidTimeNodes(format!(
                "{} times for {} fields",
                times.len(),
                nodes.len()
            )));
        }
        check_finite(&times)?;
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidTimeNodes(
                "times must be strictly increasing".into(),
            ));
        }
        let grid = *nodes[0].grid();
        for node in &nodes {
            grid.check_same(node.grid())?;
        }
        Ok(Self { grid, times, nodes })
    }

    /// Uniform nodes `t_j = t_start + j·dt`, `j = 0..count`.
    pub fn uniform_times(t_start: f64, dt: f64, count: usize) -> Vec<f64> {
        (0..count).map(|j| t_start + j as f64 * dt).collect()
    }

    pub fn from_fn(
        grid: TorusGrid,
        times: Vec<f64>,
        f: impl Fn(&[f64], f64) -> f64,
    ) -> Result<Self> {
        let nodes = times
            .iter()
            .map(|&t| GridField::from_fn(grid, |x| f(x, t)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(times, nodes)
    }

    pub fn zeros(grid: TorusGrid, times: Vec<f64>) -> Result<Self> {
        let nodes = vec![GridField::zeros(grid); times.len()];
        Self::new(times, nodes)
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn nodes(&self) -> &[GridField] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &GridField {
        &self.nodes[i]
    }

    pub fn len_time(&self) -> usize {
        self.times.len()
    }

    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Common step when the nodes are uniform to 1e-9 relative.
    pub fn uniform_step(&self) -> Option<f64> {
        let dt = (self.t_end() - self.t_start()) / (self.times.len() - 1) as f64;
        let uniform = self
            .times
            .windows(2)
            .all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-9 * dt.abs().max(1e-300));
        uniform.then_some(dt)
    }

    pub fn map_nodes(&self, f: impl Fn(&GridField) -> Result<GridField>) -> Result<Self> {
        let nodes = self.nodes.iter().map(f).collect::<Result<Vec<_>>>()?;
        Self::new(self.times.clone(), nodes)
    }

    pub fn zip_nodes(
        &self,
        other: &SpaceTimeField,
        f: impl Fn(&GridField, &GridField) -> Result<GridField>,
    ) -> Result<Self> {
        self.check_compatible(other)?;
        let nodes = self
            .nodes
            .iter()
            .zip(&other.nodes)
            .map(|(a, b)| f(a, b))
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.times.clone(), nodes)
    }

    pub fn sub(&self, other: &SpaceTimeField) -> Result<Self> {
        self.zip_nodes(other, |a, b| a.sub(b))
    }

    pub fn check_compatible(&self, other: &SpaceTimeField) -> Result<()> {
        self.grid.check_same(&other.grid)?;
        let same_times = self.times.len() == other.times.len()
            && self
                .times
                .iter()
                .zip(&other.times)
                .all(|(a, b)| (a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        if !same_times {
            return Err(Error::GridMismatch("time nodes differ".into()));
        }
        Ok(())
    }

    /// Piecewise-linear interpolation in time; `t` is clamped to the node range.
    pub fn interpolate(&self, t: f64) -> GridField {
        let (i, w) = self.bracket(t);
        if w == 0.0 {
            return self.nodes[i].clone();
        }
        let a = self.nodes[i].samples();
        let b = self.nodes[i + 1].samples();
        let samples = a
            .iter()
            .zip(b)
            .map(|(x, y)| (1.0 - w) * x + w * y)
            .collect();
        GridField {
            grid: self.grid,
            samples,
        }
    }

    /// Node index `i` and weight `w` such that `t ≈ (1-w)·t_i + w·t_{i+1}`.
    pub(crate) fn bracket(&self, t: f64) -> (usize, f64) {
        bracket(&self.times, t)
    }

    /// Sub-field on the nodes `range`.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self> {
        Self::new(self.times[range.clone()].to_vec(), self.nodes[range].to_vec())
    }

    pub fn max_abs(&self) -> f64 {
        self.nodes.iter().fold(0.0, |m, f| m.max(f.max_abs()))
    }
}

/// Interval of increasing `times` containing `t`, clamped to the ends.
pub(crate) fn bracket(times: &[f64], t: f64) -> (usize, f64) {
    let n = times.len();
    if t <= times[0] {
        return (0, 0.0);
    }
    if t >= times[n - 1] {
        return (n - 1, 0.0);
    }
    let i = match times.partition_point(|&ti| ti <= t) {
        0 => 0,
        p => p - 1,
    };
    let w = (t - times[i]) / (times[i + 1] - times[i]);
    if w <= 1e-12 {
        (i, 0.0)
    } else if w >= 1.0 - 1e-12 {
        (i + 1, 0.0)
    } else {
        (i, w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_odd_or_tiny() {
        assert!(TorusGrid::new(1, 3).is_err());
        assert!(TorusGrid::new(1, 2).is_err());
        assert!(TorusGrid::new(0, 8).is_err());
        assert!(TorusGrid::new(2, 8).is_ok());
    }

    #[test]
    fn index_round_trip() {
        let g = TorusGrid::new(3, 6).unwrap();
        for flat in 0..g.len() {
            assert_eq!(g.flat_index(&g.multi_index(flat)), flat);
        }
        assert_eq!(g.wavenumber(2), 2);
        assert_eq!(g.wavenumber(3), -3);
        assert_eq!(g.bin_of(&[-3, 0, 2]), Some(g.flat_index(&[3, 0, 2])));
        assert_eq!(g.bin_of(&[3, 0, 0]), None);
    }

    #[test]
    fn non_finite_samples_rejected() {
        let g = TorusGrid::new(1, 4).unwrap();
        let err = GridField::new(g, vec![0.0, f64::NAN, 0.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { index: 1 }));
    }

    #[test]
    fn rectangle_rule_integrates_trig_exactly() {
        let g = TorusGrid::new(2, 16).unwrap();
        let f = GridField::from_fn(g, |x| (x[0] + 2.0 * x[1]).cos().powi(2)).unwrap();
        assert!((f.integral() - 2.0 * PI * PI).abs() < 1e-12);
    }

    #[test]
    fn space_time_interpolation() {
        let g = TorusGrid::new(1, 4).unwrap();
        let u = SpaceTimeField::from_fn(g, vec![0.0, 1.0, 2.0], |_, t| t * t).unwrap();
        assert_eq!(u.interpolate(0.5).samples()[0], 0.5);
        assert_eq!(u.interpolate(1.0).samples()[0], 1.0);
        assert_eq!(u.interpolate(5.0).samples()[0], 4.0);
        assert_eq!(u.uniform_step(), Some(1.0));
        assert!(SpaceTimeField::new(vec![0.0], vec![GridField::zeros(g)]).is_err());
        assert!(SpaceTimeField::new(
            vec![1.0, 0.0],
            vec![GridField::zeros(g), GridField::zeros(g)]
        )
        .is_err());
    }
}
