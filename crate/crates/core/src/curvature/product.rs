use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::fft;
use crate::time::{d1, d2};

use super::MAX_DIM;

/// One coordinate direction of a product grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Axis {
    pub points: usize,
    pub length: f64,
    pub periodic: bool,
}

impl Axis {
    pub fn periodic(points: usize) -> Self {
        Self {
            points,
            length: 2.0 * std::f64::consts::PI,
            periodic: true,
        }
    }

    /// Closed interval `[0, length]` including both end points.
    pub fn interval(points: usize, length: f64) -> Self {
        Self {
            points,
            length,
            periodic: false,
        }
    }

    pub fn spacing(&self) -> f64 {
        if self.periodic {
            self.length / self.points as f64
        } else {
            self.length / (self.points - 1) as f64
        }
    }

    pub fn coord(&self, j: usize) -> f64 {
        j as f64 * self.spacing()
    }
}

/// Uniform grid on `Tᵐ × Tⁿ` or `Tᵐ × [0,T]`. The first `m` axes are the
/// base, the remaining `n` the fiber. Samples are row-major with axis 0
/// slowest.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductGrid {
    m: usize,
    n: usize,
    axes: Vec<Axis>,
    strides: Vec<usize>,
    len: usize,
}

impl ProductGrid {
    pub fn new(m: usize, n: usize, axes: Vec<Axis>) -> Result<Self> {
        if m == 0 || axes.len() != m + n {
            return Err(Error::InvalidGrid(format!(
                "need m ≥ 1 and m + n = {} axes, got m = {m}, n = {n}",
                axes.len()
            )));
        }
        if m + n > MAX_DIM {
            return Err(Error::InvalidGrid(format!(
                "total dimension {} exceeds {MAX_DIM}",
                m + n
            )));
        }
        for (i, a) in axes.iter().enumerate() {
            if a.points < 4 || !(a.length > 0.0 && a.length.is_finite()) {
                return Err(Error::InvalidGrid(format!(
                    "axis {i} needs at least 4 points and a positive length"
                )));
            }
        }
        let mut strides = vec![1; axes.len()];
        for i in (0..axes.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * axes[i + 1].points;
        }
        let len = axes.iter().map(|a| a.points).product();
        Ok(Self {
            m,
            n,
            axes,
            strides,
            len,
        })
    }

    /// `N` points on every base axis and the fiber: `[0, t_end]` for
    /// `n = 1`, periodic circles for `n ≥ 2`.
    pub fn uniform(m: usize, n: usize, points: usize, t_end: f64) -> Result<Self> {
        let fiber: Vec<usize> = vec![points; n];
        Self::product(m, n, &vec![points; m], &fiber, t_end)
    }

    pub fn product(
        m: usize,
        n: usize,
        base_points: &[usize],
        fiber_points: &[usize],
        t_end: f64,
    ) -> Result<Self> {
        if base_points.len() != m || fiber_points.len() != n {
            return Err(Error::InvalidGrid("point counts do not match m and n".into()));
        }
        let mut axes: Vec<Axis> = base_points.iter().map(|&p| Axis::periodic(p)).collect();
        for &p in fiber_points {
            axes.push(if n == 1 {
                Axis::interval(p, t_end)
            } else {
                Axis::periodic(p)
            });
        }
        Self::new(m, n, axes)
    }

    /// Flat torus `Tᵈ` with no fiber.
    pub fn torus(dim: usize, points: usize) -> Result<Self> {
        Self::new(dim, 0, vec![Axis::periodic(points); dim])
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.m + self.n
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.points).collect()
    }

    pub fn index_on_axis(&self, p: usize, axis: usize) -> usize {
        (p / self.strides[axis]) % self.axes[axis].points
    }

    pub fn coords(&self, p: usize) -> Vec<f64> {
        (0..self.dim())
            .map(|a| self.axes[a].coord(self.index_on_axis(p, a)))
            .collect()
    }

    /// Point `delta` steps along `axis`; wraps on periodic axes, `None`
    /// past an interval end.
    pub fn shift(&self, p: usize, axis: usize, delta: isize) -> Option<usize> {
        let ax = &self.axes[axis];
        let j = self.index_on_axis(p, axis) as isize;
        let k = j + delta;
        let k = if ax.periodic {
            k.rem_euclid(ax.points as isize)
        } else if k < 0 || k >= ax.points as isize {
            return None;
        } else {
            k
        };
        Some((p as isize + (k - j) * self.strides[axis] as isize) as usize)
    }

    /// True when the point is at least `margin` nodes away from every
    /// interval end.
    pub fn is_interior(&self, p: usize, margin: usize) -> bool {
        self.axes.iter().enumerate().all(|(a, ax)| {
            if ax.periodic {
                return true;
            }
            let j = self.index_on_axis(p, a);
            j >= margin && j + margin < ax.points
        })
    }

    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        (0..self.len).map(|p| f(&self.coords(p))).collect()
    }

    pub fn sample_expr(&self, e: &Expr) -> Vec<f64> {
        let m = self.m;
        self.sample(|c| e.eval(&c[..m], &c[m..]))
    }

    /// Points and weights of the second-order first-derivative stencil along
    /// `axis` at `p`: central, or one-sided three-point at interval ends.
    pub(crate) fn stencil1(&self, p: usize, axis: usize) -> [(usize, f64); 3] {
        let w = 1.0 / (2.0 * self.axes[axis].spacing());
        match (self.shift(p, axis, -1), self.shift(p, axis, 1)) {
            (Some(l), Some(r)) => [(l, -w), (r, w), (p, 0.0)],
            (None, Some(r)) => {
                let rr = self.shift(p, axis, 2).expect("axis has at least 4 points");
                [(p, -3.0 * w), (r, 4.0 * w), (rr, -w)]
            }
            (Some(l), None) => {
                let ll = self.shift(p, axis, -2).expect("axis has at least 4 points");
                [(p, 3.0 * w), (l, -4.0 * w), (ll, w)]
            }
            (None, None) => unreachable!("axis has at least 4 points"),
        }
    }

    pub(crate) fn fd1(&self, p: usize, axis: usize, f: impl Fn(usize) -> f64) -> f64 {
        self.stencil1(p, axis)
            .iter()
            .filter(|(_, w)| *w != 0.0)
            .map(|&(q, w)| w * f(q))
            .sum()
    }

    /// Second-order `∂_a ∂_b f` at `p`: the three-point second difference
    /// (four-point one-sided at interval ends) when `a = b`, nested first
    /// differences otherwise.
    pub(crate) fn fd2(&self, p: usize, a: usize, b: usize, f: impl Fn(usize) -> f64) -> f64 {
        if a != b {
            return self
                .stencil1(p, a)
                .iter()
                .filter(|(_, w)| *w != 0.0)
                .map(|&(q, w)| w * self.fd1(q, b, &f))
                .sum();
        }
        let h2 = self.axes[a].spacing().powi(2);
        let at = |k: isize| self.shift(p, a, k);
        match (at(-1), at(1)) {
            (Some(l), Some(r)) => (f(l) - 2.0 * f(p) + f(r)) / h2,
            (None, Some(r)) => {
                let (r2, r3) = (at(2).unwrap(), at(3).unwrap());
                (2.0 * f(p) - 5.0 * f(r) + 4.0 * f(r2) - f(r3)) / h2
            }
            (Some(l), None) => {
                let (l2, l3) = (at(-2).unwrap(), at(-3).unwrap());
                (2.0 * f(p) - 5.0 * f(l) + 4.0 * f(l2) - f(l3)) / h2
            }
            (None, None) => unreachable!("axis has at least 4 points"),
        }
    }

    /// Derivative of a whole sample array along one axis: spectral on
    /// periodic axes, second-order stencils on an interval.
    pub fn axis_derivative(&self, samples: &[f64], axis: usize, order: usize) -> Result<Vec<f64>> {
        if samples.len() != self.len {
            return Err(Error::GridMismatch(format!(
                "{} samples on a grid of {} points",
                samples.len(),
                self.len
            )));
        }
        let ax = self.axes[axis];
        if ax.periodic {
            return Ok(fft::spectral_axis_derivative(
                samples,
                &self.shape(),
                axis,
                order,
                ax.length,
            ));
        }
        if order > 2 {
            return Err(Error::OrderTooHigh { order, max: 2 });
        }
        if order == 0 {
            return Ok(samples.to_vec());
        }
        let h = ax.spacing();
        let stride = self.strides[axis];
        let np = ax.points;
        let mut out = vec![0.0; self.len];
        let mut line = vec![0.0; np];
        let mut d = vec![0.0; np];
        for p in 0..self.len {
            if self.index_on_axis(p, axis) != 0 {
                continue;
            }
            for (j, v) in line.iter_mut().enumerate() {
                *v = samples[p + j * stride];
            }
            if order == 1 {
                d1(&line, h, &mut d);
            } else {
                d2(&line, h, &mut d);
            }
            for (j, v) in d.iter().enumerate() {
                out[p + j * stride] = *v;
            }
        }
        Ok(out)
    }
}

/// Real samples on a [`ProductGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct ProductField {
    pub grid: ProductGrid,
    pub samples: Vec<f64>,
}

impl ProductField {
    /// `max |self − other|` over points at least `margin` nodes from any
    /// interval end.
    pub fn max_diff(&self, other: &ProductField, margin: usize) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("product fields on different grids".into()));
        }
        Ok((0..self.grid.len())
            .filter(|&p| self.grid.is_interior(p, margin))
            .map(|p| (self.samples[p] - other.samples[p]).abs())
            .fold(0.0, f64::max))
    }

    pub fn max_abs(&self, margin: usize) -> f64 {
        (0..self.grid.len())
            .filter(|&p| self.grid.is_interior(p, margin))
            .map(|p| self.samples[p].abs())
            .fold(0.0, f64::max)
    }
}

/// The base metric `g` on `Tᵐ`.
#[derive(Clone, Debug, PartialEq)]
pub enum BaseMetric {
    Flat,
    /// `g = e^{2φ} δ`, with `φ` sampled on the product grid (it must not
    /// depend on the fiber coordinates).
    Conformal { phi: Vec<f64> },
    /// Arbitrary samples, packed upper triangles of m×m matrices per point.
    /// Only the finite-difference path accepts these.
    Sampled { packed: Vec<f64> },
}

/// `(Tᵐ, g) × (N, h)` on a grid, with `h` the flat metric of the fiber.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductManifoldSpec {
    grid: ProductGrid,
    base: BaseMetric,
}

pub(crate) fn packed_len(d: usize) -> usize {
    d * (d + 1) / 2
}

pub(crate) fn packed_index(d: usize, a: usize, b: usize) -> usize {
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    a * d - a * a.saturating_sub(1) / 2 + (b - a)
}

impl ProductManifoldSpec {
    pub fn flat(grid: ProductGrid) -> Self {
        Self {
            grid,
            base: BaseMetric::Flat,
        }
    }

    pub fn new(grid: ProductGrid, base: BaseMetric) -> Result<Self> {
        let m = grid.m();
        match &base {
            BaseMetric::Flat => {}
            BaseMetric::Conformal { phi } => {
                if phi.len() != grid.len() {
                    return Err(Error::GridMismatch("conformal factor has wrong length".into()));
                }
                crate::grid::check_finite(phi)?;
            }
            BaseMetric::Sampled { packed } => {
                if packed.len() != grid.len() * packed_len(m) {
                    return Err(Error::GridMismatch("sampled g has wrong length".into()));
                }
                crate::grid::check_finite(packed)?;
                let pl = packed_len(m);
                for p in 0..grid.len() {
                    let mat = nalgebra::DMatrix::from_fn(m, m, |a, b| {
                        packed[p * pl + packed_index(m, a, b)]
                    });
                    let min = mat.symmetric_eigenvalues().min();
                    if !(min > 1e-10) {
                        return Err(Error::NotPositiveDefinite {
                            point: p,
                            min_eigenvalue: min,
                        });
                    }
                }
            }
        }
        Ok(Self { grid, base })
    }

    pub fn grid(&self) -> &ProductGrid {
        &self.grid
    }

    pub fn base(&self) -> &BaseMetric {
        &self.base
    }

    pub fn m(&self) -> usize {
        self.grid.m()
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    pub fn is_flat(&self) -> bool {
        self.base == BaseMetric::Flat
    }

    /// `g_ab` at point `p`.
    pub fn g(&self, p: usize, a: usize, b: usize) -> f64 {
        match &self.base {
            BaseMetric::Flat => f64::from(u8::from(a == b)),
            BaseMetric::Conformal { phi } => {
                if a == b {
                    (2.0 * phi[p]).exp()
                } else {
                    0.0
                }
            }
            BaseMetric::Sampled { packed } => {
                let m = self.m();
                packed[p * packed_len(m) + packed_index(m, a, b)]
            }
        }
    }
}

/// The deformation `u` on the product grid. When built from an expression
/// its derivatives are available exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct DeformationField {
    samples: Vec<f64>,
    expr: Option<Expr>,
}

impl DeformationField {
    pub fn from_samples(grid: &ProductGrid, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} samples on a grid of {} points",
                samples.len(),
                grid.len()
            )));
        }
        crate::grid::check_finite(&samples)?;
        Ok(Self {
            samples,
            expr: None,
        })
    }

    pub fn from_expr(grid: &ProductGrid, expr: Expr) -> Result<Self> {
        let samples = grid.sample_expr(&expr);
        crate::grid::check_finite(&samples)?;
        Ok(Self {
            samples,
            expr: Some(expr),
        })
    }

    pub fn zero(grid: &ProductGrid) -> Self {
        Self {
            samples: vec![0.0; grid.len()],
            expr: Some(Expr::zero()),
        }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn expr(&self) -> Option<&Expr> {
        self.expr.as_ref()
    }

    /// `ρ = e^{2u}` at point `p`.
    pub fn rho(&self, p: usize) -> f64 {
        (2.0 * self.samples[p]).exp()
    }

    /// `∂_A u` at point `p`: exact for expression-backed fields, second-order
    /// differences otherwise.
    pub fn gradient_at(&self, grid: &ProductGrid, p: usize) -> Vec<f64> {
        match &self.expr {
            Some(e) => {
                let c = grid.coords(p);
                let (x, y) = c.split_at(grid.m());
                (0..grid.dim())
                    .map(|a| {
                        let var = if a < grid.m() {
                            crate::expr::Var::Space(a)
                        } else {
                            crate::expr::Var::Fiber(a - grid.m())
                        };
                        e.derivative(var).eval(x, y)
                    })
                    .collect()
            }
            None => (0..grid.dim())
                .map(|a| grid.fd1(p, a, |q| self.samples[q]))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packed_indices_are_a_bijection() {
        for d in 1..=MAX_DIM {
            let mut seen = vec![false; packed_len(d)];
            for a in 0..d {
                for b in a..d {
                    let i = packed_index(d, a, b);
                    assert_eq!(i, packed_index(d, b, a));
                    assert!(!seen[i], "d = {d}, ({a},{b}) collides");
                    seen[i] = true;
                }
            }
            assert!(seen.iter().all(|&s| s));
        }
    }

    #[test]
    fn shifts_wrap_or_stop() {
        let g = ProductGrid::uniform(1, 1, 8, 1.0).unwrap();
        assert_eq!(g.len(), 64);
        let p = 0;
        assert_eq!(g.shift(p, 0, -1), Some(7 * 8));
        assert_eq!(g.shift(p, 1, -1), None);
        assert_eq!(g.shift(p, 1, 1), Some(1));
        assert!(!g.is_interior(p, 1));
        assert!(g.is_interior(2, 2));
        assert!((g.coords(7)[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn axis_derivatives() {
        let g = ProductGrid::uniform(1, 1, 32, 1.0).unwrap();
        let u = g.sample(|c| c[0].sin() * c[1] * c[1]);
        let ux = g.axis_derivative(&u, 0, 1).unwrap();
        let utt = g.axis_derivative(&u, 1, 2).unwrap();
        for p in 0..g.len() {
            let c = g.coords(p);
            assert!((ux[p] - c[0].cos() * c[1] * c[1]).abs() < 1e-12);
            assert!((utt[p] - 2.0 * c[0].sin()).abs() < 1e-9);
        }
    }
}
