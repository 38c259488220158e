//! Sobolev and `C^k` norms on the flat torus with `p = q = 2`, plus the
//! bounded-ratio probes for the interpolation, product and composition
//! inequalities.
//!
//! On the flat torus the covariant derivative `∇^j u` is the tensor of all
//! `j`-th partials and `|∇^j u|^2` is the sum of their squares. Summing over
//! ordered index tuples is the same as summing over multi-indices `α` with
//! weight `j!/α!`.

use crate::error::{Error, Result};
use crate::grid::{GridField, SpaceTimeField, TorusGrid};
use crate::spectral::{self, forward_transform, inverse_transform};
use crate::time::time_derivative;

/// All multi-indices of total order `order` in `dim` variables together
/// with their multinomial weight `order!/α!`.
pub fn multi_indices(dim: usize, order: usize) -> Vec<(Vec<usize>, f64)> {
    fn rec(dim: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == dim - 1 {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for p in (0..=left).rev() {
            cur.push(p);
            rec(dim, left - p, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(dim, order, &mut Vec::with_capacity(dim), &mut out);
    let fact = |n: usize| (1..=n).map(|v| v as f64).product::<f64>();
    out.into_iter()
        .map(|a| {
            let w = fact(order) / a.iter().map(|&p| fact(p)).product::<f64>();
            (a, w)
        })
        .collect()
}

/// Pointwise `|∇^j f|^2`.
pub fn tensor_norm_sq(f: &GridField, order: usize) -> Result<GridField> {
    let grid = *f.grid();
    check_order(&grid, order)?;
    if order == 0 {
        return f.map(|v| v * v);
    }
    let spec = forward_transform(f);
    let half = grid.points_per_axis() as i64 / 2;
    let mut acc = vec![0.0; grid.len()];
    for (alpha, weight) in multi_indices(grid.dim(), order) {
        let d = inverse_transform(&spec.apply(|k| {
            let mut m = rustfft::num_complex::Complex64::new(1.0, 0.0);
            for (a, &p) in alpha.iter().enumerate() {
                if p % 2 == 1 && k[a] == -half {
                    return Default::default();
                }
                m *= rustfft::num_complex::Complex64::new(0.0, k[a] as f64).powu(p as u32);
            }
            m
        }));
        for (o, v) in acc.iter_mut().zip(d.samples()) {
            *o += weight * v * v;
        }
    }
    GridField::new(grid, acc)
}

fn check_order(grid: &TorusGrid, order: usize) -> Result<()> {
    if order > grid.max_order() {
        return Err(Error::OrderTooHigh {
            order,
            max: grid.max_order(),
        });
    }
    Ok(())
}

/// `‖∇^j f‖²_{L²}` through the spectral multiplier `|k|^{2j}`.
pub fn seminorm_sq(f: &GridField, order: usize) -> Result<f64> {
    let grid = *f.grid();
    check_order(&grid, order)?;
    let spec = forward_transform(f);
    Ok(weighted_energy(&spec, |k2| k2.powi(order as i32)))
}

fn weighted_energy(spec: &spectral::SpectralField, w: impl Fn(f64) -> f64) -> f64 {
    let grid = spec.grid();
    let sum: f64 = spec
        .coeffs()
        .iter()
        .enumerate()
        .map(|(flat, c)| {
            let k2: f64 = grid.wavevector(flat).iter().map(|&v| (v * v) as f64).sum();
            w(k2) * c.norm_sqr()
        })
        .sum();
    grid.volume() * sum
}

pub fn sobolev_norm_sq(f: &GridField, s: usize) -> Result<f64> {
    check_order(f.grid(), s)?;
    let spec = forward_transform(f);
    Ok(weighted_energy(&spec, |k2| {
        (0..=s).map(|j| k2.powi(j as i32)).sum()
    }))
}

/// `‖f‖_{H^s} = (Σ_{j≤s} ‖∇^j f‖²_{L²})^{1/2}`.
pub fn sobolev_norm(f: &GridField, s: usize) -> Result<f64> {
    sobolev_norm_sq(f, s).map(f64::sqrt)
}

/// `‖u‖_{W^{i,∞}(I, H^s)}`: the largest `‖∂_t^k u(t)‖_{H^s}` over time
/// nodes and `k ≤ i`.
pub fn sobolev_norm_spacetime(u: &SpaceTimeField, i: usize, s: usize) -> Result<f64> {
    check_order(u.grid(), s)?;
    let mut best: f64 = 0.0;
    for k in 0..=i {
        let dk;
        let field = if k == 0 {
            u
        } else {
            dk = time_derivative(u, k)?;
            &dk
        };
        for node in field.nodes() {
            best = best.max(sobolev_norm(node, s)?);
        }
    }
    Ok(best)
}

/// Sup over time nodes of `‖u(t)‖_{H^s}`.
pub fn sup_sobolev(u: &SpaceTimeField, s: usize) -> Result<f64> {
    sobolev_norm_spacetime(u, 0, s)
}

/// Refinement factor used when locating maxima between grid points.
fn oversampling(grid: &TorusGrid) -> usize {
    let mut factor = 8usize;
    while factor > 1 && (grid.len() as f64) * (factor as f64).powi(grid.dim() as i32) > 4.0e6 {
        factor /= 2;
    }
    factor
}

/// `‖f‖_{C^k} = (Σ_{j≤k} max|∇^j f|²)^{1/2}`; the maxima are taken on a
/// trigonometrically refined grid.
pub fn ck_norm(f: &GridField, k: usize) -> Result<f64> {
    check_order(f.grid(), k)?;
    let fine_n = f.grid().points_per_axis() * oversampling(f.grid());
    let fine = spectral::resample(f, fine_n)?;
    let mut total = 0.0;
    for j in 0..=k {
        total += tensor_norm_sq(&fine, j)?.samples().iter().cloned().fold(0.0, f64::max);
    }
    Ok(total.sqrt())
}

/// Sup norm located on the refined grid.
pub fn c0_norm(f: &GridField) -> Result<f64> {
    ck_norm(f, 0)
}

/// `(∫ |∇^j f|^p)^{1/p}` by the rectangle rule; `p = ∞` gives the grid maximum.
pub fn lp_seminorm(f: &GridField, order: usize, p: f64) -> Result<f64> {
    let t = tensor_norm_sq(f, order)?;
    if p.is_infinite() {
        return Ok(t.samples().iter().cloned().fold(0.0, f64::max).sqrt());
    }
    let cell = f.grid().cell_volume();
    let s: f64 = t.samples().iter().map(|v| v.sqrt().powf(p)).sum::<f64>() * cell;
    Ok(s.powf(1.0 / p))
}

/// `‖f‖_{W^{s,p}} = (Σ_{j≤s} ‖∇^j f‖^p_{L^p})^{1/p}`.
pub fn wsp_norm(f: &GridField, s: usize, p: f64) -> Result<f64> {
    if p.is_infinite() {
        let mut acc: f64 = 0.0;
        for j in 0..=s {
            acc = acc.max(lp_seminorm(f, j, p)?);
        }
        return Ok(acc);
    }
    let mut acc = 0.0;
    for j in 0..=s {
        acc += lp_seminorm(f, j, p)?.powf(p);
    }
    Ok(acc.powf(1.0 / p))
}

/// Exponent setting for the interpolation inequality
/// `‖∇^j u‖_{L^p} ≤ C ‖u‖^a_{W^{n,r}} ‖u‖^{1-a}_{L^q}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InterpolationExponents {
    pub j: usize,
    pub n: usize,
    pub r: f64,
    pub q: f64,
    pub a: f64,
    pub dim: usize,
}

impl InterpolationExponents {
    /// `p` from `1/p - j/m = a(1/r - n/m) + (1-a)/q`.
    pub fn p(&self) -> Result<f64> {
        let m = self.dim as f64;
        let lower = self.j as f64 / self.n as f64;
        if self.j >= self.n || self.a < lower || self.a > 1.0 {
            return Err(Error::param("a", format!("need j/n ≤ a ≤ 1, got {}", self.a)));
        }
        let inv_p = self.j as f64 / m
            + self.a * (1.0 / self.r - self.n as f64 / m)
            + (1.0 - self.a) / self.q;
        if inv_p < 0.0 {
            return Err(Error::param("p", "exponent relation gives 1/p < 0"));
        }
        Ok(if inv_p == 0.0 { f64::INFINITY } else { 1.0 / inv_p })
    }
}

/// LHS/RHS of the interpolation inequality for one field (0 for `u ≡ 0`).
pub fn interpolation_ratio(u: &GridField, e: &InterpolationExponents) -> Result<f64> {
    let p = e.p()?;
    let lhs = lp_seminorm(u, e.j, p)?;
    let rhs = wsp_norm(u, e.n, e.r)?.powf(e.a) * wsp_norm(u, 0, e.q)?.powf(1.0 - e.a);
    Ok(if rhs > 0.0 { lhs / rhs } else { 0.0 })
}

/// LHS/RHS of `‖∇^s(fg)‖_{L²} ≤ C(‖f‖_{L^∞}‖g‖_{H^s} + ‖f‖_{H^s}‖g‖_{L^∞})`.
pub fn product_ratio(f: &GridField, g: &GridField, s: usize) -> Result<f64> {
    let fg = f.mul(g)?;
    let lhs = lp_seminorm(&fg, s, 2.0)?;
    let rhs = c0_norm(f)? * sobolev_norm(g, s)? + sobolev_norm(f, s)? * c0_norm(g)?;
    Ok(if rhs > 0.0 { lhs / rhs } else { 0.0 })
}

/// LHS/RHS of `‖F(w)‖_{H^s} ≤ C ‖F‖_{C^s([-ν,ν])} (1 + ‖w‖^s_{C^0}) ‖w‖_{H^s}`
/// for `F(w) = e^w - 1`, `ν = ‖w‖_{C^0}`.
pub fn composition_ratio(w: &GridField, s: usize) -> Result<f64> {
    let fw = w.map(f64::exp_m1)?;
    let nu = c0_norm(w)?;
    let f_cs = (nu.exp_m1().powi(2) + s as f64 * (2.0 * nu).exp()).sqrt();
    let lhs = sobolev_norm(&fw, s)?;
    let rhs = f_cs * (1.0 + nu.powi(s as i32)) * sobolev_norm(w, s)?;
    Ok(if rhs > 0.0 { lhs / rhs } else { 0.0 })
}
