use crate::error::{Error, Result};

use super::metric::MetricField;
use super::product::{DeformationField, ProductGrid, ProductManifoldSpec};
use super::MAX_DIM;

/// `Γ[a][b][c] = Γ^a_{bc}`.
pub type Gamma = [[[f64; MAX_DIM]; MAX_DIM]; MAX_DIM];

pub(crate) const ZERO_GAMMA: Gamma = [[[0.0; MAX_DIM]; MAX_DIM]; MAX_DIM];

/// `Γ^A_{BC} = ½ K^{AD}(∂_B K_{DC} + ∂_C K_{DB} − ∂_D K_{BC})` at one point,
/// with second-order differences of `K`.
pub(crate) fn christoffel_at(metric: &MetricField, p: usize) -> Gamma {
    let grid = metric.grid();
    let d = metric.dim();
    // dk[c][a][b] = ∂_c K_ab
    let mut dk = [[[0.0; MAX_DIM]; MAX_DIM]; MAX_DIM];
    for (c, dkc) in dk.iter_mut().enumerate().take(d) {
        for a in 0..d {
            for b in a..d {
                let v = grid.fd1(p, c, |q| metric.component(q, a, b));
                dkc[a][b] = v;
                dkc[b][a] = v;
            }
        }
    }
    // first[d][b][c] = ½(∂_b K_dc + ∂_c K_db − ∂_d K_bc)
    let mut first = ZERO_GAMMA;
    for (e, fe) in first.iter_mut().enumerate().take(d) {
        for b in 0..d {
            for c in b..d {
                let v = 0.5 * (dk[b][e][c] + dk[c][e][b] - dk[e][b][c]);
                fe[b][c] = v;
                fe[c][b] = v;
            }
        }
    }
    let mut out = ZERO_GAMMA;
    for (a, oa) in out.iter_mut().enumerate().take(d) {
        for b in 0..d {
            for c in b..d {
                let v: f64 = (0..d)
                    .map(|e| metric.inverse_component(p, a, e) * first[e][b][c])
                    .sum();
                oa[b][c] = v;
                oa[c][b] = v;
            }
        }
    }
    out
}

/// Christoffel symbols of the second kind at every grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct ChristoffelField {
    grid: ProductGrid,
    dim: usize,
    data: Vec<f64>,
}

impl ChristoffelField {
    pub fn grid(&self) -> &ProductGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `Γ^a_{bc}` at point `p`.
    #[inline]
    pub fn get(&self, p: usize, a: usize, b: usize, c: usize) -> f64 {
        let d = self.dim;
        self.data[((p * d + a) * d + b) * d + c]
    }

    pub fn at(&self, p: usize) -> Gamma {
        let mut g = ZERO_GAMMA;
        for (a, ga) in g.iter_mut().enumerate().take(self.dim) {
            for (b, gab) in ga.iter_mut().enumerate().take(self.dim) {
                for (c, v) in gab.iter_mut().enumerate().take(self.dim) {
                    *v = self.get(p, a, b, c);
                }
            }
        }
        g
    }
}

/// Minimum points per axis for the finite-difference connection.
pub const MIN_FD_POINTS: usize = 8;

pub(crate) fn check_fd_resolution(grid: &ProductGrid) -> Result<()> {
    if let Some(ax) = grid.axes().iter().find(|a| a.points < MIN_FD_POINTS) {
        return Err(Error::InvalidGrid(format!(
            "finite-difference curvature needs at least {MIN_FD_POINTS} points per axis, got {}",
            ax.points
        )));
    }
    Ok(())
}

pub fn christoffel_fd(metric: &MetricField) -> Result<ChristoffelField> {
    let grid = metric.grid().clone();
    check_fd_resolution(&grid)?;
    let d = metric.dim();
    let mut data = vec![0.0; grid.len() * d * d * d];
    for p in 0..grid.len() {
        let g = christoffel_at(metric, p);
        let base = p * d * d * d;
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    data[base + (a * d + b) * d + c] = g[a][b][c];
                }
            }
        }
    }
    Ok(ChristoffelField {
        grid,
        dim: d,
        data,
    })
}

/// `Γ_{ABC} = K_{CD} Γ^D_{AB}`: the index lowered last, as in the closed
/// forms below.
pub fn lower_last(metric: &MetricField, p: usize, second: &Gamma) -> Gamma {
    let d = metric.dim();
    let mut out = ZERO_GAMMA;
    for (a, oa) in out.iter_mut().enumerate().take(d) {
        for (b, oab) in oa.iter_mut().enumerate().take(d) {
            for (c, v) in oab.iter_mut().enumerate().take(d) {
                *v = (0..d)
                    .map(|e| metric.component(p, c, e) * second[e][a][b])
                    .sum();
            }
        }
    }
    out
}

/// Index families of the connection of `K` on a flat product. `S` marks a
/// base index, `F` a fiber index; second-kind families list the upper
/// index first, first-kind families carry the lowered index last.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ChristoffelFamily {
    /// `Γ̃^k_{ij}`
    UpperSLowerSS,
    /// `Γ̃^α_{ij}`
    UpperFLowerSS,
    /// `Γ̃^k_{αj}`
    UpperSLowerFS,
    /// `Γ̃^γ_{iβ}`
    UpperFLowerSF,
    /// `Γ̃^γ_{αβ}`
    UpperFLowerFF,
    /// `Γ̃^k_{αβ}`
    UpperSLowerFF,
    /// `Γ̃_{ijk}`
    FirstSSS,
    /// `Γ̃_{ijα}`
    FirstSSF,
    /// `Γ̃_{αjk}`
    FirstFSS,
    /// `Γ̃_{iβγ}`
    FirstSFF,
    /// `Γ̃_{αβk}`
    FirstFFS,
}

impl ChristoffelFamily {
    pub const ALL: [ChristoffelFamily; 11] = [
        Self::UpperSLowerSS,
        Self::UpperFLowerSS,
        Self::UpperSLowerFS,
        Self::UpperFLowerSF,
        Self::UpperFLowerFF,
        Self::UpperSLowerFF,
        Self::FirstSSS,
        Self::FirstSSF,
        Self::FirstFSS,
        Self::FirstSFF,
        Self::FirstFFS,
    ];

    pub fn is_second_kind(self) -> bool {
        matches!(
            self,
            Self::UpperSLowerSS
                | Self::UpperFLowerSS
                | Self::UpperSLowerFS
                | Self::UpperFLowerSF
                | Self::UpperFLowerFF
                | Self::UpperSLowerFF
        )
    }

    /// Index pattern `(first, second, third)` as base (`false`) / fiber
    /// (`true`), in storage order `[a][b][c]`.
    fn pattern(self) -> [bool; 3] {
        match self {
            Self::UpperSLowerSS => [false, false, false],
            Self::UpperFLowerSS => [true, false, false],
            Self::UpperSLowerFS => [false, true, false],
            Self::UpperFLowerSF => [true, false, true],
            Self::UpperFLowerFF => [true, true, true],
            Self::UpperSLowerFF => [false, true, true],
            Self::FirstSSS => [false, false, false],
            Self::FirstSSF => [false, false, true],
            Self::FirstFSS => [true, false, false],
            Self::FirstSFF => [false, true, true],
            Self::FirstFFS => [true, true, false],
        }
    }

    /// All storage indices `(a, b, c)` of this family.
    pub fn indices(self, m: usize, n: usize) -> Vec<(usize, usize, usize)> {
        let range = |fiber: bool| if fiber { m..m + n } else { 0..m };
        let [pa, pb, pc] = self.pattern();
        let mut out = Vec::new();
        for a in range(pa) {
            for b in range(pb) {
                for c in range(pc) {
                    out.push((a, b, c));
                }
            }
        }
        out
    }
}

/// The connection of `K = e^{2nu}δ ⊕ e^{-2mu}δ` in closed form.
#[derive(Clone, Debug, PartialEq)]
pub struct ClosedFormChristoffel {
    pub m: usize,
    pub n: usize,
    pub second: Gamma,
    pub first: Gamma,
}

impl ClosedFormChristoffel {
    pub fn family(&self, f: ChristoffelFamily) -> Vec<((usize, usize, usize), f64)> {
        let table = if f.is_second_kind() {
            &self.second
        } else {
            &self.first
        };
        f.indices(self.m, self.n)
            .into_iter()
            .map(|(a, b, c)| ((a, b, c), table[a][b][c]))
            .collect()
    }

    /// `Σ_A Γ̃^A_{BA}` for every `B`.
    pub fn traces(&self) -> Vec<f64> {
        let d = self.m + self.n;
        (0..d)
            .map(|b| (0..d).map(|a| self.second[a][b][a]).sum())
            .collect()
    }
}

/// Closed forms from the value of `u` and its gradient at one point
/// (flat base and fiber).
pub fn christoffel_from_jet(m: usize, n: usize, u: f64, du: &[f64]) -> ClosedFormChristoffel {
    let d = m + n;
    let (mf, nf) = (m as f64, n as f64);
    let delta = |a: usize, b: usize| f64::from(u8::from(a == b));
    let rn = (2.0 * nf * u).exp();
    let rm = (-2.0 * mf * u).exp();
    let is_f = |a: usize| a >= m;
    let mut second = ZERO_GAMMA;
    let mut first = ZERO_GAMMA;
    for a in 0..d {
        for b in 0..d {
            for c in 0..d {
                second[a][b][c] = match (is_f(a), is_f(b), is_f(c)) {
                    (false, false, false) => {
                        nf * (du[c] * delta(a, b) + du[b] * delta(a, c) - du[a] * delta(b, c))
                    }
                    (true, false, false) => {
                        -nf * (2.0 * (mf + nf) * u).exp() * du[a] * delta(b, c)
                    }
                    (false, true, false) => nf * du[b] * delta(a, c),
                    (false, false, true) => nf * du[c] * delta(a, b),
                    (true, false, true) => -mf * du[b] * delta(a, c),
                    (true, true, false) => -mf * du[c] * delta(a, b),
                    (true, true, true) => {
                        -mf * (du[c] * delta(a, b) + du[b] * delta(a, c) - du[a] * delta(b, c))
                    }
                    (false, true, true) => {
                        mf * (-2.0 * (mf + nf) * u).exp() * du[a] * delta(b, c)
                    }
                };
                first[a][b][c] = match (is_f(a), is_f(b), is_f(c)) {
                    (false, false, false) => {
                        nf * rn
                            * (du[b] * delta(a, c) + du[a] * delta(b, c) - du[c] * delta(a, b))
                    }
                    (false, false, true) => -nf * rn * du[c] * delta(a, b),
                    (true, false, false) | (false, true, false) => {
                        let (alpha, j) = if is_f(a) { (a, b) } else { (b, a) };
                        nf * rn * du[alpha] * delta(j, c)
                    }
                    (false, true, true) | (true, false, true) => {
                        let (i, beta) = if is_f(a) { (b, a) } else { (a, b) };
                        -mf * rm * du[i] * delta(beta, c)
                    }
                    (true, true, false) => mf * rm * du[c] * delta(a, b),
                    (true, true, true) => {
                        -mf * rm
                            * (du[b] * delta(a, c) + du[a] * delta(b, c) - du[c] * delta(a, b))
                    }
                };
            }
        }
    }
    ClosedFormChristoffel {
        m,
        n,
        second,
        first,
    }
}

/// Closed-form connection at grid point `p`. Valid only for flat `g` and `h`,
/// where the coordinates are normal at every point.
pub fn christoffel_closed_form(
    spec: &ProductManifoldSpec,
    u: &DeformationField,
    p: usize,
) -> Result<ClosedFormChristoffel> {
    if !spec.is_flat() {
        return Err(Error::NonFlatMetric);
    }
    let du = u.gradient_at(spec.grid(), p);
    Ok(christoffel_from_jet(
        spec.m(),
        spec.n(),
        u.samples()[p],
        &du,
    ))
}
