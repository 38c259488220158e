use crate::error::{Error, Result};

use super::christoffel::{check_fd_resolution, Gamma, ZERO_GAMMA};
use super::metric::{DeformedMetric, MetricField};
use super::product::{BaseMetric, DeformationField, ProductField, ProductGrid, ProductManifoldSpec};
use super::MAX_DIM;

pub type Ricci = [[f64; MAX_DIM]; MAX_DIM];

/// `Γ` at `p` and `dg[c][a][b][e] = ∂_c Γ^a_{be}`, obtained by
/// differentiating the defining expression of `Γ` with first and second
/// partials of `K` taken by second-order central differences (one-sided at
/// interval ends).
pub(crate) fn christoffel_jet(metric: &MetricField, p: usize) -> (Gamma, Vec<Gamma>) {
    let grid = metric.grid();
    let d = metric.dim();
    let mut kinv = [[0.0; MAX_DIM]; MAX_DIM];
    for (a, row) in kinv.iter_mut().enumerate().take(d) {
        for (b, v) in row.iter_mut().enumerate().take(d) {
            *v = metric.inverse_component(p, a, b);
        }
    }
    // dk[c][a][b] = ∂_c K_ab, ddk[c][e][a][b] = ∂_c ∂_e K_ab
    let mut dk = [[[0.0; MAX_DIM]; MAX_DIM]; MAX_DIM];
    let mut ddk = vec![[[[0.0; MAX_DIM]; MAX_DIM]; MAX_DIM]; d];
    for a in 0..d {
        for b in a..d {
            let comp = |q: usize| metric.component(q, a, b);
            for c in 0..d {
                let v = grid.fd1(p, c, comp);
                dk[c][a][b] = v;
                dk[c][b][a] = v;
                for e in c..d {
                    let v = grid.fd2(p, c, e, comp);
                    for (x, y) in [(c, e), (e, c)] {
                        ddk[x][y][a][b] = v;
                        ddk[x][y][b][a] = v;
                    }
                }
            }
        }
    }
    // first[e][b][c] = ½(∂_b K_ec + ∂_c K_eb − ∂_e K_bc), and its derivatives
    let mut first = ZERO_GAMMA;
    let mut dfirst = vec![ZERO_GAMMA; d];
    for e in 0..d {
        for b in 0..d {
            for c in 0..d {
                first[e][b][c] = 0.5 * (dk[b][e][c] + dk[c][e][b] - dk[e][b][c]);
                for (x, df) in dfirst.iter_mut().enumerate() {
                    df[e][b][c] = 0.5 * (ddk[x][b][e][c] + ddk[x][c][e][b] - ddk[x][e][b][c]);
                }
            }
        }
    }
    let mut gamma = ZERO_GAMMA;
    for a in 0..d {
        for b in 0..d {
            for c in 0..d {
                gamma[a][b][c] = (0..d).map(|e| kinv[a][e] * first[e][b][c]).sum();
            }
        }
    }
    let mut dg = Vec::with_capacity(d);
    for x in 0..d {
        // ∂_x K^{ae} = −K^{ap} ∂_x K_pq K^{qe}
        let mut dkinv = [[0.0; MAX_DIM]; MAX_DIM];
        for a in 0..d {
            for e in 0..d {
                let mut s = 0.0;
                for pp in 0..d {
                    for q in 0..d {
                        s -= kinv[a][pp] * dk[x][pp][q] * kinv[q][e];
                    }
                }
                dkinv[a][e] = s;
            }
        }
        let mut g = ZERO_GAMMA;
        for a in 0..d {
            for b in 0..d {
                for c in b..d {
                    let v: f64 = (0..d)
                        .map(|e| dkinv[a][e] * first[e][b][c] + kinv[a][e] * dfirst[x][e][b][c])
                        .sum();
                    g[a][b][c] = v;
                    g[a][c][b] = v;
                }
            }
        }
        dg.push(g);
    }
    (gamma, dg)
}

/// `R_AB = ∂_C Γ^C_AB − ∂_B Γ^C_AC + Γ^D_AB Γ^C_DC − Γ^D_AC Γ^C_BD`.
pub fn ricci_at(metric: &MetricField, p: usize) -> Ricci {
    let d = metric.dim();
    let (g, dg) = christoffel_jet(metric, p);
    let mut r = [[0.0; MAX_DIM]; MAX_DIM];
    for a in 0..d {
        for b in a..d {
            let mut s = 0.0;
            for c in 0..d {
                s += dg[c][c][a][b] - dg[b][c][a][c];
                for e in 0..d {
                    s += g[e][a][b] * g[c][e][c] - g[e][a][c] * g[c][b][e];
                }
            }
            r[a][b] = s;
            r[b][a] = s;
        }
    }
    r
}

fn contract(metric: &MetricField, p: usize, r: &Ricci, range: std::ops::Range<usize>) -> f64 {
    let mut s = 0.0;
    for a in range.clone() {
        for b in range.clone() {
            s += metric.inverse_component(p, a, b) * r[a][b];
        }
    }
    s
}

/// Scalar curvature `K^{AB} R_AB` of any sampled metric, by finite
/// differences. Nodes within two steps of an interval end use one-sided
/// stencils and are less accurate.
pub fn scalar_curvature_of(metric: &MetricField) -> Result<ProductField> {
    check_fd_resolution(metric.grid())?;
    let d = metric.dim();
    let samples = (0..metric.grid().len())
        .map(|p| contract(metric, p, &ricci_at(metric, p), 0..d))
        .collect();
    Ok(ProductField {
        grid: metric.grid().clone(),
        samples,
    })
}

pub fn scalar_curvature_fd(k: &DeformedMetric) -> Result<ProductField> {
    scalar_curvature_of(k.metric())
}

/// `(K^{ij} R̃_ij, K^{αβ} R̃_αβ)` by finite differences.
pub fn partial_traces_fd(k: &DeformedMetric) -> Result<(ProductField, ProductField)> {
    let metric = k.metric();
    check_fd_resolution(metric.grid())?;
    let (m, d) = (k.m(), metric.dim());
    let len = metric.grid().len();
    let mut base = Vec::with_capacity(len);
    let mut fiber = Vec::with_capacity(len);
    for p in 0..len {
        let r = ricci_at(metric, p);
        base.push(contract(metric, p, &r, 0..m));
        fiber.push(contract(metric, p, &r, m..d));
    }
    let grid = metric.grid().clone();
    Ok((
        ProductField {
            grid: grid.clone(),
            samples: base,
        },
        ProductField {
            grid,
            samples: fiber,
        },
    ))
}

/// Pointwise inputs of the curvature formula: `u`, `Δ_g u`, `|∇_g u|²_g`,
/// `Δ_h u`, `|∇_h u|²_h`, `R_g`, `R_h`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CurvatureJet {
    pub u: f64,
    pub lap_g: f64,
    pub grad_g_sq: f64,
    pub lap_h: f64,
    pub grad_h_sq: f64,
    pub r_g: f64,
    pub r_h: f64,
}

impl CurvatureJet {
    /// Exchange the roles of base and fiber, with `ρ ↦ ρ⁻¹`.
    pub fn swapped(&self) -> Self {
        Self {
            u: -self.u,
            lap_g: -self.lap_h,
            grad_g_sq: self.grad_h_sq,
            lap_h: -self.lap_g,
            grad_h_sq: self.grad_g_sq,
            r_g: self.r_h,
            r_h: self.r_g,
        }
    }
}

/// `K^{ij} R̃_ij` in terms of `u`.
pub fn base_trace_from_jet(m: usize, n: usize, j: &CurvatureJet) -> f64 {
    let (mf, nf) = (m as f64, n as f64);
    let en = (-2.0 * nf * j.u).exp();
    let em = (2.0 * mf * j.u).exp();
    en * j.r_g + nf * (2.0 - mf) * en * j.lap_g
        - mf * nf * em * j.lap_h
        - nf * (-nf * mf + 2.0 * nf + mf * mf) * en * j.grad_g_sq
        - 2.0 * mf * mf * nf * em * j.grad_h_sq
}

/// `K^{αβ} R̃_αβ`: the base trace with base and fiber exchanged.
pub fn fiber_trace_from_jet(m: usize, n: usize, j: &CurvatureJet) -> f64 {
    base_trace_from_jet(n, m, &j.swapped())
}

/// Scalar curvature of `e^{2nu} g + e^{-2mu} h`:
/// `e^{-2nu}R_g + e^{2mu}R_h + 2n e^{-2nu}Δ_g u − 2m e^{2mu}Δ_h u
///  − n(nm+2n+m²) e^{-2nu}|∇_g u|² − m(nm+2m+n²) e^{2mu}|∇_h u|²`.
pub fn scalar_from_jet(m: usize, n: usize, j: &CurvatureJet) -> f64 {
    let (mf, nf) = (m as f64, n as f64);
    let en = (-2.0 * nf * j.u).exp();
    let em = (2.0 * mf * j.u).exp();
    en * j.r_g + em * j.r_h + 2.0 * nf * en * j.lap_g
        - 2.0 * mf * em * j.lap_h
        - nf * (nf * mf + 2.0 * nf + mf * mf) * en * j.grad_g_sq
        - mf * (nf * mf + 2.0 * mf + nf * nf) * em * j.grad_h_sq
}

fn sum_fields(parts: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![0.0; parts[0].len()];
    for p in parts {
        for (o, v) in out.iter_mut().zip(p) {
            *o += v;
        }
    }
    out
}

/// `R_g` of `e^{2φ}δ` on `Tᵐ`: `−e^{−2φ}[2(m−1)Δφ + (m−2)(m−1)|∇φ|²]`.
pub fn conformal_scalar_curvature(grid: &ProductGrid, phi: &[f64]) -> Result<Vec<f64>> {
    let m = grid.m();
    let mf = m as f64;
    let dphi = (0..m)
        .map(|i| grid.axis_derivative(phi, i, 1))
        .collect::<Result<Vec<_>>>()?;
    let lap = sum_fields(
        &(0..m)
            .map(|i| grid.axis_derivative(phi, i, 2))
            .collect::<Result<Vec<_>>>()?,
    );
    Ok((0..grid.len())
        .map(|p| {
            let g2: f64 = dphi.iter().map(|d| d[p] * d[p]).sum();
            -(-2.0 * phi[p]).exp() * (2.0 * (mf - 1.0) * lap[p] + (mf - 2.0) * (mf - 1.0) * g2)
        })
        .collect())
}

/// Jets of `u` at every grid point: spectral in periodic directions,
/// second-order differences along an interval fiber.
pub fn curvature_jets(spec: &ProductManifoldSpec, u: &DeformationField) -> Result<Vec<CurvatureJet>> {
    let grid = spec.grid();
    let (m, d) = (spec.m(), grid.dim());
    let us = u.samples();
    let du = (0..d)
        .map(|a| grid.axis_derivative(us, a, 1))
        .collect::<Result<Vec<_>>>()?;
    let d2u = (0..d)
        .map(|a| grid.axis_derivative(us, a, 2))
        .collect::<Result<Vec<_>>>()?;
    let (phi_grad, r_g, phi) = match spec.base() {
        BaseMetric::Flat => (None, vec![0.0; grid.len()], None),
        BaseMetric::Conformal { phi } => (
            Some(
                (0..m)
                    .map(|i| grid.axis_derivative(phi, i, 1))
                    .collect::<Result<Vec<_>>>()?,
            ),
            conformal_scalar_curvature(grid, phi)?,
            Some(phi),
        ),
        BaseMetric::Sampled { .. } => {
            return Err(Error::param(
                "base",
                "the curvature formula needs a flat or conformally flat base metric",
            ))
        }
    };
    let mf = m as f64;
    Ok((0..grid.len())
        .map(|p| {
            let lap: f64 = (0..m).map(|i| d2u[i][p]).sum();
            let g2: f64 = (0..m).map(|i| du[i][p] * du[i][p]).sum();
            let (lap_g, grad_g_sq) = match (&phi_grad, phi) {
                (Some(dphi), Some(phi)) => {
                    let w = (-2.0 * phi[p]).exp();
                    let cross: f64 = (0..m).map(|i| dphi[i][p] * du[i][p]).sum();
                    (w * (lap + (mf - 2.0) * cross), w * g2)
                }
                _ => (lap, g2),
            };
            CurvatureJet {
                u: us[p],
                lap_g,
                grad_g_sq,
                lap_h: (m..d).map(|a| d2u[a][p]).sum(),
                grad_h_sq: (m..d).map(|a| du[a][p] * du[a][p]).sum(),
                r_g: r_g[p],
                r_h: 0.0,
            }
        })
        .collect())
}

pub fn scalar_curvature_formula(
    spec: &ProductManifoldSpec,
    u: &DeformationField,
) -> Result<ProductField> {
    let (m, n) = (spec.m(), spec.n());
    let samples = curvature_jets(spec, u)?
        .iter()
        .map(|j| scalar_from_jet(m, n, j))
        .collect();
    Ok(ProductField {
        grid: spec.grid().clone(),
        samples,
    })
}

/// `(K^{ij} R̃_ij, K^{αβ} R̃_αβ)` from the closed forms.
pub fn partial_traces_formula(
    spec: &ProductManifoldSpec,
    u: &DeformationField,
) -> Result<(ProductField, ProductField)> {
    let (m, n) = (spec.m(), spec.n());
    let jets = curvature_jets(spec, u)?;
    let grid = spec.grid().clone();
    Ok((
        ProductField {
            grid: grid.clone(),
            samples: jets.iter().map(|j| base_trace_from_jet(m, n, j)).collect(),
        },
        ProductField {
            grid,
            samples: jets.iter().map(|j| fiber_trace_from_jet(m, n, j)).collect(),
        },
    ))
}
