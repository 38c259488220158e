//! Resolution studies comparing the finite-difference curvature with the
//! closed forms.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::expr::Expr;

use super::{
    assemble_deformed_metric, christoffel_closed_form, christoffel_fd, lower_last,
    partial_traces_fd, partial_traces_formula, ricci_identity_check, scalar_curvature_formula,
    BaseMetric, ChristoffelFamily, DeformationField, MetricField, ProductField, ProductGrid,
    ProductManifoldSpec,
};

/// Interval-end margin excluded from accuracy claims.
pub const INTERIOR_MARGIN: usize = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub identity: String,
    pub points: usize,
    pub max_error: f64,
    /// Error at the previous resolution divided by this one.
    pub ratio: Option<f64>,
}

/// A deformation `u` on `Tᵐ × fiber`, refined along the axes flagged in
/// `refined`; the others keep [`FIXED_POINTS`] points, which is exact when
/// `u` does not depend on them.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureCase {
    pub label: String,
    pub m: usize,
    pub n: usize,
    pub u: Expr,
    pub refined: Vec<bool>,
    pub t_end: f64,
    /// Conformal factor `φ(x)` of a curved base metric `e^{2φ}δ`.
    pub phi: Option<Expr>,
}

pub const FIXED_POINTS: usize = 8;

impl CurvatureCase {
    /// `u = 0.3 sin(x₁) cos(t₁)` on `Tᵐ × [0,1]` (`n = 1`) or `Tᵐ × Tⁿ`.
    pub fn sine(m: usize, n: usize) -> Self {
        let src = if n == 1 {
            "0.3*sin(x1)*cos(t)".to_string()
        } else {
            "0.3*sin(x1)*cos(t1)".to_string()
        };
        let mut refined = vec![false; m + n];
        refined[0] = true;
        refined[m] = true;
        Self {
            label: format!("sine-m{m}-n{n}"),
            m,
            n,
            u: Expr::parse(&src).expect("static expression"),
            refined,
            t_end: 1.0,
            phi: None,
        }
    }

    pub fn flat_zero(m: usize, n: usize) -> Self {
        Self {
            label: format!("flat-zero-m{m}-n{n}"),
            m,
            n,
            u: Expr::zero(),
            refined: vec![true; m + n],
            t_end: 1.0,
            phi: None,
        }
    }

    pub fn grid(&self, points: usize) -> Result<ProductGrid> {
        let pts: Vec<usize> = self
            .refined
            .iter()
            .map(|&r| if r { points } else { FIXED_POINTS })
            .collect();
        ProductGrid::product(self.m, self.n, &pts[..self.m], &pts[self.m..], self.t_end)
    }

    pub fn spec(&self, grid: &ProductGrid) -> Result<ProductManifoldSpec> {
        match &self.phi {
            None => Ok(ProductManifoldSpec::flat(grid.clone())),
            Some(phi) => ProductManifoldSpec::new(
                grid.clone(),
                BaseMetric::Conformal {
                    phi: grid.sample_expr(phi),
                },
            ),
        }
    }
}

pub(crate) fn fill_ratios(rows: &mut [ConvergenceRow]) {
    for i in 0..rows.len() {
        let prev = rows[..i]
            .iter()
            .rev()
            .find(|r| r.identity == rows[i].identity)
            .map(|r| r.max_error);
        rows[i].ratio = prev.map(|p| p / rows[i].max_error);
    }
}

fn add(a: &ProductField, b: &ProductField) -> ProductField {
    ProductField {
        grid: a.grid.clone(),
        samples: a.samples.iter().zip(&b.samples).map(|(x, y)| x + y).collect(),
    }
}

/// Scalar curvature and both partial traces, finite differences against
/// the closed forms, on interior nodes.
pub fn scalar_curvature_study(
    case: &CurvatureCase,
    resolutions: &[usize],
) -> Result<Vec<ConvergenceRow>> {
    let mut rows = Vec::new();
    for &points in resolutions {
        let grid = case.grid(points)?;
        let spec = case.spec(&grid)?;
        let u = DeformationField::from_expr(&grid, case.u.clone())?;
        let k = assemble_deformed_metric(&spec, &u)?;
        let (base_fd, fiber_fd) = partial_traces_fd(&k)?;
        let (base_cf, fiber_cf) = partial_traces_formula(&spec, &u)?;
        let scalar_fd = add(&base_fd, &fiber_fd);
        let scalar_cf = scalar_curvature_formula(&spec, &u)?;
        for (identity, fd, cf) in [
            ("scalar", &scalar_fd, &scalar_cf),
            ("base-trace", &base_fd, &base_cf),
            ("fiber-trace", &fiber_fd, &fiber_cf),
        ] {
            rows.push(ConvergenceRow {
                identity: format!("{}/{identity}", case.label),
                points,
                max_error: fd.max_diff(cf, INTERIOR_MARGIN)?,
                ratio: None,
            });
        }
    }
    fill_ratios(&mut rows);
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChristoffelStudy {
    pub rows: Vec<ConvergenceRow>,
    /// Largest `|Σ_A Γ̃^A_{BA}|` of the closed forms over all points and `B`.
    pub max_trace: f64,
}

/// Every closed-form family against finite differences, at all nodes.
pub fn christoffel_study(case: &CurvatureCase, resolutions: &[usize]) -> Result<ChristoffelStudy> {
    let mut rows = Vec::new();
    let mut max_trace: f64 = 0.0;
    for &points in resolutions {
        let grid = case.grid(points)?;
        let spec = case.spec(&grid)?;
        let u = DeformationField::from_expr(&grid, case.u.clone())?;
        let k = assemble_deformed_metric(&spec, &u)?;
        let fd = christoffel_fd(k.metric())?;
        let mut worst = vec![0.0f64; ChristoffelFamily::ALL.len()];
        for p in 0..grid.len() {
            let cf = christoffel_closed_form(&spec, &u, p)?;
            max_trace = cf.traces().iter().fold(max_trace, |a, t| a.max(t.abs()));
            let second = fd.at(p);
            let first = lower_last(k.metric(), p, &second);
            for (fi, fam) in ChristoffelFamily::ALL.iter().enumerate() {
                let table = if fam.is_second_kind() { &second } else { &first };
                for ((a, b, c), v) in cf.family(*fam) {
                    worst[fi] = worst[fi].max((table[a][b][c] - v).abs());
                }
            }
        }
        for (fam, err) in ChristoffelFamily::ALL.iter().zip(worst) {
            rows.push(ConvergenceRow {
                identity: format!("{}/{fam:?}", case.label),
                points,
                max_error: err,
                ratio: None,
            });
        }
    }
    fill_ratios(&mut rows);
    Ok(ChristoffelStudy { rows, max_trace })
}

/// Ricci identity defect for `e^{2φ}δ` on `T²` with a fixed smooth covector.
pub fn ricci_identity_study(phi: &Expr, resolutions: &[usize]) -> Result<Vec<ConvergenceRow>> {
    let mut rows = Vec::new();
    for &points in resolutions {
        let grid = ProductGrid::torus(2, points)?;
        let metric = MetricField::conformally_flat(grid.clone(), &grid.sample_expr(phi))?;
        let b = vec![
            grid.sample(|x| x[1].cos() + 0.5 * x[0].sin()),
            grid.sample(|x| (x[0] + x[1]).sin()),
        ];
        let report = ricci_identity_check(&metric, &b)?;
        rows.push(ConvergenceRow {
            identity: "ricci-identity".into(),
            points,
            max_error: report.defect,
            ratio: None,
        });
    }
    fill_ratios(&mut rows);
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratios_are_filled_per_identity() {
        let mut rows = vec![
            ConvergenceRow { identity: "a".into(), points: 8, max_error: 4.0, ratio: None },
            ConvergenceRow { identity: "b".into(), points: 8, max_error: 1.0, ratio: None },
            ConvergenceRow { identity: "a".into(), points: 16, max_error: 1.0, ratio: None },
        ];
        fill_ratios(&mut rows);
        assert_eq!(rows[0].ratio, None);
        assert_eq!(rows[1].ratio, None);
        assert_eq!(rows[2].ratio, Some(4.0));
    }

    #[test]
    fn flat_zero_case_is_exact() {
        let rows = scalar_curvature_study(&CurvatureCase::flat_zero(1, 1), &[16]).unwrap();
        assert!(rows.iter().all(|r| r.max_error <= 1e-8));
    }
}
