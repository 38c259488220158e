use crate::error::{Error, Result};

use super::christoffel::christoffel_fd;
use super::metric::MetricField;

/// Both sides of `[∇_p, ∇_q] B_σ = −R^ρ_{σpq} B_ρ` for a covector `B`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RicciIdentityReport {
    /// `max |[∇_p,∇_q]B_σ + R^ρ_{σpq}B_ρ|` over points and indices.
    pub defect: f64,
    pub commutator_max: f64,
    pub curvature_max: f64,
}

/// Compares the commutator of covariant derivatives, computed by
/// differencing `∇B`, with the curvature contraction, computed by
/// differencing `Γ`. `testfield[σ]` holds the samples of `B_σ`.
pub fn ricci_identity_check(metric: &MetricField, testfield: &[Vec<f64>]) -> Result<RicciIdentityReport> {
    let grid = metric.grid();
    let d = metric.dim();
    let len = grid.len();
    if testfield.len() != d || testfield.iter().any(|c| c.len() != len) {
        return Err(Error::GridMismatch(format!(
            "covector needs {d} components of {len} samples"
        )));
    }
    for c in testfield {
        crate::grid::check_finite(c)?;
    }
    let gamma = christoffel_fd(metric)?;

    // nabla[q * d + s][pt] = ∂_q B_s − Γ^r_{qs} B_r
    let mut nabla = vec![vec![0.0; len]; d * d];
    for pt in 0..len {
        for q in 0..d {
            for s in 0..d {
                let mut v = grid.fd1(pt, q, |x| testfield[s][x]);
                for (r, b) in testfield.iter().enumerate() {
                    v -= gamma.get(pt, r, q, s) * b[pt];
                }
                nabla[q * d + s][pt] = v;
            }
        }
    }

    let mut report = RicciIdentityReport {
        defect: 0.0,
        commutator_max: 0.0,
        curvature_max: 0.0,
    };
    for pt in 0..len {
        // ∇_p (∇B)_{qs} = ∂_p T_qs − Γ^r_{pq} T_rs − Γ^r_{ps} T_qr
        let second = |p: usize, q: usize, s: usize| {
            let mut v = grid.fd1(pt, p, |x| nabla[q * d + s][x]);
            for r in 0..d {
                v -= gamma.get(pt, r, p, q) * nabla[r * d + s][pt]
                    + gamma.get(pt, r, p, s) * nabla[q * d + r][pt];
            }
            v
        };
        for p in 0..d {
            for q in (p + 1)..d {
                for s in 0..d {
                    let commutator = second(p, q, s) - second(q, p, s);
                    let mut contraction = 0.0;
                    for (r, b) in testfield.iter().enumerate() {
                        let mut riem = grid.fd1(pt, p, |x| gamma.get(x, r, q, s))
                            - grid.fd1(pt, q, |x| gamma.get(x, r, p, s));
                        for l in 0..d {
                            riem += gamma.get(pt, r, p, l) * gamma.get(pt, l, q, s)
                                - gamma.get(pt, r, q, l) * gamma.get(pt, l, p, s);
                        }
                        contraction -= riem * b[pt];
                    }
                    report.defect = report.defect.max((commutator - contraction).abs());
                    report.commutator_max = report.commutator_max.max(commutator.abs());
                    report.curvature_max = report.curvature_max.max(contraction.abs());
                }
            }
        }
    }
    Ok(report)
}
