//! The deformed metric `K = ρⁿ g ⊕ ρ⁻ᵐ h` on a grid, its connection and
//! curvature by brute-force finite differences, and the closed forms they
//! are checked against.

mod christoffel;
mod metric;
mod product;
mod ricci_identity;
mod scalar;
pub mod study;

/// Largest total dimension `m + n` supported by the pointwise kernels.
pub const MAX_DIM: usize = 6;

pub use christoffel::{
    christoffel_closed_form, christoffel_fd, christoffel_from_jet, lower_last, ChristoffelFamily,
    ChristoffelField, ClosedFormChristoffel, Gamma, MIN_FD_POINTS,
};
pub use metric::{assemble_deformed_metric, DeformedMetric, MetricField, VOLUME_TOLERANCE};
pub use product::{
    Axis, BaseMetric, DeformationField, ProductField, ProductGrid, ProductManifoldSpec,
};
pub use ricci_identity::{ricci_identity_check, RicciIdentityReport};
pub use scalar::{
    base_trace_from_jet, conformal_scalar_curvature, curvature_jets, fiber_trace_from_jet,
    partial_traces_fd, partial_traces_formula, ricci_at, scalar_curvature_fd,
    scalar_curvature_formula, scalar_curvature_of, scalar_from_jet, CurvatureJet, Ricci,
};
