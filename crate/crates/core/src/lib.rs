//! Prescribed scalar curvature for volume-element-preserving deformations
//! `K = e^{2u} g + e^{-2mu} h` of a product `Tᵐ × I`.
//!
//! The crate has two independent halves. [`curvature`] assembles the
//! deformed metric on a grid and computes its connection and curvature by
//! brute-force finite differences, next to the closed-form expressions.
//! [`galerkin`], [`picard`] and [`energy`] solve the nonlinear evolution
//! equation for `u` on the flat torus with a Fourier-Galerkin linear solver
//! inside a Picard loop, and measure the energy functionals that control it.

pub mod curvature;
pub mod energy;
pub mod error;
pub mod expr;
mod fft;
pub mod galerkin;
pub mod grid;
pub mod io;
pub mod norms;
pub mod picard;
pub mod random;
pub mod spectral;
pub mod time;

pub use error::{Error, Result};
pub use expr::Expr;
pub use grid::{GridField, SpaceTimeField, TorusGrid};
pub use spectral::SpectralField;
