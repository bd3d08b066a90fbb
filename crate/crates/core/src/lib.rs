//! Numerical laboratory for the convergence of perfectly matched layers (PMLs) in
//! Helmholtz scattering by locally perturbed periodic surfaces.
//!
//! The crate provides a semi-analytic Fourier-domain oracle for a layered model
//! problem, leading-order asymptotics and decay fits, periodic semi-waveguide
//! Neumann-to-Dirichlet terminators, a PML-truncated scattering solver and the
//! experiment harness that drives them.

pub mod asymptotics;
pub mod cheb;
pub mod discretization;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod mp;
pub mod ntd;
pub mod quadrature;
pub mod solver;
pub mod special;
pub mod spectral;

pub use error::{PmlError, Result};
