//! Upwind generalized summation-by-parts (gSBP) operators for 1D
//! advection-diffusion, paired with implicit-explicit Runge-Kutta time stepping.
//!
//! The global nodal DG discretization on Legendre-Gauss-Lobatto nodes is
//! assembled as a dual pair `D⁻(θ)`, `D⁺(θ)` sharing a diagonal norm matrix.
//! Advection uses `D⁻` explicitly; diffusion uses `D₂ = D⁻D⁺` implicitly.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod imex;
pub mod mesh;
pub mod operators;
pub mod problems;
pub mod ref_element;
pub mod sparse;

pub use error::{GsbpError, Result};
pub use mesh::Mesh1D;
pub use operators::{
    assemble_first_derivative, sat_advection_rhs, second_derivative, verify_axioms,
    CertificationReport, DiffusionFlux, GlobalOperatorSet, SecondDerivativeOperator, Topology,
};
pub use ref_element::{build_lgl, ReferenceElement};
pub use sparse::BlockMatrix;
