//! Generalized Dirac eigenvalues λₖ(β) on spin surfaces and minimization of the
//! volume-normalized eigenvalue λ̄ₖᵖ(β) = λₖ(β)·‖β‖_{Lᵖ} within a conformal class.
//!
//! The library is organized around analytic Dirac eigenbases on the round sphere
//! and on flat tori (module [`geometry`]), Galerkin assembly and the weighted
//! generalized eigenproblem Dφ = λβφ (module [`spectrum`]), the variational layer
//! with directional derivatives, the Euler–Lagrange fixed-point minimizer and
//! concentration diagnostics (module [`variation`]), and conformal-invariant
//! bookkeeping: sphere table, partition bound combiner, Friedrich/Bär checks and
//! the Sobolev-type probe (module [`invariants`]).

// Index-based loops mirror the matrix formulas throughout; iterator versions
// obscure the (row, col, node) bookkeeping.
#![allow(clippy::needless_range_loop)]

pub mod acceptance;
pub mod axisym;
pub mod error;
pub mod geometry;
pub mod invariants;
pub mod io;
pub mod spectrum;
pub mod variation;

pub use error::Error;

/// Library result alias.
pub type Result<T> = std::result::Result<T, Error>;
