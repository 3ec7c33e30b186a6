//! Coherent discrete embeddings of Euler–Lagrange and Hamiltonian PDEs.
//!
//! Four discretizations of the Dirichlet Poisson problem (and, for finite
//! differences and P1 finite elements, of general Euler–Lagrange equations)
//! are implemented twice: once as a *differential* embedding (stencils,
//! fluxes, weak residuals, saddle-point blocks) and once as a *variational*
//! embedding (a discrete Lagrangian or Hamiltonian whose critical points are
//! the discrete solutions). The [`functional::coherence_check`] harness
//! compares the two embeddings state by state.
//!
//! | scheme | differential side | variational side | mass scaling |
//! |--------|-------------------|------------------|--------------|
//! | [`fd`]  | [`fd::el_residual`] | [`fd::FdLagrangian`] | `h^d` |
//! | [`fem`] | [`fem::weak_residual`] | [`fem::FemLagrangian`] | `1` |
//! | [`fv`]  | [`fv::FiniteVolume::residual`] | [`fv::FvLagrangian`] | `\|K\|` |
//! | [`mfd`] | [`mfd::Mimetic::block_residual`] | [`mfd::MfdHamiltonian`] | `-\|K\|` on cells, `-1` on faces |
//!
//! Data-parallel loops (stencils, per-cell assembly, matrix-vector products,
//! coherence probes) run on rayon when the `parallel` feature is enabled and
//! sequentially otherwise. Every reduction is performed in a fixed order, so
//! results are bit-identical between the two builds.

#![allow(clippy::needless_range_loop)]

pub mod error;
pub mod fd;
pub mod fem;
pub mod functional;
pub mod fv;
pub mod linalg;
pub mod mesh;
pub mod mfd;
pub mod par;
pub mod problem;
pub mod study;

pub use error::{Error, Result};
