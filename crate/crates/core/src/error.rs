use thiserror::Error;

use crate::functional::FunctionalError;
use crate::linalg::LinalgError;
use crate::mesh::MeshError;
use crate::problem::ProblemError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the scheme modules and the study drivers.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Functional(#[from] FunctionalError),
    #[error("field does not belong to the variation space: node {node} carries {value} on the boundary")]
    NotInVariationSpace { node: usize, value: f64 },
    #[error("flux distribution does not satisfy the continuity relation")]
    DiscontinuousFlux,
    #[error("mesh is not admissible: {0} face(s) violate orthogonality")]
    NotAdmissible(usize),
    #[error("{0}")]
    Unsupported(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}
