use alloc::string::String;

use thiserror::Error;

/// Geometry validation failures.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("hole boundary is not a simple closed curve")]
    NotSimple,
    #[error("hole has degenerate area {0:e}")]
    DegenerateArea(f64),
    #[error("hole closure leaves the strip 0 < x2 < {height} (margin {margin:e})")]
    OutsideStrip { height: f64, margin: f64 },
    #[error("hole copy {k} overlaps copy {next}")]
    Overlap { k: usize, next: usize },
    #[error("hole copy {k} leaves the periodicity cell")]
    OutsideCell { k: usize },
    #[error("hole does not fit inside |x1| < T - H for T = {half_length}")]
    TruncationTooShort { half_length: f64 },
}

/// Mesh generation failures.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeshError {
    #[error("mesh size {requested} violates the limit {limit}")]
    SizeOutOfRange { requested: f64, limit: f64 },
    #[error(
        "quality floor unreachable: worst triangle {triangle} has min angle {angle_deg:.2} deg at ({x:.5}, {y:.5})"
    )]
    Quality { triangle: usize, angle_deg: f64, x: f64, y: f64 },
    #[error("periodic traces do not match after {rounds} rounds")]
    PeriodicMismatch { rounds: usize },
    #[error("triangulation failed: {0}")]
    Triangulation(String),
}

/// Assembly and eigensolver failures.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FemError {
    #[error("assembly error: {0}")]
    Assembly(String),
    #[error("incompatible data: |int F + int G| = {defect:e} exceeds {limit:e}")]
    Solvability { defect: f64, limit: f64 },
    #[error("{dofs} degrees of freedom exceed the dense ceiling {ceiling} and iterative mode is off")]
    Capacity { dofs: usize, ceiling: usize },
    #[error("eigensolver did not converge: residual {residual:e} after {iterations} iterations")]
    Solver { residual: f64, iterations: usize },
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("requested {requested} eigenpairs from a system of {dofs} unknowns")]
    TooManyEigenpairs { requested: usize, dofs: usize },
    #[error("trial vector is zero")]
    ZeroTrial,
}

/// Boundary-layer solve failures.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CellConstantsError {
    #[error(
        "truncation/resolution: m1 energy {energy} vs far field {farfield} differ by {relative:.3e} (limit {limit:.1e}); increase T or refine"
    )]
    CrossMethod { energy: f64, farfield: f64, relative: f64, limit: f64 },
    #[error("decay fit needs at least {needed} columns, got {got}")]
    InsufficientColumns { needed: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    CellConstants(#[from] CellConstantsError),
    #[error("at eta = {eta}: {source}")]
    AtEta { eta: f64, source: FemError },
    #[error("comparison error: {0}")]
    Comparison(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}
