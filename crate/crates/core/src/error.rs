//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix determinant {det} is not 1 within tolerance")]
    NotUnitDeterminant { det: f64 },
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("frequency grid too coarse: captures {captured:.6} of the spectral mass, need >= {required}")]
    GridTooCoarse { captured: f64, required: f64 },
    #[error("grid box side {side} shorter than required {required} (4x correlation range)")]
    BoxTooSmall { side: f64, required: f64 },
    #[error("mesh would have {nodes} nodes, cap is {cap}")]
    MeshTooLarge { nodes: usize, cap: usize },
    #[error("triangle {index} is degenerate (area {area:.3e})")]
    DegenerateTriangle { index: usize, area: f64 },
    #[error("lumped mass entry {index} is not strictly positive")]
    SingularMass { index: usize },
    #[error("sparse Cholesky factorization failed at row {row}")]
    CholeskyFailure { row: usize },
    #[error("point {index} lies outside the mesh")]
    PointOutsideMesh { index: usize },
    #[error("argument {value} below the lower end {lower} of the function's range")]
    OutOfRange { value: f64, lower: f64 },
    #[error("degenerate quantile targets: need a0 > 1, probabilities in (0,1), rho0 > 0")]
    DegenerateTargets,
    #[error("Hessian at the reported mode is indefinite even after jitter")]
    HessianIndefinite,
    #[error("importance weights degenerate: one weight carries {max_weight:.4} of the mass")]
    AllWeightsDegenerate { max_weight: f64 },
    #[error("leave-one-out downdate numerically singular at observation {index}")]
    NumericallySingularDowndate { index: usize },
    #[error("sampling from this prior is not supported")]
    UnsupportedSampling,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
