//! Error type shared by all pipeline stages.

use thiserror::Error;

/// Failure modes of the pipeline.
///
/// `Config`-type problems (bad input, unusable geometry, unresolved grids)
/// are distinguished from check failures so the CLI can map them to exit
/// codes 1 and 2 respectively.
#[derive(Debug, Error)]
pub enum CgoError {
    /// Geometry that cannot support the pipeline: degenerate cross-section,
    /// too-coarse grid, non-positive spacings.
    #[error("geometry: {0}")]
    Geometry(String),

    /// Frame construction rejected the direction data.
    #[error("frame: {0}")]
    Frame(String),

    /// A precondition on a field operation failed (support, norm order,
    /// curl gate, ladder ordering).
    #[error("field: {0}")]
    Field(String),

    /// The grid cannot resolve the requested oscillation.
    #[error("under-resolved: {0}")]
    UnderResolved(String),

    /// Quadrature window or radius constraints violated.
    #[error("quadrature: {0}")]
    Quadrature(String),

    /// The iterative linear solver did not reach its tolerance.
    #[error("solver: {0}")]
    Solver(String),

    /// Carleman check preconditions (weight ordering, admissibility).
    #[error("carleman: {0}")]
    Carleman(String),

    /// Recovery-stage precondition failures (inadmissible probe set,
    /// boundary-data mismatch, visible-set coverage).
    #[error("recovery: {0}")]
    Recovery(String),

    /// Configuration file or flag problems.
    #[error("config: {0}")]
    Config(String),

    /// Report serialization or file layout problems.
    #[error("report: {0}")]
    Report(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, CgoError>;
