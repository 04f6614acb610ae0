//! Crate-wide error type.

/// Errors surfaced by the contact kernel, assembly engine, probe harness, and CLI.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An input carried a NaN or infinity where a finite value is required.
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    /// A parameter violated its domain (stiffness ≤ 0, bad normal, ...).
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    /// The tangent direction is undefined because the in-plane movement is zero.
    #[error("degenerate tangent direction: in-plane movement has zero length")]
    DegenerateTangent,

    /// Step inputs contradict each other (e.g. a claimed fresh contact whose
    /// overlap never becomes positive during the step).
    #[error("inconsistent step kinematics: {0}")]
    InconsistentKinematics(String),

    /// A quantity that must be non-negative (e.g. the slip-onset discriminant)
    /// came out negative beyond roundoff tolerance.
    #[error("numerical inconsistency: {0}")]
    NumericalInconsistency(String),

    /// Geometry the engine cannot handle (e.g. coincident sphere centers).
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    /// Circle fit impossible: points are collinear through the origin.
    #[error("degenerate circle fit: points are collinear through the origin")]
    DegenerateFit,

    /// Explicit integration blew up (velocity per step beyond the stable bound).
    #[error("integration unstable: {0}")]
    Unstable(String),

    /// Configuration file rejected before execution.
    #[error("config error: {0}")]
    Config(String),

    /// A runtime invariant check failed (fuzz/verification paths).
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
