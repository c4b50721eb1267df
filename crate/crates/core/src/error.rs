use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("element kind {kind} does not accept iso coordinates of kind {iso_kind}")]
    KindMismatch { kind: String, iso_kind: String },

    #[error("degenerate element {0}")]
    DegenerateElement(String),

    #[error("ambiguous inverse mapping: two admissible roots ({0:?}, {1:?})")]
    AmbiguousRoots([f64; 2], [f64; 2]),

    #[error("point lies on the fold of the bilinear map, no finite iso coordinates")]
    FoldSingularity,

    #[error("cell grid mismatch: {0}")]
    GridMismatch(String),

    #[error("bad anchor {anchor:?}: {reason}")]
    BadAnchor { anchor: Vec<f64>, reason: String },

    #[error("ray lies along boundary surface {0}")]
    RayAlongBoundary(usize),

    #[error("grazing ray at boundary node {node}: manual anchor adjustment required")]
    GrazingRay { node: usize },

    #[error("singular heat system: {0}")]
    SingularHeatSystem(String),

    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("iterative solver did not converge: relative residual {0:e}")]
    NoConvergence(f64),

    #[error("missing value: {0}")]
    Missing(String),

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("singular multiplier system, redundant constraint rows {0:?}")]
    RedundantConstraints(Vec<usize>),

    #[error("time step {dt} exceeds stability limit {limit}")]
    UnstableTimeStep { dt: f64, limit: f64 },

    #[error("instability at step {step}: total energy {energy:e} exceeds 10x initial {initial:e}")]
    Instability { step: usize, energy: f64, initial: f64 },
}

impl Error {
    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse { location: location.into(), message: message.into() }
    }
}
