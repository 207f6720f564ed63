use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid layer widths {0:?}: need at least two layers with unit input and output")]
    InvalidWidths(Vec<usize>),
    #[error("probe batch is empty")]
    EmptyProbeBatch,
    #[error("probe activations have zero second moment at layer {layer}")]
    DegenerateProbe { layer: usize },
    #[error("pre-activation overflow in layer {layer} (|Re y| = {magnitude:.3e} exceeds {limit})")]
    Overflow { layer: usize, magnitude: f64, limit: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("batch is empty")]
    EmptyBatch,
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("singular evaluation at ({x:.6e}, {y:.6e}): {reason}")]
    SingularEvaluation { x: f64, y: f64, reason: &'static str },
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("too few collocation points: segment {segment} would receive {got} (< 2)")]
    TooFewPoints { segment: usize, got: usize },
    #[error("all Neumann targets are zero; loss normalization is undefined")]
    ZeroLoading,
    #[error("non-finite field at ({x:.6e}, {y:.6e})")]
    NonFiniteField { x: f64, y: f64 },
    #[error("architecture mismatch: {0}")]
    ArchitectureMismatch(String),
    #[error("contour of radius {radius:.4e} around ({x:.4e}, {y:.4e}) leaves the domain")]
    ContourIntersection { x: f64, y: f64, radius: f64 },
    #[error("no admissible kink angle (K_I' <= 0 everywhere)")]
    EmptyAdmissibleSet,
    #[error("both stress intensity factors are zero")]
    ZeroSifs,
    #[error("training diverged: {0}")]
    Divergence(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
