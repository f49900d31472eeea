use thiserror::Error;

/// Errors produced by mesh construction, geometry queries and the solver.
#[derive(Debug, Error)]
pub enum MeshError {
    #[error("malformed element {element}: repeated or out-of-range node id {node}")]
    MalformedElement { element: usize, node: usize },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("point ({x}, {y}, {z}) lies outside the guide-mesh coverage")]
    OutOfCoverage { x: f64, y: f64, z: f64 },

    #[error("coordinate singularity at ({x}, {y}, {z}): radius or axis distance is zero")]
    SingularCoordinate { x: f64, y: f64, z: f64 },

    #[error("constraint deficiency: stiffness system is not positive definite ({0})")]
    ConstraintDeficiency(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("projection of node {node} is singular (zero radius)")]
    ProjectionSingular { node: usize },

    #[error("statistic undefined: {0}")]
    UndefinedStatistic(String),

    #[error("unsupported dimension {dim} for {operation}")]
    UnsupportedDimension { dim: usize, operation: &'static str },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, MeshError>;
