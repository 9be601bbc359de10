use crate::kernels::KnotSet4;

/// Errors for the whole crate. Mesh problems are reported distinctly so a
/// frontend can map them to exit classes.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse: {0}")]
    Parse(String),

    #[error("mesh not watertight: {0}")]
    NotWatertight(String),

    #[error("mesh orientation inconsistent: {0}")]
    InconsistentOrientation(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("invalid argument: {0}")]
    Invalid(String),

    /// Greedy sampling hit its ball cap before covering every interior node.
    /// Carries the knots selected so far.
    #[error("ball cap reached after {} knots with {uncovered} nodes uncovered", partial.len())]
    PartialDecomposition { partial: Box<KnotSet4>, uncovered: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
