use alloc::boxed::Box;
use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("point cloud must contain at least one point")]
    EmptyCloud,
    #[error("point {index} has a non-finite coordinate")]
    NonFinitePoint { index: usize },
    #[error("face {face} references vertex {vertex}, but the mesh has {vertex_count} vertices")]
    VertexOutOfBounds { face: usize, vertex: usize, vertex_count: usize },
    #[error("face {face} is degenerate (zero area)")]
    DegenerateTriangle { face: usize },
    #[error("loss became non-finite at training step {step}")]
    NonFiniteLoss { step: usize },
    #[error("non-finite update for point {point} at ascent step {step}")]
    NonFiniteUpdate { point: usize, step: usize },
    #[error("patch {patch}: {source}")]
    Patch { patch: usize, source: Box<Error> },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
