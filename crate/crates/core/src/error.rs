use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate cell {0}")]
    DegenerateCell(usize),
    #[error("cell {cell} is not positively oriented (signed measure {measure:e})")]
    InvertedCell { cell: usize, measure: f64 },
    #[error("cell {cell} references vertex {vertex} but the mesh has {nv} vertices")]
    BadVertexIndex { cell: usize, vertex: usize, nv: usize },
    #[error("unsupported dimension {0}")]
    BadDimension(usize),
    #[error("vertex {0} has no incident edge")]
    IsolatedVertex(usize),
    #[error("non-manifold boundary at {0}")]
    NonManifoldBoundary(String),
    #[error("angle {0} is not reentrant")]
    NotReentrant(f64),
    #[error("invalid grading: {0}")]
    InvalidGrading(String),
    #[error("infeasible mesh target: {0}")]
    InfeasibleTarget(String),
    #[error("mesh not coarsenable at this beta ({0})")]
    NotCoarsenable(f64),
    #[error("traversal could not cover mesh ({0} fine cells unreached)")]
    TraversalIncomplete(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("zero pivot in row {0}")]
    ZeroPivot(usize),
    #[error("singular coarse matrix")]
    SingularCoarse,
    #[error("coarse level has {0} unknowns, too many for a dense direct solve")]
    CoarseTooLarge(usize),
    #[error("hierarchy has a single level; a multigrid solve needs at least two")]
    SingleLevel,
    #[error("unclassified boundary facet {0:?}")]
    UnclassifiedFacet(Vec<usize>),
    #[error("parse error in {path:?} line {line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
