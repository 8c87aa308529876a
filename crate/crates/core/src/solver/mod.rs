//! Sparse kernels, ILU(0), GMRES and the V-cycle preconditioner.

mod dense;
mod gmres;
mod ilu;
mod multigrid;
mod sparse;

pub use dense::{DenseLu, MAX_DENSE_DIM};
pub use gmres::{gmres, GmresOptions, GmresResult, HistoryEntry, IdentityPreconditioner, Preconditioner};
pub use ilu::Ilu0;
pub use multigrid::{MgLevel, MgPreconditioner, DEFAULT_SMOOTHS};
pub use sparse::{norm2, residual, SparseMatrix, Triplets};
