//! Node-nested coarsening of graded simplicial meshes into multigrid
//! hierarchies, interpolation by mesh traversal, and a geometric multigrid
//! preconditioner for reentrant-corner Laplace problems.

pub mod coarsen;
pub mod error;
pub mod fem;
pub mod geom;
pub mod hierarchy;
pub mod interp;
pub mod io;
pub mod mesh;
pub mod remesh;
pub mod meshgen;
pub mod solver;

pub use error::{Error, Result};
pub use mesh::{BoundaryMarker, SimplicialMesh};
