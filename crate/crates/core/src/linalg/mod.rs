//! Dense and sparse symmetric linear algebra used by the element kernels
//! and the global solvers.

pub mod cg;
pub mod cholesky;
pub mod dense;
pub mod ordering;
pub mod solve;
pub mod sparse;

pub use cg::{pcg, CgOutcome};
pub use cholesky::SparseCholesky;
pub use dense::{DenseCholesky, DenseMatrix};
pub use solve::{solve_spd, SolveStats, SolverKind, SolverOptions};
pub use sparse::{SymmetricCsc, SymmetricPattern};
