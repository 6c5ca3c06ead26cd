//! Finite-element kernel: shape functions, dof maps, form assembly and the
//! sparse direct solver.

pub mod block;
pub mod dofs;
pub mod forms;
pub mod shape;
pub mod solver;
pub mod sparse;

pub use block::{fixed_values, BlockSystem};
pub use dofs::{push_reduced, DofMap, DofMapBuilder, Slot};
pub use solver::{solve_sparse, Factorization};
pub use sparse::Csr;
