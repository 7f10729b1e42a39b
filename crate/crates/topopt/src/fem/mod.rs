//! Finite-element machinery: element stiffness matrices, sparse storage,
//! global assembly, and linear solvers.

pub mod assembly;
pub mod element;
pub mod solve;
pub mod sparse;

pub use assembly::{apply_dirichlet, assemble_load, Assembler, AssemblyMethod, SparseSystem};
pub use element::{unit_element_stiffness, ElementStiffness, K0Path, K0Set};
pub use solve::{solve, solve_cg, solve_direct, SolveMethod, SolveStats};
pub use sparse::{CsrMatrix, CsrPattern};
