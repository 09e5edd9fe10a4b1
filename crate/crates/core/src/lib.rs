//! Symmetric and antisymmetric kernels for functions of several particles
//! or graph nodes, with the learning and eigenvalue solvers built on them.

pub mod antisym;
pub mod combinatorics;
pub mod error;
pub mod experiments;
pub mod graphs;
pub mod io;
pub mod kernels;
pub mod learn;
pub mod linalg;
pub mod par;
pub mod schrodinger;
pub mod sym;

pub use antisym::{AntisymKernel, Strategy};
pub use combinatorics::{Permutation, ENUMERATION_CAP};
pub use error::{Error, Result};
pub use graphs::{graph_kernel, GraphFamily, KernelTensor, LabeledGraph};
pub use kernels::{Family, Kernel, KernelSpec};
pub use par::Exec;
pub use sym::{SymKernel, SymStrategy};
