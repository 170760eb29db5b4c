//! Spectral structure of non-negative matrices: irreducible classes, periods,
//! Perron vectors and deep-power limits.

mod decompose;
mod deep;
mod perron;
mod scc;

pub use decompose::{decompose, decompose_ltm, decompose_with, CanonicalDecomposition, DecomposeOptions, IrreducibleBlock};
pub use deep::{absorption, deep_limit_matrix, Absorption, DeepLimit, SINGULAR_MARGIN};
pub use perron::{perron, PerronPair};
pub use scc::period_of;
