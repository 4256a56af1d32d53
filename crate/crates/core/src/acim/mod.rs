//! Ulam approximation of the absolutely continuous invariant measures.

pub mod density;
pub mod matrix;
pub mod observable;

pub use density::{operator_residual, recurrent_classes, stationary_densities, Density, EquilibriumSet};
pub use matrix::{build_ulam_matrix, TransferMatrix, UlamGrid};
pub use observable::{cell_averages, correlation_estimate, integrate_observable};
