//! Grid partition near the boundary set and its dynamical refinement.

pub mod bounds;
pub mod dump;
pub mod geometry;
pub mod grid;
pub mod initial;
pub mod refine;
pub mod thresholds;

pub use bounds::{
    class_measure, deep_return_statistic, distortion_estimate, max_distortion, predicted_class_bound, ReturnClass,
};
pub use grid::{verify_grid_constants, GridConstants, GridSequence};
pub use initial::{build_initial_partition, Atom, AtomKind, InitialPartition};
pub use refine::{check_nesting, gap_violations, refine_levels, refine_step, Overflow, RefinedAtom};
pub use thresholds::{choose_thresholds, tail_sum, ThresholdOptions, Thresholds};
