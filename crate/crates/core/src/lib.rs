//! Slow recurrence to singular sets of piecewise expanding interval maps.
//!
//! The crate is organised bottom-up:
//!
//! * [`map`] holds piecewise expanding maps with one-sided singular and
//!   discontinuity points, the truncated distance and Birkhoff sums.
//! * [`partition`] builds the grid partition near the singular set and
//!   refines it dynamically, recording return times and depths.
//! * [`stats`] estimates measures of deviation, recurrence and escape sets
//!   and fits exponential rates.
//! * [`acim`] computes Ulam approximations of the invariant densities.
//! * [`semiflow`] suspends a skew product under a logarithmic roof.

pub mod acim;
pub mod error;
pub mod map;
pub mod partition;
pub mod precise;
pub mod semiflow;
pub mod stats;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
