//! Suspension semiflow over a skew product with a logarithmic roof.

pub mod estimate;
pub mod flow;
pub mod skew;

pub use estimate::{
    averages_along, flow_deviation_measure, flow_deviation_series, flow_escape_measure, flow_escape_series,
    flow_targets, BaseSet,
};
pub use flow::{flow_time_average, simpson, FlowObservable, InducedObservable, Lap, SemiflowState, Suspension, TimeAverage};
pub use skew::{Drift, RoofFunction, SkewProduct};
