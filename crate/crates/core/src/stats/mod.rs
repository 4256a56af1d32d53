//! Lebesgue measures of deviation, recurrence and escape sets, and fits of
//! their exponential decay.

pub mod fit;
pub mod observable;
pub mod recurrence;
pub mod sampler;
pub mod survivors;

pub use fit::{fit_exponential_rate, DeviationSeries, Method, RateFit, SeriesEntry};
pub use observable::{hull_distance, observable_deviation_measure, tail_set_report, TailEntry, TailReport};
pub use recurrence::{recurrence_deviation_measure, recurrence_deviation_series, Estimate, Mode};
pub use sampler::{with_workers, Sampler};
pub use survivors::{survivor_measure, SurvivorSet};
