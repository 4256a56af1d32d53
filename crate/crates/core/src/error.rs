use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point {x} lies within {tolerance:e} of the boundary set")]
    SingularPoint { x: f64, tolerance: f64 },

    #[error("orbit entered the boundary set at iterate {index}")]
    OrbitHitSingular { index: usize },

    #[error("recurrence observable is infinite at {x}")]
    InfiniteRecurrence { x: f64 },

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("no feasible threshold below {cap}: {condition}")]
    NoFeasibleThreshold { condition: String, cap: usize },

    #[error("inverse branch solve failed for target {target}")]
    PullbackFailure { target: f64 },

    #[error("requested {requested} samples, budget is {budget}")]
    SampleBudgetExceeded { requested: u64, budget: u64 },

    #[error("exact mode requested at n = {n}, cap is {cap}")]
    ExactCapExceeded { n: usize, cap: usize },

    #[error("interval count exceeded {limit} at level {level}")]
    IntervalCountOverflow { level: usize, limit: usize },

    #[error("need at least {required} usable entries, got {usable}")]
    InsufficientData { usable: usize, required: usize },

    #[error("no convergence after {iterations} iterations (defect {defect:e})")]
    NoConvergence { iterations: usize, defect: f64 },
}

impl Error {
    /// Short machine-readable name.
    pub fn name(&self) -> &'static str {
        match self {
            Error::SingularPoint { .. } => "SingularPoint",
            Error::OrbitHitSingular { .. } => "OrbitHitSingular",
            Error::InfiniteRecurrence { .. } => "InfiniteRecurrence",
            Error::InvalidParameters(_) => "InvalidParameters",
            Error::NoFeasibleThreshold { .. } => "NoFeasibleThreshold",
            Error::PullbackFailure { .. } => "PullbackFailure",
            Error::SampleBudgetExceeded { .. } => "SampleBudgetExceeded",
            Error::ExactCapExceeded { .. } => "ExactCapExceeded",
            Error::IntervalCountOverflow { .. } => "IntervalCountOverflow",
            Error::InsufficientData { .. } => "InsufficientData",
            Error::NoConvergence { .. } => "NoConvergence",
        }
    }

    /// True for the errors caused by a resource budget rather than the math.
    pub fn is_budget(&self) -> bool {
        matches!(
            self,
            Error::SampleBudgetExceeded { .. }
                | Error::ExactCapExceeded { .. }
                | Error::IntervalCountOverflow { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
