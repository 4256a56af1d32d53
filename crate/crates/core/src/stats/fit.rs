//! Exponential decay fits of measure series.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    MonteCarlo,
    ExactIntervals,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::MonteCarlo => "monte_carlo",
            Method::ExactIntervals => "exact_intervals",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesEntry {
    pub n: usize,
    pub measure: f64,
    pub stderr: f64,
    pub method: Method,
}

/// Measures indexed by `n`, strictly increasing.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DeviationSeries {
    pub entries: Vec<SeriesEntry>,
}

impl DeviationSeries {
    pub fn push(&mut self, e: SeriesEntry) -> Result<()> {
        if self.entries.last().is_some_and(|l| l.n >= e.n) {
            return Err(Error::InvalidParameters("series entries must have increasing n".into()));
        }
        if !(e.measure >= 0.0) {
            return Err(Error::InvalidParameters(format!("negative measure {}", e.measure)));
        }
        self.entries.push(e);
        Ok(())
    }

    pub fn exact(points: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut s = DeviationSeries::default();
        for (n, m) in points {
            s.push(SeriesEntry { n, measure: m, stderr: 0.0, method: Method::ExactIntervals })?;
        }
        Ok(s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub ci95_upper: f64,
    pub n_range: (usize, usize),
    /// `n` of entries with zero measure, left out of the fit.
    pub below_resolution: Vec<usize>,
}

impl RateFit {
    pub fn decaying(&self) -> bool {
        self.ci95_upper < 0.0
    }
}

/// Weight of an exact entry relative to the heaviest Monte-Carlo weight.
const EXACT_FACTOR: f64 = 1e6;

/// Weighted least squares of `log measure` against `n`, weights `1/se²`.
pub fn fit_exponential_rate(series: &DeviationSeries) -> Result<RateFit> {
    let below: Vec<usize> = series.entries.iter().filter(|e| e.measure <= 0.0).map(|e| e.n).collect();
    let usable: Vec<&SeriesEntry> = series.entries.iter().filter(|e| e.measure > 0.0).collect();
    let is_exact = |e: &SeriesEntry| e.method == Method::ExactIntervals || e.stderr <= 0.0;
    let mc_max = usable.iter().filter(|e| !is_exact(e)).map(|e| e.stderr.powi(-2)).fold(0.0, f64::max);
    let exact_w = if mc_max > 0.0 { mc_max * EXACT_FACTOR } else { 1.0 };
    let pts: Vec<(f64, f64, f64)> = usable
        .iter()
        .map(|e| {
            let w = if is_exact(e) { exact_w } else { e.stderr.powi(-2) };
            (e.n as f64, e.measure.ln(), w)
        })
        .collect();
    if pts.len() < 4 {
        return Err(Error::InsufficientData { usable: pts.len(), required: 4 });
    }
    // Centre the logs on the first entry so a constant series fits exactly.
    let y0 = pts[0].1;
    let wmax = pts.iter().map(|p| p.2).fold(0.0, f64::max);
    let pts: Vec<(f64, f64, f64)> = pts.iter().map(|p| (p.0, p.1 - y0, p.2 / wmax)).collect();
    let sw: f64 = pts.iter().map(|p| p.2).sum();
    let xm = pts.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let ym = pts.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let sxx: f64 = pts.iter().map(|p| p.2 * (p.0 - xm).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| p.2 * (p.0 - xm) * (p.1 - ym)).sum();
    let syy: f64 = pts.iter().map(|p| p.2 * (p.1 - ym).powi(2)).sum();
    let slope = sxy / sxx;
    let rss: f64 = pts.iter().map(|p| p.2 * (p.1 - ym - slope * (p.0 - xm)).powi(2)).sum();
    let intercept = ym + y0 - slope * xm;
    let r_squared = if syy > 0.0 { 1.0 - rss / syy } else { 1.0 };
    let dof = (pts.len() - 2) as f64;
    let se = (rss / dof / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, dof).expect("dof > 0").inverse_cdf(0.975);
    let first = series.entries.iter().find(|e| e.measure > 0.0).map_or(0, |e| e.n);
    let last = series.entries.iter().rev().find(|e| e.measure > 0.0).map_or(0, |e| e.n);
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        ci95_upper: slope + t * se,
        n_range: (first, last),
        below_resolution: below,
    })
}
