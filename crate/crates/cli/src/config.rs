//! Experiment configuration files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use slowrec::map::{make_connected_map, make_doubling_map, make_lorenz_map, MapRecord, PiecewiseMap};
use slowrec::partition::{GridSequence, ThresholdOptions};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub map: MapSpec,
    #[serde(default)]
    pub run: RunSpec,
    pub grid: Option<GridSpec>,
    pub thresholds: Option<ThresholdSpec>,
    pub partition: Option<PartitionSpec>,
    pub recurrence: Option<RecurrenceSpec>,
    pub escape: Option<EscapeSpec>,
    pub acim: Option<AcimSpec>,
    pub correlation: Option<CorrelationSpec>,
    pub semiflow: Option<SemiflowSpec>,
}

/// A bundled family, or a map file in the `[[branch]]`/`[[point]]` format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "family", rename_all = "snake_case")]
pub enum MapSpec {
    Lorenz { alpha: f64 },
    Doubling,
    Connected { alpha: f64, steps: usize },
    File { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    #[serde(default)]
    pub seed: u64,
    pub workers: Option<usize>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// Ceiling on Monte-Carlo samples per estimate.
    pub sample_budget: Option<u64>,
}

impl Default for RunSpec {
    fn default() -> Self {
        RunSpec { seed: 0, workers: None, output_dir: default_output(), sample_budget: None }
    }
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub epsilon1: f64,
    pub beta1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdSpec {
    pub epsilon0: f64,
    pub cap: Option<usize>,
    pub theta3: Option<f64>,
    pub theta_z: Option<f64>,
    pub distortion: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSpec {
    pub p_max: usize,
    #[serde(default)]
    pub levels: usize,
    /// Levels written to the dump; all levels when absent.
    pub dump_levels: Option<Vec<usize>>,
    /// Sample points per atom for the distortion estimate; 0 skips it.
    #[serde(default)]
    pub distortion_samples: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeSpec {
    MonteCarlo,
    Exact,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecurrenceSpec {
    pub epsilon: f64,
    pub ns: Vec<usize>,
    #[serde(default = "default_mode")]
    pub mode: ModeSpec,
    #[serde(default)]
    pub samples: u64,
    /// Overrides the truncation δ chosen with the thresholds.
    pub delta: Option<f64>,
    pub exact_cap: Option<usize>,
}

fn default_mode() -> ModeSpec {
    ModeSpec::MonteCarlo
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EscapeSpec {
    pub delta: f64,
    pub ns: Vec<usize>,
    pub interval_limit: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcimSpec {
    pub cells: usize,
    #[serde(default = "default_tol")]
    pub tolerance: f64,
    #[serde(default)]
    pub dump_matrix: bool,
}

fn default_tol() -> f64 {
    1e-12
}

/// Observables of the base point, and of suspension states for `y`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum ObservableSpec {
    X,
    XCentered,
    Y,
    LogDistance { delta: f64 },
    Bump { center: f64, width: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelationSpec {
    pub cells: usize,
    pub n_max: usize,
    pub phi: ObservableSpec,
    pub psi: ObservableSpec,
    #[serde(default = "default_tol")]
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemiflowSpec {
    pub lambda: f64,
    #[serde(default)]
    pub drift_slope: f64,
    #[serde(default)]
    pub drift_offset: f64,
    #[serde(default = "one")]
    pub tau0: f64,
    #[serde(default = "one")]
    pub k: f64,
    #[serde(default = "default_roof_delta")]
    pub delta_roof: f64,
    #[serde(default)]
    pub fiber_lipschitz: f64,
    pub observable: ObservableSpec,
    pub epsilon: f64,
    pub times: Vec<usize>,
    #[serde(default)]
    pub samples: u64,
    /// Quadrature step; `τ₀/64` when absent.
    pub step: Option<f64>,
    /// Ulam cells for the flow means.
    #[serde(default = "default_cells")]
    pub cells: usize,
    /// Open base intervals removed from `K` for `semiflow-escape`.
    #[serde(default)]
    pub escape_holes: Vec<(f64, f64)>,
}

fn one() -> f64 {
    1.0
}

fn default_roof_delta() -> f64 {
    0.05
}

fn default_cells() -> usize {
    4096
}

/// Anything wrong with a config, found before computing.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<slowrec::Error> for ConfigError {
    fn from(e: slowrec::Error) -> Self {
        ConfigError(e.to_string())
    }
}

pub fn require<'a, T>(section: &'a Option<T>, name: &str) -> Result<&'a T, ConfigError> {
    section.as_ref().ok_or_else(|| ConfigError(format!("missing [{name}] section")))
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        let mut cfg: Config = toml::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        if let MapSpec::File { path: p } = &mut cfg.map {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    /// Canonical text of the effective configuration.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn build_map(&self) -> Result<PiecewiseMap, ConfigError> {
        Ok(match &self.map {
            MapSpec::Lorenz { alpha } => make_lorenz_map(*alpha)?,
            MapSpec::Doubling => make_doubling_map(),
            MapSpec::Connected { alpha, steps } => make_connected_map(*alpha, *steps)?,
            MapSpec::File { path } => {
                let text =
                    std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
                let rec: MapRecord =
                    toml::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
                PiecewiseMap::from_record(&rec)?
            }
        })
    }

    pub fn grid(&self) -> Result<GridSequence, ConfigError> {
        let g = require(&self.grid, "grid")?;
        Ok(GridSequence::new(g.epsilon1, g.beta1)?)
    }

    pub fn threshold_options(&self) -> Result<(f64, ThresholdOptions), ConfigError> {
        let t = require(&self.thresholds, "thresholds")?;
        let mut o = ThresholdOptions::default();
        if let Some(c) = t.cap {
            o.cap = c;
        }
        o.theta3 = t.theta3;
        if let Some(z) = t.theta_z {
            o.theta_z = z;
        }
        if let Some(d) = t.distortion {
            o.distortion = d;
        }
        Ok((t.epsilon0, o))
    }
}

/// Checks shared by the series commands.
pub fn increasing(xs: &[usize], what: &str) -> Result<(), ConfigError> {
    if xs.is_empty() || xs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ConfigError(format!("{what} must be a non-empty increasing list")));
    }
    Ok(())
}
