//! One function per subcommand.

use std::io::Write;

use slowrec::acim::{
    build_ulam_matrix, correlation_estimate, operator_residual, stationary_densities, EquilibriumSet,
};
use slowrec::map::{validate_map, PiecewiseMap};
use slowrec::partition::dump::{write_level, DUMP_HEADER};
use slowrec::partition::refine::initial_level;
use slowrec::partition::{
    build_initial_partition, check_nesting, choose_thresholds, gap_violations, max_distortion, refine_levels,
    InitialPartition, Thresholds,
};
use slowrec::semiflow::{
    flow_deviation_series, flow_escape_series, flow_targets, BaseSet, Drift, FlowObservable, InducedObservable,
    RoofFunction, SkewProduct, Suspension,
};
use slowrec::stats::recurrence::DEFAULT_EXACT_CAP;
use slowrec::stats::survivors::DEFAULT_INTERVAL_LIMIT;
use slowrec::stats::{
    fit_exponential_rate, recurrence_deviation_measure, recurrence_deviation_series, survivor_measure,
    DeviationSeries, Method, Mode, RateFit, Sampler, SeriesEntry,
};

use crate::config::{increasing, require, Config, ConfigError, ModeSpec, ObservableSpec};
use crate::output::Artifacts;
use crate::CliError;

/// Relative slack in the nesting check.
const NESTING_SLACK: f64 = 1e-9;

pub struct Run {
    pub cfg: Config,
    pub seed: u64,
    pub samples: Option<u64>,
}

impl Run {
    fn sampler(&self, configured: u64) -> Result<Sampler, ConfigError> {
        let count = self.samples.unwrap_or(configured);
        if count == 0 {
            return Err(ConfigError("sample count must be positive".into()));
        }
        let mut s = Sampler::new(self.seed, count);
        if let Some(b) = self.cfg.run.sample_budget {
            s.budget = b;
        }
        Ok(s)
    }

    fn thresholds(&self, map: &PiecewiseMap) -> Result<Thresholds, CliError> {
        let grid = self.cfg.grid()?;
        let (eps0, opts) = self.cfg.threshold_options()?;
        Ok(choose_thresholds(map, &grid, eps0, &opts)?)
    }

    fn partition(&self, map: &PiecewiseMap) -> Result<InitialPartition, CliError> {
        let p = require(&self.cfg.partition, "partition")?;
        let t = self.thresholds(map)?;
        Ok(build_initial_partition(map, &t, p.p_max)?)
    }
}

fn fit_block(w: &mut impl Write, fit: &Result<RateFit, slowrec::Error>) -> std::io::Result<()> {
    match fit {
        Ok(f) => {
            writeln!(w, "slope = {}", f.slope)?;
            writeln!(w, "ci95_upper = {}", f.ci95_upper)?;
            writeln!(w, "r_squared = {}", f.r_squared)?;
            writeln!(w, "n_lo = {}", f.n_range.0)?;
            writeln!(w, "n_hi = {}", f.n_range.1)?;
            let below: Vec<String> = f.below_resolution.iter().map(|n| n.to_string()).collect();
            writeln!(w, "below_resolution = {}", below.join(";"))?;
        }
        Err(e) => writeln!(w, "fit = unavailable ({e})")?,
    }
    Ok(())
}

fn write_series(out: &mut Artifacts, name: &str, s: &DeviationSeries, seed: u64, samples: u64) -> Result<(), CliError> {
    let mut w = out.create(name)?;
    writeln!(w, "n,measure,stderr,method,seed,samples")?;
    for e in &s.entries {
        writeln!(w, "{},{},{},{},{seed},{samples}", e.n, e.measure, e.stderr, e.method.name())?;
    }
    Ok(())
}

fn write_flow_series(out: &mut Artifacts, name: &str, s: &DeviationSeries, seed: u64) -> Result<(), CliError> {
    let mut w = out.create(name)?;
    writeln!(w, "T,measure,stderr,seed")?;
    for e in &s.entries {
        writeln!(w, "{},{},{},{seed}", e.n, e.measure, e.stderr)?;
    }
    Ok(())
}

fn summary(out: &mut Artifacts, name: &str, body: &str) -> Result<(), CliError> {
    let mut w = out.create(name)?;
    w.write_all(body.as_bytes())?;
    print!("{body}");
    Ok(())
}

pub fn validate(run: &Run, map: &PiecewiseMap, out: &mut Artifacts) -> Result<(), CliError> {
    let _ = run;
    let r = validate_map(map);
    let mut s = String::new();
    s += &format!("sigma_hat = {}\nsigma_pass = {}\nhas_singular = {}\n", r.sigma_hat, r.sigma_pass, r.has_singular);
    for e in &r.exponents {
        s += &format!("exponent[{}] = {} expected {} pass {}\n", e.point, e.fitted, e.expected, e.pass);
    }
    for c in &r.comparability {
        s += &format!("comparability[{}] = {} declared {} pass {}\n", c.point, c.estimate, c.declared, c.pass);
    }
    for c in &r.holder {
        s += &format!("holder[{}] = {} declared {} pass {}\n", c.point, c.estimate, c.declared, c.pass);
    }
    for c in &r.connections {
        s += &format!("connection[{}] steps {} reach {} pass {} {}\n", c.point, c.steps, c.reach, c.pass, c.detail);
    }
    s += &format!("passed = {}\nusable_for_recurrence = {}\n", r.passed(), r.usable_for_recurrence());
    summary(out, "validation.txt", &s)
}

fn threshold_text(t: &Thresholds) -> String {
    format!(
        "K0 = {}\nK1 = {}\nrho0 = {}\ntheta = {}\ndelta = {}\nbeta2 = {}\nbeta3 = {}\nz = {}\nell = {}\nbeta_under = {}\nkappa0 = {}\nL = {}\nK2 = {}\n",
        t.constants.k0,
        t.constants.k1,
        t.rho0,
        t.theta,
        t.delta.delta,
        t.beta2,
        t.beta3,
        t.z,
        t.ell,
        t.beta_under,
        t.kappa0,
        t.big_l,
        t.k2
    )
}

pub fn build_partition(run: &Run, map: &PiecewiseMap, out: &mut Artifacts) -> Result<(), CliError> {
    let p0 = run.partition(map)?;
    let level = initial_level(&p0);
    let mut w = out.create("partition.tsv")?;
    writeln!(w, "{DUMP_HEADER}")?;
    write_level(&mut w, 0, &level)?;
    drop(w);
    let mut s = threshold_text(&p0.thresholds);
    s += &format!(
        "p_max = {}\natoms = {}\nleftover = {}\nclass_constant = {}\n",
        p0.p_max,
        level.len(),
        p0.leftover,
        p0.class_constant()
    );
    summary(out, "partition_summary.txt", &s)
}

pub fn refine(run: &Run, map: &PiecewiseMap, out: &mut Artifacts) -> Result<(), CliError> {
    let spec = require(&run.cfg.partition, "partition")?;
    let p0 = run.partition(map)?;
    let levels = refine_levels(map, &p0, spec.levels);
    let mut w = out.create("refine.tsv")?;
    writeln!(w, "{DUMP_HEADER}")?;
    for (n, (atoms, _)) in levels.iter().enumerate() {
        if spec.dump_levels.as_ref().map_or(true, |d| d.contains(&n)) {
            write_level(&mut w, n, atoms)?;
        }
    }
    drop(w);
    let mut s = String::from("level,atoms,mass,overflow_depth,overflow_resolution,nesting_failures,gap_violations");
    if spec.distortion_samples > 0 {
        s += ",distortion";
    }
    s += "\n";
    for (n, (atoms, over)) in levels.iter().enumerate() {
        let mass: f64 = atoms.iter().map(|a| a.len()).sum();
        let nest = atoms.iter().filter(|a| !check_nesting(map, &p0, a, NESTING_SLACK)).count();
        let gaps: usize = atoms.iter().map(|a| gap_violations(map, &p0, a).len()).sum();
        s += &format!("{n},{},{mass},{},{},{nest},{gaps}", atoms.len(), over.depth, over.resolution);
        if spec.distortion_samples > 0 {
            s += &format!(",{}", max_distortion(atoms, map, spec.distortion_samples));
        }
        s += "\n";
    }
    summary(out, "refine_summary.txt", &s)
}

pub fn recurrence_rate(run: &Run, map: &PiecewiseMap, out: &mut Artifacts) -> Result<(), CliError> {
    let spec = require(&run.cfg.recurrence, "recurrence")?;
    increasing(&spec.ns, "recurrence.ns")?;
    let delta = match spec.delta {
        Some(d) => d,
        None => run.thresholds(map)?.delta.delta,
    };
    let (series, samples) = match spec.mode {
        ModeSpec::MonteCarlo => {
            let s = run.sampler(spec.samples)?;
            (recurrence_deviation_series(map, delta, spec.epsilon, &spec.ns, &s)?, s.count)
        }
        ModeSpec::Exact => {
            let cap = spec.exact_cap.unwrap_or(DEFAULT_EXACT_CAP);
            let mut series = DeviationSeries::default();
            for &n in &spec.ns {
                let e = recurrence_deviation_measure(map, delta, spec.epsilon, n, Mode::Exact { cap })?;
                series.push(e.entry(n))?;
            }
            (series, 0)
        }
    };
    write_series(out, "recurrence_rate.csv", &series, run.seed, samples)?;
    let mut s = Vec::new();
    writeln!(s, "delta = {delta}\nepsilon = {}", spec.epsilon)?;
    fit_block(&mut s, &fit_exponential_rate(&series))?;
    summary(out, "recurrence_rate_summary.txt", &String::from_utf8_lossy(&s))
}

pub fn escape_rate(run: &Run, map: &PiecewiseMap, out: &mut Artifacts) -> Result<(), CliError> {
    let spec = require(&run.cfg.escape, "escape")?;
    increasing(&spec.ns, "escape.ns")?;
    let limit = spec.interval_limit.unwrap_or(DEFAULT_INTERVAL_LIMIT);
    let mut series = DeviationSeries::default();
    let mut counts = Vec::new();
    for &n in &spec.ns {
        let set = survivor_measure(map, spec.delta, n, limit)?;
        counts.push(set.intervals.len());
        series.push(SeriesEntry { n, measure: set.total_measure, stderr: 0.0, method: Method::ExactIntervals })?;
    }
    write_series(out, "escape_rate.csv", &series, run.seed, 0)?;
    let mut s = Vec::new();
    writeln!(s, "delta = {}", spec.delta)?;
    let c: Vec<String> = counts.iter().map(|c| c.to_string()).collect();
    writeln!(s, "intervals = {}", c.join(";"))?;
    fit_block(&mut s, &fit_exponential_rate(&series))?;
    summary(out, "escape_rate_summary.txt", &String::from_utf8_lossy(&s))
}

fn base_observable(spec: &ObservableSpec, map: &PiecewiseMap) -> Result<FlowObservable, ConfigError> {
    Ok(match spec {
        ObservableSpec::X => FlowObservable::coordinate_x(),
        ObservableSpec::XCentered => FlowObservable::new("x_centered", 0.5, |x, _, _| x - 0.5),
        ObservableSpec::Y => FlowObservable::coordinate_y(),
        ObservableSpec::LogDistance { delta } => FlowObservable::log_distance(map, *delta)?,
        ObservableSpec::Bump { center, width } => FlowObservable::bump(*center, *width)?,
    })
}

fn densities(map: &PiecewiseMap, cells: usize, tol: f64) -> Result<(slowrec::acim::TransferMatrix, EquilibriumSet), CliError> {
    let p = build_ulam_matrix(map, cells)?;
    let e = stationary_densities(&p, tol)?;
    Ok((p, e))
}

pub fn acim(run: &Run, map: &PiecewiseMap, out: &mut Artifacts) -> Result<(), CliError> {
    let spec = require(&run.cfg.acim, "acim")?;
    let (p, mut e) = densities(map, spec.cells, spec.tolerance)?;
    let mut w = out.create("density.csv")?;
    e.write_csv(&mut w)?;
    drop(w);
    if spec.dump_matrix {
        let mut w = out.create("matrix.txt")?;
        p.write_triplets(&mut w)?;
    }
    let means = e.register("x", map, |x| x).to_vec();
    let mut s = format!("cells = {}\ncomponents = {}\n", spec.cells, e.densities.len());
    for (d, m) in e.densities.iter().zip(means) {
        s += &format!(
            "component {}: residual = {} operator_residual = {} mean_x = {m}\n",
            d.component_id,
            d.residual,
            operator_residual(map, d)
        );
    }
    summary(out, "acim_summary.txt", &s)
}

pub fn correlation(run: &Run, map: &PiecewiseMap, out: &mut Artifacts) -> Result<(), CliError> {
    let spec = require(&run.cfg.correlation, "correlation")?;
    let phi = base_observable(&spec.phi, map)?;
    let psi = base_observable(&spec.psi, map)?;
    let (p, e) = densities(map, spec.cells, spec.tolerance)?;
    let mut w = out.create("correlation.csv")?;
    writeln!(w, "component,n,correlation")?;
    let mut fits = Vec::new();
    for d in &e.densities {
        let c = correlation_estimate(d, &p, map, |x| phi.eval(x, 0.0, 0.0), |x| psi.eval(x, 0.0, 0.0), spec.n_max);
        for (n, v) in c.iter().enumerate() {
            writeln!(w, "{},{n},{v}", d.component_id)?;
        }
        let pts: Vec<(usize, f64)> = c.iter().copied().enumerate().skip(1).filter(|p| p.1 > 0.0).collect();
        fits.push(DeviationSeries::exact(pts).and_then(|s| fit_exponential_rate(&s)));
    }
    drop(w);
    let mut s = Vec::new();
    for (k, f) in fits.iter().enumerate() {
        writeln!(s, "[component {k}]")?;
        fit_block(&mut s, f)?;
    }
    summary(out, "correlation_summary.txt", &String::from_utf8_lossy(&s))
}

fn suspension(run: &Run, map: &PiecewiseMap) -> Result<(Suspension, InducedObservable), ConfigError> {
    let spec = require(&run.cfg.semiflow, "semiflow")?;
    increasing(&spec.times, "semiflow.times")?;
    let skew = SkewProduct::new(map.clone(), spec.lambda, Drift { slope: spec.drift_slope, offset: spec.drift_offset })?;
    let roof = RoofFunction::new(spec.tau0, spec.k, spec.delta_roof)?.with_fiber_term(spec.fiber_lipschitz)?;
    let psi = base_observable(&spec.observable, map)?;
    let phi = InducedObservable::new(psi, spec.step.unwrap_or(spec.tau0 / 64.0))?;
    Ok((Suspension::new(skew, roof), phi))
}

pub fn semiflow_deviation(run: &Run, map: &PiecewiseMap, out: &mut Artifacts) -> Result<(), CliError> {
    let spec = require(&run.cfg.semiflow, "semiflow")?;
    let (flow, phi) = suspension(run, map)?;
    let sampler = run.sampler(spec.samples)?;
    let (_, e) = densities(map, spec.cells, 1e-12)?;
    let targets = flow_targets(&e, &flow, &phi)?;
    let series = flow_deviation_series(&flow, &phi, &targets, spec.epsilon, &spec.times, &sampler)?;
    write_flow_series(out, "semiflow_deviation.csv", &series, run.seed)?;
    let mut s = Vec::new();
    let t: Vec<String> = targets.iter().map(|t| t.to_string()).collect();
    writeln!(s, "flow_means = {}\nepsilon = {}\nsamples = {}", t.join(";"), spec.epsilon, sampler.count)?;
    fit_block(&mut s, &fit_exponential_rate(&series))?;
    summary(out, "semiflow_deviation_summary.txt", &String::from_utf8_lossy(&s))
}

pub fn semiflow_escape(run: &Run, map: &PiecewiseMap, out: &mut Artifacts) -> Result<(), CliError> {
    let spec = require(&run.cfg.semiflow, "semiflow")?;
    let (flow, _) = suspension(run, map)?;
    let sampler = run.sampler(spec.samples)?;
    let k = BaseSet::complement_of(&spec.escape_holes);
    let series = flow_escape_series(&flow, &k, &spec.times, &sampler)?;
    write_flow_series(out, "semiflow_escape.csv", &series, run.seed)?;
    let mut s = Vec::new();
    writeln!(s, "samples = {}", sampler.count)?;
    fit_block(&mut s, &fit_exponential_rate(&series))?;
    summary(out, "semiflow_escape_summary.txt", &String::from_utf8_lossy(&s))
}
