//! One PASS/FAIL line per acceptance criterion.
//!
//! Runs without the test harness so the report is always printed:
//! `cargo test -p slowrec --test acceptance`. Criteria known to fail are
//! listed in `KNOWN_FAILURES`; the run fails if the observed set of failures
//! differs from that list.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slowrec::acim::{build_ulam_matrix, correlation_estimate, operator_residual, stationary_densities};
use slowrec::map::{make_doubling_map, make_lorenz_map, PiecewiseMap};
use slowrec::partition::bounds::{max_return_gap, zeta0};
use slowrec::partition::{
    build_initial_partition, check_nesting, choose_thresholds, class_measure, gap_violations, max_distortion,
    predicted_class_bound, refine_levels, verify_grid_constants, GridSequence, InitialPartition, Overflow,
    RefinedAtom, ReturnClass, ThresholdOptions,
};
use slowrec::semiflow::{
    flow_deviation_series, flow_targets, flow_time_average, Drift, FlowObservable, InducedObservable, RoofFunction,
    SkewProduct, Suspension,
};
use slowrec::stats::survivors::DEFAULT_INTERVAL_LIMIT;
use slowrec::stats::{
    fit_exponential_rate, recurrence_deviation_series, survivor_measure, with_workers, DeviationSeries, Method,
    Sampler, SeriesEntry,
};

/// The return-gap bound and the nesting check fail at level 15 (see README).
/// The correlation target ratio of 1/4 is not what the closed form gives.
const KNOWN_FAILURES: &[u32] = &[2, 7];

struct Report {
    failed: Vec<u32>,
}

impl Report {
    fn line(&mut self, k: u32, pass: bool, detail: String) {
        println!("criterion {k:2}: {} {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.failed.push(k);
        }
    }
}

fn lorenz_setup() -> (PiecewiseMap, InitialPartition) {
    let f = make_lorenz_map(0.6).unwrap();
    let g = GridSequence::new(0.3, 0.6).unwrap();
    let t = choose_thresholds(&f, &g, 0.5, &ThresholdOptions::default()).unwrap();
    let p = build_initial_partition(&f, &t, 500).unwrap();
    (f, p)
}

fn skew_flow() -> Suspension {
    let sp = SkewProduct::new(make_lorenz_map(0.6).unwrap(), 0.5, Drift { slope: 0.4, offset: 0.0 }).unwrap();
    Suspension::new(sp, RoofFunction::new(1.0, 1.0, 0.05).unwrap())
}

fn x_induced() -> InducedObservable {
    InducedObservable::new(FlowObservable::coordinate_x(), 1.0 / 64.0).unwrap()
}

/// Survivor measure of the doubling map in exact integer arithmetic, by
/// following each interval forward; positions are multiples of 2^-80.
fn doubling_survivors_exact(delta: f64, n: u32) -> f64 {
    const ONE: u128 = 1 << 80;
    let exact = |x: f64| -> u128 {
        let scaled = x * 2f64.powi(80);
        assert_eq!(scaled.fract(), 0.0);
        scaled as u128
    };
    let g = (exact(delta), exact(1.0 - delta));
    fn walk(lo: u128, hi: u128, k: u32, g: (u128, u128)) -> u128 {
        if k == 0 {
            return (hi - lo) << 40;
        }
        let mut sum = 0;
        for (a, b, shift) in [(lo, hi.min(ONE / 2), 0), (lo.max(ONE / 2), hi, ONE)] {
            if a < b {
                let (a, b) = ((2 * a - shift).max(g.0), (2 * b - shift).min(g.1));
                if a < b {
                    sum += walk(a, b, k - 1, g) >> 1;
                }
            }
        }
        sum
    }
    walk(0, ONE, n - 1, g) as f64 * 2f64.powi(-120)
}

fn grid_constants(r: &mut Report) {
    let start = Instant::now();
    let g = GridSequence::new(0.5, 0.5).unwrap();
    let c = verify_grid_constants(&g, 1_000_000, 1.0).unwrap();
    let ratio = g.gap_ratio(100_000);
    let secs = start.elapsed().as_secs_f64();
    let pass = c.k0.is_finite()
        && c.k1.is_finite()
        && c.k1 >= 1.0 + 2.0 * c.k0
        && (ratio / 4.0 - 1.0).abs() < 0.05
        && secs < 1.0;
    r.line(1, pass, format!("K0 = {:.4} K1 = {:.4} ratio(1e5) = {ratio:.6} in {secs:.2}s", c.k0, c.k1));
}

fn partition_invariants(
    r: &mut Report,
    f: &PiecewiseMap,
    p: &InitialPartition,
    levels: &[(Vec<RefinedAtom>, Overflow)],
    secs: f64,
) {
    let (atoms, over) = &levels[15];
    let disjoint = atoms.windows(2).all(|w| w[0].hi <= w[1].lo);
    let mass = atoms.iter().map(RefinedAtom::len).sum::<f64>() + p.leftover + over.total();
    let nesting = atoms.iter().filter(|a| !check_nesting(f, p, a, 1e-9)).count();
    let gaps: usize = atoms.iter().map(|a| gap_violations(f, p, a).len()).sum();
    let pass = disjoint && (mass - 1.0).abs() < 1e-8 && nesting == 0 && gaps == 0 && secs < 120.0;
    r.line(
        2,
        pass,
        format!(
            "{} atoms, disjoint {disjoint}, mass error {:.1e}, nesting failures {nesting}, gap violations {gaps}, {secs:.1}s",
            atoms.len(),
            (mass - 1.0).abs()
        ),
    );
}

fn distortion(r: &mut Report, f: &PiecewiseMap, levels: &[(Vec<RefinedAtom>, Overflow)]) -> f64 {
    let d8 = max_distortion(&levels[7].0, f, 64);
    let d16 = max_distortion(&levels[15].0, f, 64);
    r.line(3, d16 <= 1.1 * d8, format!("D(8) = {d8:.4} D(16) = {d16:.4} ratio {:.4}", d16 / d8));
    max_distortion(&levels[9].0, f, 64)
}

fn recurrence_rate(r: &mut Report, f: &PiecewiseMap, p: &InitialPartition) {
    let ns: Vec<usize> = (10..=60).step_by(5).collect();
    let s = recurrence_deviation_series(f, p.thresholds.delta.delta, 0.5, &ns, &Sampler::new(4, 1_000_000)).unwrap();
    let fit = fit_exponential_rate(&s).unwrap();
    r.line(
        4,
        fit.ci95_upper < 0.0 && fit.r_squared >= 0.8,
        format!(
            "slope {:.4} ci95_upper {:.4} r2 {:.4} below resolution {:?}",
            fit.slope, fit.ci95_upper, fit.r_squared, fit.below_resolution
        ),
    );
}

fn escape_oracle(r: &mut Report) {
    let f = make_doubling_map();
    let two = survivor_measure(&f, 0.1, 2, DEFAULT_INTERVAL_LIMIT).unwrap().total_measure;
    let mut series = DeviationSeries::default();
    let mut mismatches = Vec::new();
    for n in 1..=20u32 {
        let m = survivor_measure(&f, 0.1, n as usize, DEFAULT_INTERVAL_LIMIT).unwrap().total_measure;
        if m.to_bits() != doubling_survivors_exact(0.1, n).to_bits() {
            mismatches.push(n);
        }
        if n >= 2 {
            series
                .push(SeriesEntry { n: n as usize, measure: m, stderr: 0.0, method: Method::ExactIntervals })
                .unwrap();
        }
    }
    let fit = fit_exponential_rate(&series).unwrap();
    let pass = two == 0.8 && mismatches.is_empty() && fit.slope < 0.0 && fit.r_squared >= 0.999;
    r.line(
        5,
        pass,
        format!("n=2 gives {two}, oracle mismatches {mismatches:?}, slope {:.5} r2 {:.6}", fit.slope, fit.r_squared),
    );
}

fn ulam(r: &mut Report) {
    let f = make_doubling_map();
    let p = build_ulam_matrix(&f, 1024).unwrap();
    let e = stationary_densities(&p, 1e-12).unwrap();
    let w = p.grid.width();
    let l1: f64 = e.densities[0].values.iter().map(|h| (h - 1.0).abs() * w).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut mass_err: f64 = 0.0;
    for _ in 0..100 {
        let h: Vec<f64> = (0..p.size()).map(|_| rng.gen::<f64>()).collect();
        let total: f64 = h.iter().sum::<f64>() * w;
        let h: Vec<f64> = h.iter().map(|v| v / total).collect();
        let after: f64 = p.apply(&h).iter().sum::<f64>() * w;
        mass_err = mass_err.max((after - 1.0).abs());
    }
    let g = make_lorenz_map(0.6).unwrap();
    let res: Vec<f64> = [1024, 2048, 4096]
        .iter()
        .map(|&n| {
            let q = build_ulam_matrix(&g, n).unwrap();
            let d = stationary_densities(&q, 1e-12).unwrap();
            operator_residual(&g, &d.densities[0])
        })
        .collect();
    let pass = e.densities.len() == 1 && l1 < 1e-6 && mass_err < 1e-12 && res[0] > res[1] && res[1] > res[2];
    r.line(6, pass, format!("L1 {l1:.1e}, mass error {mass_err:.1e}, Lorenz residuals {}", res.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>().join(" > ")));
}

fn correlation(r: &mut Report) {
    let f = make_doubling_map();
    let n = 16384;
    let p = build_ulam_matrix(&f, n).unwrap();
    let e = stationary_densities(&p, 1e-12).unwrap();
    let c = correlation_estimate(&e.densities[0], &p, &f, |x| x - 0.5, |x| x - 0.5, 10);
    let closed = |k: i32| 2f64.powi(-k) / 12.0;
    let mut worst_target: f64 = 0.0;
    let mut worst_oracle: f64 = 0.0;
    for k in 1..10 {
        let ratio = c[k + 1] / c[k];
        worst_target = worst_target.max((ratio / 0.25 - 1.0).abs());
        worst_oracle = worst_oracle.max((ratio / (closed(k as i32 + 1) / closed(k as i32)) - 1.0).abs());
    }
    r.line(
        7,
        worst_target <= 0.05,
        format!(
            "ratio C(n+1)/C(n) = {:.5}, off 1/4 by {:.0}%, off the closed-form ratio by {:.1e}",
            c[2] / c[1],
            worst_target * 100.0,
            worst_oracle
        ),
    );
}

fn semiflow_identities(r: &mut Report) {
    let flow = skew_flow();
    let phi = x_induced();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut state = || {
        let x: f64 = rng.gen_range(0.0..1.0);
        let y: f64 = rng.gen_range(-1.0..1.0);
        let tau = flow.tau(x, y).unwrap();
        let s = rng.gen_range(0.0..1.0) * tau;
        let t1 = rng.gen_range(0.0..20.0);
        let t2 = rng.gen_range(0.0..20.0);
        (flow.state(x, y, s).unwrap(), t1, t2)
    };
    let samples: Vec<_> = (0..10_000).map(|_| state()).collect();
    let mut sandwich = 0;
    let mut semigroup: f64 = 0.0;
    let mut bound_fail = 0;
    for &(z, t1, t2) in &samples {
        let lap = flow.lap_number(z, t1).unwrap();
        if !(lap.s_n <= z.s + t1 && z.s + t1 < lap.s_next) {
            sandwich += 1;
        }
        let a = flow.evolve(flow.evolve(z, t1).unwrap(), t2).unwrap();
        let b = flow.evolve(z, t1 + t2).unwrap();
        semigroup = semigroup.max((a.x - b.x).abs().max((a.y - b.y).abs()).max((a.s - b.s).abs()));
        let avg = flow_time_average(&flow, &phi, z, t1 + t2 + 1.0).unwrap();
        if avg.correction.abs() > avg.bound {
            bound_fail += 1;
        }
    }
    let pass = sandwich == 0 && semigroup <= 1e-10 && bound_fail == 0;
    r.line(
        8,
        pass,
        format!("sandwich failures {sandwich}, semigroup error {semigroup:.1e}, bound failures {bound_fail}"),
    );
}

fn flow_rate(r: &mut Report) {
    let flow = skew_flow();
    let phi = x_induced();
    let q = build_ulam_matrix(flow.base(), 4096).unwrap();
    let e = stationary_densities(&q, 1e-12).unwrap();
    let targets = flow_targets(&e, &flow, &phi).unwrap();
    let s = flow_deviation_series(&flow, &phi, &targets, 0.1, &[50, 100, 200, 400], &Sampler::new(9, 100_000))
        .unwrap();
    let fit = fit_exponential_rate(&s).unwrap();
    r.line(
        9,
        fit.ci95_upper < 0.0,
        format!("slope {:.4} ci95_upper {:.4} r2 {:.4}", fit.slope, fit.ci95_upper, fit.r_squared),
    );
}

fn class_bounds(
    r: &mut Report,
    f: &PiecewiseMap,
    p: &InitialPartition,
    levels: &[(Vec<RefinedAtom>, Overflow)],
    d10: f64,
) {
    let atoms = &levels[10].0;
    let z = zeta0(f, p, d10, max_return_gap(atoms) as f64);
    let classes = [
        ReturnClass { times: vec![], depths: vec![] },
        ReturnClass { times: vec![5], depths: vec![(0, 1)] },
        ReturnClass { times: vec![5], depths: vec![(1, 1)] },
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for c in &classes {
        let m = class_measure(atoms, c);
        let b = predicted_class_bound(10, c, p, f.sigma, z);
        pass &= m <= b;
        parts.push(format!("times {:?} depths {:?}: {m:.3e} <= {b:.3e}", c.times, c.depths));
    }
    r.line(10, pass, parts.join(", "));
}

fn determinism(r: &mut Report, f: &PiecewiseMap, p: &InitialPartition) {
    let run = || {
        let s = recurrence_deviation_series(f, p.thresholds.delta.delta, 0.5, &[10, 20, 30], &Sampler::new(11, 100_000))
            .unwrap();
        let flow = skew_flow();
        let t = flow_deviation_series(&flow, &x_induced(), &[0.5], 0.1, &[50, 100], &Sampler::new(11, 10_000)).unwrap();
        s.entries.iter().chain(&t.entries).map(|e| (e.measure.to_bits(), e.stderr.to_bits())).collect::<Vec<_>>()
    };
    let one = with_workers(1, run);
    let four = with_workers(4, run);
    let seven = with_workers(7, run);
    r.line(11, one == four && one == seven, format!("{} measures compared across 1, 4 and 7 workers", one.len()));
}

fn main() {
    let mut r = Report { failed: Vec::new() };
    grid_constants(&mut r);
    let start = Instant::now();
    let (f, p) = lorenz_setup();
    let levels = refine_levels(&f, &p, 15);
    let secs = start.elapsed().as_secs_f64();
    partition_invariants(&mut r, &f, &p, &levels, secs);
    let d10 = distortion(&mut r, &f, &levels);
    recurrence_rate(&mut r, &f, &p);
    escape_oracle(&mut r);
    ulam(&mut r);
    correlation(&mut r);
    semiflow_identities(&mut r);
    flow_rate(&mut r);
    class_bounds(&mut r, &f, &p, &levels, d10);
    determinism(&mut r, &f, &p);
    if r.failed != KNOWN_FAILURES {
        eprintln!("failed {:?}, expected {:?}", r.failed, KNOWN_FAILURES);
        std::process::exit(1);
    }
}
