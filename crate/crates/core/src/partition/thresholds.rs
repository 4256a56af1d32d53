//! Depth thresholds `ρ(c)`, `ρ₀`, `Θ` and the truncation radius.

use crate::error::{Error, Result};
use crate::map::{PiecewiseMap, TruncationParams};
use crate::precise::{self, Dd};

use super::geometry::{self, Anchor};
use super::grid::{verify_grid_constants, GridConstants, GridSequence};

/// Tuning knobs for [`choose_thresholds`].
#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdOptions {
    /// Largest `ρ₀` or `Θ` tried.
    pub cap: usize,
    /// Position of `β₃` inside its admissible interval, in `(0,1)`.
    /// `None` picks the value giving the smallest `Θ`.
    pub theta3: Option<f64>,
    /// `z` as a fraction of its admissible range.
    pub theta_z: f64,
    /// Distortion bound `D` entering `L`.
    pub distortion: f64,
    /// Depths above `ρ₀` checked for the per-depth inequalities.
    pub window: usize,
}

impl Default for ThresholdOptions {
    fn default() -> Self {
        ThresholdOptions {
            cap: 100_000,
            theta3: None,
            theta_z: 0.1,
            distortion: 2.0,
            window: 64,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Thresholds {
    pub grid: GridSequence,
    pub constants: GridConstants,
    pub epsilon0: f64,
    pub anchors: Vec<Anchor>,
    /// `ρ(c)` per map point; `None` for removable points.
    pub rho: Vec<Option<usize>>,
    pub rho0: usize,
    pub theta: usize,
    pub delta: TruncationParams,
    pub beta2: f64,
    pub beta3: f64,
    pub z: f64,
    pub ell: usize,
    pub beta_under: f64,
    /// Whether `β̲ <= β₂` could be met together with `β̲ > 0`.
    pub beta_under_below_beta2: bool,
    /// `κ₀` as the numerical limit of `κ₀(ρ₀)` (1 without
    /// discontinuities).
    pub kappa0: f64,
    /// Closed form `sup 2^{1-β₂} δ_c δ_{c'}^{-β₂}`, reported alongside.
    pub kappa0_closed_form: f64,
    /// `κ₀(ρ₀)` at the chosen `ρ₀`.
    pub kappa0_at_rho0: f64,
    pub big_l: f64,
    pub comparability: f64,
    pub distortion: f64,
    pub k2: f64,
    /// `S(ρ₀, β₃-β₂)` and `S(Θ, β₃-β₂-z)`.
    pub tail_rho0: f64,
    pub tail_theta: f64,
}

impl Thresholds {
    /// `ρ(c)` for an anchor (`ρ₀` for connected points).
    pub fn depth_floor(&self, anchor: &Anchor) -> usize {
        self.rho[anchor.point].unwrap_or(self.rho0)
    }

    /// Number of non-removable boundary points, `#D`.
    pub fn boundary_count(&self) -> usize {
        self.anchors.len()
    }
}

/// `S(ρ, ξ) = #D Σ_{p≥ρ} (a_p - a_{p+1})^ξ`, an upper bound with the tail
/// beyond 4096 terms bounded by an integral. Infinite if not summable.
pub fn tail_sum(seq: &GridSequence, count: usize, rho: usize, xi: f64) -> f64 {
    let g = seq.gamma;
    let e = (1.0 - g) * xi - 1.0;
    if !(e > 0.0) {
        return f64::INFINITY;
    }
    const TERMS: usize = 4096;
    let mut s = 0.0;
    for p in rho..rho + TERMS {
        s += seq.gap(p).powf(xi);
    }
    // gap(p) <= -γ p^{γ-1}, and the sum over p >= P is below the integral
    // from P - 1.
    let last = (rho + TERMS) as f64 - 1.0;
    s += (-g).powf(xi) * last.powf(-e) / e;
    count as f64 * s
}

/// Placement of the escape interval next to one anchor.
#[derive(Clone, Copy, Debug)]
struct EscapeGap {
    len: f64,
    /// `|M(c, ρ₀-1)^+|`.
    plus_len: f64,
}

/// Escape intervals for given depth floors: the gaps left between the
/// anchors' grid regions.
fn escape_gaps(map: &PiecewiseMap, seq: &GridSequence, anchors: &[Anchor], floors: &[usize]) -> Result<Option<Vec<EscapeGap>>> {
    struct Region {
        lo: Dd,
        hi: Dd,
        anchor: usize,
        outer_is_hi: bool,
    }
    let mut regions = Vec::with_capacity(anchors.len());
    for (k, a) in anchors.iter().enumerate() {
        let c = map.points[a.point].location;
        let outer = geometry::cut(map, a, seq.value_dd(floors[k]))?;
        let outer_is_hi = outer > c;
        let (lo, hi) = if outer_is_hi { (precise::dd(c), outer) } else { (outer, precise::dd(c)) };
        regions.push(Region { lo, hi, anchor: k, outer_is_hi });
    }
    regions.sort_by(|a, b| a.lo.partial_cmp(&b.lo).expect("finite"));
    for w in regions.windows(2) {
        if w[1].lo < w[0].hi {
            return Ok(None);
        }
    }
    let outer_len = |k: usize| geometry::atom_length(map, seq, &anchors[k], floors[k]);
    let mut out = vec![EscapeGap { len: 0.0, plus_len: 0.0 }; anchors.len()];
    for (i, r) in regions.iter().enumerate() {
        let (len, neighbour) = if r.outer_is_hi {
            match regions.get(i + 1) {
                Some(n) => (precise::to_f64(n.lo - r.hi), (!n.outer_is_hi).then_some(n.anchor)),
                None => (1.0 - precise::to_f64(r.hi), None),
            }
        } else if i > 0 {
            let n = &regions[i - 1];
            (precise::to_f64(r.lo - n.hi), n.outer_is_hi.then_some(n.anchor))
        } else {
            (precise::to_f64(r.lo), None)
        };
        let mut plus_len = len + outer_len(r.anchor)?;
        if let Some(n) = neighbour {
            plus_len += outer_len(n)?;
        }
        out[r.anchor] = EscapeGap { len, plus_len };
    }
    Ok(Some(out))
}

fn singular_k2(map: &PiecewiseMap, seq: &GridSequence, anchors: &[Anchor], rho: &[Option<usize>]) -> Result<f64> {
    let q = 1.0 / (1.0 + seq.eb());
    let mut k2: f64 = 1.0;
    for a in anchors.iter().filter(|a| a.singular) {
        let floor = rho[a.point].expect("singular anchor");
        for p in floor..floor + 4096 {
            let r = geometry::atom_distance(map, seq, a, p)? / geometry::atom_length(map, seq, a, p)?.powf(q);
            k2 = k2.max(r).max(1.0 / r);
        }
    }
    Ok(k2)
}

/// Smallest grid radius the search will use.
const PRECISION_FLOOR: f64 = 1e-24;

/// Depth standing in for `ρ₀ → ∞` when estimating the limit of `κ₀(ρ₀)`.
const KAPPA_LIMIT_DEPTH: usize = 2000;

/// `κ₀(ρ₀) = sup |M(c,ρ₀-1)^+| / |M(c',ρ₀-1)|` over connected anchors, or
/// `None` if the grid regions overlap.
fn kappa_at(map: &PiecewiseMap, seq: &GridSequence, anchors: &[Anchor], rho: &[Option<usize>], rho0: usize) -> Result<Option<f64>> {
    let floors: Vec<usize> = anchors.iter().map(|a| rho[a.point].unwrap_or(rho0)).collect();
    let Some(gaps) = escape_gaps(map, seq, anchors, &floors)? else { return Ok(None) };
    Ok(Some(kappa_from(anchors, &gaps)))
}

fn kappa_from(anchors: &[Anchor], gaps: &[EscapeGap]) -> f64 {
    let mut sup: f64 = 0.0;
    for (k, a) in anchors.iter().enumerate() {
        for (j, b) in anchors.iter().enumerate() {
            if !a.singular && !b.singular {
                sup = sup.max(gaps[k].plus_len / gaps[j].len);
            }
        }
    }
    sup
}

struct Attempt {
    rho0: usize,
    theta: usize,
    beta3: f64,
    z: f64,
    kappa0_at_rho0: f64,
    big_l: f64,
    k2: f64,
    tail_rho0: f64,
    tail_theta: f64,
}

struct Fixed<'a> {
    map: &'a PiecewiseMap,
    seq: &'a GridSequence,
    anchors: &'a [Anchor],
    rho: &'a [Option<usize>],
    consts: GridConstants,
    beta2: f64,
    beta_under: f64,
    kappa0: f64,
    b: f64,
    epsilon0: f64,
    opts: &'a ThresholdOptions,
    /// Spread over the singular anchors' atoms, which does not move with ρ₀.
    k2_singular: f64,
}

impl Fixed<'_> {
    fn floors(&self, rho0: usize) -> Vec<usize> {
        self.anchors.iter().map(|a| self.rho[a.point].unwrap_or(rho0)).collect()
    }

    /// Largest spread of `d(M,D) / |M|^{1/(1+ε₁β₁)}` over the checked atoms.
    fn k2(&self, rho0: usize) -> Result<f64> {
        let q = 1.0 / (1.0 + self.seq.eb());
        let mut k2 = self.k2_singular;
        for a in self.anchors.iter().filter(|a| !a.singular) {
            for p in rho0..rho0 + self.opts.window {
                let r = geometry::atom_distance(self.map, self.seq, a, p)?
                    / geometry::atom_length(self.map, self.seq, a, p)?.powf(q);
                k2 = k2.max(r).max(1.0 / r);
            }
        }
        Ok(k2)
    }

    /// First violated condition at this `ρ₀`, if any.
    fn violation(&self, rho0: usize, beta3: f64) -> Result<(Option<&'static str>, f64, f64, f64)> {
        let (map, seq, anchors) = (self.map, self.seq, self.anchors);
        let floors = self.floors(rho0);
        let a_rho0 = seq.value(rho0);
        let dmin = anchors.iter().filter(|a| !a.singular);
        let has_discont = anchors.iter().any(|a| !a.singular);
        // Pull-backs stay inside the connection neighbourhood.
        for a in dmin.clone() {
            let conn = map.points[a.point].connection.as_ref().expect("connected anchor");
            let t = &map.points[conn.target];
            let probe = map.points[a.point].offset_dd(precise::dd(conn.reach));
            let img = crate::map::families::pull_forward_dd(map, &conn.branch_path, probe);
            let eps = precise::to_f64(precise::abs(img - t.location));
            if !(a_rho0 < eps) {
                return Ok((Some("pull-back domain"), 0.0, 0.0, 0.0));
            }
        }
        // Intermediate images of connected points stay away from D.
        let bar = seq.value(rho0 - 1);
        for a in dmin.clone() {
            let c = &map.points[a.point];
            let orbit = geometry::connection_orbit(map, c);
            for &y in &orbit[1..orbit.len() - 1] {
                if !(map.distance_to_set(y) > bar) {
                    return Ok((Some("connection clearance"), 0.0, 0.0, 0.0));
                }
            }
        }
        let Some(gaps) = escape_gaps(map, seq, anchors, &floors)? else {
            return Ok((Some("grid regions overlap"), 0.0, 0.0, 0.0));
        };
        let k2 = self.k2(rho0)?;
        let mut kappa_at = 1.0;
        if has_discont {
            kappa_at = kappa_from(anchors, &gaps);
            let r = kappa_at / self.kappa0;
            if !(0.5..=1.5).contains(&r) {
                return Ok((Some("escape-interval ratio"), kappa_at, 0.0, k2));
            }
            for (k, a) in anchors.iter().enumerate() {
                if !a.singular {
                    let m = gaps[k].len;
                    if !(map.sigma * m > m.powf(self.beta_under)) {
                        return Ok((Some("escape-interval expansion"), kappa_at, 0.0, k2));
                    }
                }
            }
        }
        let d = self.opts.distortion;
        let (k0, k1) = (self.consts.k0, self.consts.k1);
        let big_l = self.kappa0 * self.b * d * d * (k1 * k0).powf(self.beta2 - 1.0);
        let l3 = big_l.powi(-3);
        let min_escape = anchors
            .iter()
            .enumerate()
            .filter(|(_, a)| !a.singular)
            .map(|(k, _)| gaps[k].len)
            .fold(f64::INFINITY, f64::min);
        let factor = self.b * k1.powf(1.0 - self.beta2) * k2.powf(1.0 - self.seq.beta1);
        let q = 1.0 / (1.0 + seq.eb());
        for a in anchors {
            for p in rho0..rho0 + self.opts.window {
                let m = geometry::atom_length(map, seq, a, p)?;
                if p > rho0 {
                    let plus = geometry::atom_length(map, seq, a, p - 1)? + m + geometry::atom_length(map, seq, a, p + 1)?;
                    if !(plus / m.powf(beta3) <= l3) {
                        return Ok((Some("deep atoms versus L"), kappa_at, big_l, k2));
                    }
                }
                if !(m <= min_escape) {
                    return Ok((Some("atoms below escape intervals"), kappa_at, big_l, k2));
                }
                if !(m.powf(beta3 - self.beta2) * factor <= 1.0) {
                    return Ok((Some("depth factor"), kappa_at, big_l, k2));
                }
                if !(m.powf(q) >= k2 * m) {
                    return Ok((Some("distance factor"), kappa_at, big_l, k2));
                }
            }
        }
        let count = anchors.len();
        if !(tail_sum(seq, count, rho0, beta3 - self.beta2) < self.epsilon0 / 2.0) {
            return Ok((Some("tail sum at rho0"), kappa_at, big_l, k2));
        }
        Ok((None, kappa_at, big_l, k2))
    }

    fn attempt(&self, theta3: f64) -> Result<std::result::Result<Attempt, &'static str>> {
        let lambda3 = self.beta2 + self.seq.eb() / (1.0 + self.seq.eb());
        let beta3 = lambda3 + theta3 * (1.0 - lambda3);
        let z = self.opts.theta_z * (1.0 / (1.0 + self.seq.eb())).min(beta3 - lambda3);
        let start = self
            .anchors
            .iter()
            .filter_map(|a| self.rho[a.point])
            .max()
            .expect("a singular anchor")
            + 1;
        // The tail condition is monotone in ρ₀ and fixes a lower bound.
        let count = self.anchors.len();
        let tail_ok = |r: usize| tail_sum(self.seq, count, r, beta3 - self.beta2) < self.epsilon0 / 2.0;
        let start = start.max(2);
        if !tail_ok(self.opts.cap) {
            return Ok(Err("tail sum at rho0"));
        }
        let (mut lo, mut hi) = (start - 1, self.opts.cap);
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if tail_ok(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let mut last = "cap";
        let mut found = None;
        // Past this depth the grid cuts fall below double-double resolution.
        let deepest = self.seq.first_below(PRECISION_FLOOR).min(self.opts.cap);
        if hi.max(start) > deepest {
            return Ok(Err("tail sum at rho0"));
        }
        // Gallop to a passing depth, then bisect back down; the per-depth
        // conditions only get easier as ρ₀ grows.
        let mut check = |rho0: usize| -> Result<Option<(f64, f64, f64)>> {
            match self.violation(rho0, beta3) {
                Ok((None, kappa_at, big_l, k2)) => Ok(Some((kappa_at, big_l, k2))),
                Ok((Some(why), ..)) => {
                    last = why;
                    Ok(None)
                }
                Err(Error::PullbackFailure { .. }) => {
                    last = "pull-back domain";
                    Ok(None)
                }
                Err(e) => Err(e),
            }
        };
        let first = hi.max(start);
        let mut fail = first - 1;
        let mut step = 1;
        let mut probe = first;
        loop {
            if let Some(v) = check(probe)? {
                found = Some((probe, v));
                break;
            }
            fail = probe;
            if probe == deepest {
                break;
            }
            probe = (probe + step).min(deepest);
            step *= 2;
        }
        if let Some((mut pass, mut v)) = found {
            while pass - fail > 1 {
                let mid = fail + (pass - fail) / 2;
                match check(mid)? {
                    Some(w) => {
                        pass = mid;
                        v = w;
                    }
                    None => fail = mid,
                }
            }
            found = Some((pass, v));
        }
        let found = found.map(|(r, (a, b, c))| (r, a, b, c));
        let Some((rho0, kappa0_at_rho0, big_l, k2)) = found else { return Ok(Err(last)) };
        let xi = beta3 - self.beta2 - z;
        let below = |t: usize| tail_sum(self.seq, count, t, xi) < self.epsilon0 / 2.0;
        if !below(self.opts.cap) {
            return Ok(Err("tail sum at theta"));
        }
        let (mut lo, mut hi) = (rho0, self.opts.cap);
        if below(rho0 + 1) {
            hi = rho0 + 1;
        } else {
            while hi - lo > 1 {
                let mid = lo + (hi - lo) / 2;
                if below(mid) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
        }
        Ok(Ok(Attempt {
            rho0,
            theta: hi,
            beta3,
            z,
            kappa0_at_rho0,
            big_l,
            k2,
            tail_rho0: tail_sum(self.seq, count, rho0, beta3 - self.beta2),
            tail_theta: tail_sum(self.seq, count, hi, xi),
        }))
    }
}

/// Pick the depth thresholds and the truncation radius.
pub fn choose_thresholds(
    map: &PiecewiseMap,
    seq: &GridSequence,
    epsilon0: f64,
    opts: &ThresholdOptions,
) -> Result<Thresholds> {
    if !(epsilon0 > 0.0 && epsilon0 < 1.0) {
        return Err(Error::NoFeasibleThreshold {
            condition: format!("epsilon0 = {epsilon0} outside (0,1)"),
            cap: opts.cap,
        });
    }
    if let Some(t) = opts.theta3 {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::InvalidParameters(format!("theta3 {t} outside (0,1)")));
        }
    }
    if !(opts.theta_z > 0.0 && opts.theta_z < 1.0) {
        return Err(Error::InvalidParameters(format!("theta_z {} outside (0,1)", opts.theta_z)));
    }
    let anchors = geometry::anchors(map)?;
    let mut rho = vec![None; map.points.len()];
    for a in anchors.iter().filter(|a| a.singular) {
        rho[a.point] = Some(seq.first_below(map.points[a.point].half_gap));
    }
    let floor = map.sigma.powi(map.max_connection_steps() as i32);
    let consts = verify_grid_constants(seq, 100_000, floor)?;
    let beta2 = (1.0 + seq.epsilon1) * seq.beta1 / (1.0 + seq.eb());
    let b = map.points.iter().filter(|p| !p.removable).map(|p| p.comparability).fold(1.0, f64::max);

    let gaps: Vec<f64> = anchors
        .iter()
        .filter(|a| !a.singular)
        .map(|a| map.points[a.point].half_gap)
        .collect();
    let kappa0_closed_form = if gaps.is_empty() {
        1.0
    } else {
        let mut k: f64 = 0.0;
        for &dc in &gaps {
            for &dc2 in &gaps {
                k = k.max(2f64.powf(1.0 - beta2) * dc * dc2.powf(-beta2));
            }
        }
        k
    };
    let kappa0 = if gaps.is_empty() {
        1.0
    } else {
        kappa_at(map, seq, &anchors, &rho, KAPPA_LIMIT_DEPTH)?
            .ok_or_else(|| Error::PullbackFailure { target: f64::NAN })?
    };
    // β̲_ℓ = 1 + X/ℓ with X < 0. The least ℓ with β̲ > 0 and a strict
    // expansion margin at the limiting escape length.
    let x = gaps
        .iter()
        .map(|&dc| map.sigma.ln() / (2.0 * dc).ln())
        .fold(f64::NEG_INFINITY, f64::max);
    let (ell, beta_under) = if gaps.is_empty() {
        (1, beta2)
    } else {
        let mut ell = 1;
        loop {
            let bu = 1.0 + x / ell as f64;
            let strict = gaps.iter().all(|&dc| map.sigma * (2.0 * dc).powf(1.0 - bu) > 1.0 + 1e-9);
            if bu > 0.0 && strict {
                break (ell, bu);
            }
            ell += 1;
        }
    };

    let fixed = Fixed {
        map,
        seq,
        anchors: &anchors,
        rho: &rho,
        consts,
        beta2,
        beta_under,
        kappa0,
        b,
        epsilon0,
        opts,
        k2_singular: 1.0,
    };
    let mut fixed = fixed;
    fixed.k2_singular = singular_k2(map, seq, &anchors, &rho)?;
    let candidates: Vec<f64> = match opts.theta3 {
        Some(t) => vec![t],
        None => (1..=32).map(|i| i as f64 / 33.0).collect(),
    };
    let mut best: Option<Attempt> = None;
    let mut why = "cap";
    for t in candidates {
        match fixed.attempt(t)? {
            Ok(a) => {
                let better = match &best {
                    None => true,
                    Some(b) => (a.theta, a.rho0) < (b.theta, b.rho0),
                };
                if better {
                    best = Some(a);
                }
            }
            Err(w) => why = w,
        }
    }
    let Some(att) = best else {
        return Err(Error::NoFeasibleThreshold { condition: why.to_string(), cap: opts.cap });
    };

    // 2δ below the clearance of the connection orbits and below the
    // distance from D of every outermost atom.
    let floors = fixed.floors(att.rho0);
    let mut clearance = f64::INFINITY;
    if anchors.iter().any(|a| !a.singular) {
        clearance = seq.value(att.rho0 - 1);
    }
    for (k, a) in anchors.iter().enumerate() {
        clearance = clearance.min(geometry::atom_distance(map, seq, a, floors[k])?);
    }
    let delta = TruncationParams::new((0.999 * 0.5 * clearance).min(0.499))?;

    Ok(Thresholds {
        grid: *seq,
        constants: consts,
        epsilon0,
        anchors: anchors.clone(),
        rho,
        rho0: att.rho0,
        theta: att.theta,
        delta,
        beta2,
        beta3: att.beta3,
        z: att.z,
        ell,
        beta_under,
        beta_under_below_beta2: beta_under <= beta2,
        kappa0,
        kappa0_closed_form,
        kappa0_at_rho0: att.kappa0_at_rho0,
        big_l: att.big_l,
        comparability: b,
        distortion: opts.distortion,
        k2: att.k2,
        tail_rho0: att.tail_rho0,
        tail_theta: att.tail_theta,
    })
}
