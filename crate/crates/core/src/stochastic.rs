//! Monte Carlo estimates of cube occupancy, close-pair events and scaled
//! counts, together with the Poisson tail inequality they rest on.

use crate::geometry::{AxisBox, Dim, Point, StarDomain};
use crate::rng::trial_seed;
use crate::sampler::{sample_marked_ppp, sample_ppp_positions, select_interior, MarkDist, ProcessParams, SamplerError};
use crate::stats::{fit_loglog, mean_se, wilson, LineFit, Z95};
use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("at least 100 trials are required, got {0}")]
    TooFewTrials(usize),
    #[error("eps ladder must be non-empty and strictly decreasing in (0, 1)")]
    BadLadder,
    #[error("confidence level must lie in (0, 1)")]
    BadConfidence,
    #[error("invalid parameter: {0}")]
    BadParam(String),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub trials: usize,
    pub seed: u64,
    pub eps_ladder: Vec<f64>,
    pub confidence: f64,
}

impl TrialConfig {
    pub fn validate(&self) -> Result<(), LabError> {
        if self.trials < 100 {
            return Err(LabError::TooFewTrials(self.trials));
        }
        let l = &self.eps_ladder;
        if l.is_empty() || l.iter().any(|e| !(*e > 0.0 && *e < 1.0)) || l.windows(2).any(|w| w[1] >= w[0]) {
            return Err(LabError::BadLadder);
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(LabError::BadConfidence);
        }
        Ok(())
    }

    /// Normal quantile for the two-sided level.
    pub fn z(&self) -> f64 {
        if (self.confidence - 0.95).abs() < 1e-12 {
            Z95
        } else {
            use statrs::distribution::{ContinuousCDF, Normal};
            Normal::new(0.0, 1.0).unwrap().inverse_cdf(0.5 + 0.5 * self.confidence)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventEstimate {
    pub p_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub theory_bound: f64,
    pub n: u64,
    pub hits: u64,
}

impl EventEstimate {
    pub fn from_counts(hits: u64, n: u64, z: f64, theory_bound: f64) -> Self {
        let (ci_lo, ci_hi) = wilson(hits, n, z);
        EventEstimate { p_hat: hits as f64 / n as f64, ci_lo, ci_hi, theory_bound, n, hits }
    }

    /// Binomial standard deviation of `p_hat`.
    pub fn sigma(&self) -> f64 {
        (self.p_hat * (1.0 - self.p_hat) / self.n as f64).sqrt()
    }
}

/// `P(Pois(x) ≥ n)` and the bound `x^n/n!`.
///
/// For `n > x` the tail is `x^n/n!·e^{-x}·Σ_k x^k n!/(n+k)!`, summed forward in
/// log space; otherwise it is one minus the lower sum. Both share the same
/// `ln n!`, so `tail ≤ bound` holds to rounding.
pub fn poisson_tail_bound(x: f64, n: u64) -> (f64, f64) {
    assert!(x > 0.0, "x must be positive");
    if n == 0 {
        return (1.0, 1.0);
    }
    let nf = n as f64;
    let ln_fact = ln_factorial(n);
    let ln_bound = nf * x.ln() - ln_fact;
    let bound = ln_bound.exp();
    let tail = if nf > x {
        let mut s = 1.0;
        let mut term = 1.0;
        let mut k = 1.0;
        loop {
            term *= x / (nf + k);
            s += term;
            if term <= 1e-17 * s {
                break;
            }
            k += 1.0;
        }
        (ln_bound - x + s.ln()).exp()
    } else {
        // Lower sum e^{-x} Σ_{k<n} x^k/k!, each term in log space.
        let mut lower = 0.0;
        for k in 0..n {
            let kf = k as f64;
            lower += (kf * x.ln() - ln_factorial(k) - x).exp();
        }
        (1.0 - lower).max(0.0)
    };
    (tail, bound)
}

/// Points of `scale·z` inside `domain`, already scaled.
fn scaled_inside(points: &[Point], scale: f64, domain: &StarDomain) -> Vec<Point> {
    points
        .iter()
        .map(|z| [scale * z[0], scale * z[1], scale * z[2]])
        .filter(|x| domain.contains(x))
        .collect()
}

/// Largest count of points in a half-open grid cube `side·k + [0, side)^d`.
pub fn max_grid_count(points: &[Point], d: Dim, side: f64) -> usize {
    let mut counts: FxHashMap<[i64; 3], usize> = FxHashMap::default();
    for p in points {
        let mut k = [0i64; 3];
        for a in 0..d.get() {
            k[a] = (p[a] / side).floor() as i64;
        }
        *counts.entry(k).or_default() += 1;
    }
    counts.values().copied().max().unwrap_or(0)
}

/// Largest count of points in any closed cube `x + [0, side]^d`, `x ∈ ℝ^d`.
///
/// A maximizing cube can be slid until each lower face touches a point, so
/// candidate corners are drawn from point coordinates.
pub fn max_any_cube_count(points: &[Point], d: Dim, side: f64) -> usize {
    if points.is_empty() {
        return 0;
    }
    let dd = d.get();
    let mut grid: FxHashMap<[i64; 3], Vec<usize>> = FxHashMap::default();
    for (i, p) in points.iter().enumerate() {
        let mut k = [0i64; 3];
        for a in 0..dd {
            k[a] = (p[a] / side).floor() as i64;
        }
        grid.entry(k).or_default().push(i);
    }
    let mut best = 1;
    let mut near: Vec<Point> = Vec::new();
    for p in points {
        // Cube with lower x-face at p[0]: gather points within reach.
        near.clear();
        let mut k0 = [0i64; 3];
        for a in 0..dd {
            k0[a] = (p[a] / side).floor() as i64;
        }
        // Only cells k0 and k0+1 along the first axis can hold points with q[0] ≥ p[0].
        let span = |a: usize| if a == 0 { 0..=1i64 } else if a < dd { -1..=1 } else { 0..=0 };
        let mut cells: Vec<&Vec<usize>> = Vec::with_capacity(18);
        for dx in span(0) {
            for dy in span(1) {
                for dz in span(2) {
                    if let Some(v) = grid.get(&[k0[0] + dx, k0[1] + dy, k0[2] + dz]) {
                        cells.push(v);
                    }
                }
            }
        }
        if cells.iter().map(|v| v.len()).sum::<usize>() <= best {
            continue;
        }
        for v in cells {
            for &j in v {
                let q = &points[j];
                if q[0] >= p[0] && q[0] <= p[0] + side && (1..dd).all(|a| (q[a] - p[a]).abs() <= side) {
                    near.push(*q);
                }
            }
        }
        if near.len() <= best {
            continue;
        }
        best = best.max(max_window_count(&mut near, dd, 1, side));
    }
    best
}

/// Recursive sweep over axes `axis..d` of points already constrained on earlier axes.
fn max_window_count(pts: &mut [Point], d: usize, axis: usize, side: f64) -> usize {
    if axis == d {
        return pts.len();
    }
    pts.sort_by(|a, b| a[axis].partial_cmp(&b[axis]).unwrap());
    let mut best = 0;
    let n = pts.len();
    let mut hi = 0;
    for lo in 0..n {
        if n - lo <= best {
            break;
        }
        while hi < n && pts[hi][axis] <= pts[lo][axis] + side {
            hi += 1;
        }
        let c = if axis + 1 == d {
            hi - lo
        } else {
            let mut sub: Vec<Point> = pts[lo..hi].to_vec();
            max_window_count(&mut sub, d, axis + 1, side)
        };
        best = best.max(c);
    }
    best
}

/// Number of grid cubes of the given side that meet `domain`'s bounding box
/// and intersect the domain (tested by the cube's closest point to the origin
/// and a fine interior sample).
pub fn covering_count(domain: &StarDomain, side: f64) -> u64 {
    let bb = domain.bbox();
    let d = domain.dim().get();
    let mut lo = [0i64; 3];
    let mut hi = [0i64; 3];
    for a in 0..d {
        lo[a] = (bb.lo[a] / side).floor() as i64;
        hi[a] = (bb.hi[a] / side).floor() as i64;
    }
    let mut count = 0u64;
    let sub = 4;
    for x in lo[0]..=hi[0] {
        for y in lo[1]..=hi[1] {
            for z in if d == 3 { lo[2]..=hi[2] } else { 0..=0 } {
                let k = [x, y, z];
                // Closest point of the closed cube to the origin lies in D whenever the cube meets D,
                // for balls and other domains convex along rays; otherwise fall back to sampling.
                let mut c = [0.0; 3];
                for a in 0..d {
                    let (l, h) = (k[a] as f64 * side, (k[a] + 1) as f64 * side);
                    c[a] = 0.0f64.clamp(l, h);
                }
                let mut hit = domain.contains(&c);
                if !hit {
                    'outer: for i in 0..=sub {
                        for j in 0..=sub {
                            for m in 0..=if d == 3 { sub } else { 0 } {
                                let t = [i, j, m];
                                let mut p = [0.0; 3];
                                for a in 0..d {
                                    p[a] = (k[a] as f64 + t[a] as f64 / sub as f64) * side;
                                }
                                if domain.contains(&p) {
                                    hit = true;
                                    break 'outer;
                                }
                            }
                        }
                    }
                }
                if hit {
                    count += 1;
                }
            }
        }
    }
    count
}

/// Union bound `count·(λ2^d)^{N_1} ε^{δ d N_1}/N_1!`.
pub fn occupancy_bound(lambda: f64, eps: f64, delta: f64, d: Dim, n1: usize, count: u64) -> f64 {
    let dd = d.get() as f64;
    let n1f = n1 as f64;
    let ln = n1f * (lambda * 2f64.powf(dd)).ln() + delta * dd * n1f * eps.ln() - ln_factorial(n1 as u64);
    count as f64 * ln.exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyRow {
    pub eps: f64,
    /// Some grid cube holds at least `N_1` points.
    pub grid_at_least: EventEstimate,
    /// Some grid cube holds more than `N_1` points.
    pub grid_more_than: EventEstimate,
    /// Some cube anywhere holds at least `N_1` points.
    pub any_at_least: EventEstimate,
    /// Some cube anywhere holds more than `N = 2^d N_1` points.
    pub any_more_than_n: EventEstimate,
    pub covering_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyResult {
    pub n1: usize,
    pub n: usize,
    pub rows: Vec<OccupancyRow>,
    /// Log-log fit of the grid "at least N_1" probability.
    pub fit: Option<LineFit>,
    /// `δ d N_1 − d(1+δ)`.
    pub slope_target: f64,
}

/// Per-trial maxima for every ladder entry: (grid max, any-cube max).
fn occupancy_trial(lambda: f64, domain: &StarDomain, delta: f64, ladder: &[f64], seed: u64, any_cube: bool) -> Result<Vec<(usize, usize)>, SamplerError> {
    let d = domain.dim();
    let eps_min = *ladder.last().unwrap();
    // Master realization on (2/eps_min)·bbox(D).
    let bb = domain.bbox();
    let mut w = bb;
    for a in 0..d.get() {
        w.lo[a] = bb.lo[a] * 2.0 / eps_min;
        w.hi[a] = bb.hi[a] * 2.0 / eps_min;
    }
    let pts = sample_ppp_positions(lambda, &w, seed)?;
    Ok(ladder
        .iter()
        .map(|&eps| {
            let inside = scaled_inside(&pts, eps / 2.0, domain);
            let side = eps.powf(1.0 + delta);
            let g = max_grid_count(&inside, d, side);
            let a = if any_cube { max_any_cube_count(&inside, d, side) } else { 0 };
            (g, a)
        })
        .collect())
}

/// Monte Carlo estimate of cube-occupancy events for the points `(ε/2)Φ ∩ D`
/// in cubes of side `ε^{1+δ}`.
///
/// `n1_override` replaces `N_1 = 2 + ⌈1/δ⌉` (use `usize::MAX` for "never").
pub fn estimate_max_occupancy(
    lambda: f64,
    domain: &StarDomain,
    delta: f64,
    config: &TrialConfig,
    n1_override: Option<usize>,
    any_cube: bool,
) -> Result<OccupancyResult, LabError> {
    config.validate()?;
    domain.validate().map_err(SamplerError::from)?;
    if !(lambda > 0.0) || !(delta > 0.0) {
        return Err(LabError::BadParam("lambda and delta must be positive".into()));
    }
    let d = domain.dim();
    let n1 = n1_override.unwrap_or_else(|| crate::clusterer::n1_of_delta(delta));
    let n = n1.saturating_mul(1 << d.get());
    let per_trial: Vec<Vec<(usize, usize)>> = (0..config.trials as u64)
        .into_par_iter()
        .map(|t| occupancy_trial(lambda, domain, delta, &config.eps_ladder, trial_seed(config.seed, t), any_cube))
        .collect::<Result<_, _>>()?;
    let z = config.z();
    let trials = config.trials as u64;
    let mut rows = Vec::new();
    for (k, &eps) in config.eps_ladder.iter().enumerate() {
        let side = eps.powf(1.0 + delta);
        let count = covering_count(domain, side);
        let bound = if n1 == usize::MAX { 0.0 } else { occupancy_bound(lambda, eps, delta, d, n1, count) };
        let tally = |f: &dyn Fn(&(usize, usize)) -> bool| per_trial.iter().filter(|v| f(&v[k])).count() as u64;
        let ge = tally(&|v| v.0 >= n1);
        let gt = tally(&|v| v.0 > n1);
        let any_ge = tally(&|v| v.1 >= n1);
        let any_gt = tally(&|v| v.1 > n);
        rows.push(OccupancyRow {
            eps,
            grid_at_least: EventEstimate::from_counts(ge, trials, z, bound),
            grid_more_than: EventEstimate::from_counts(gt, trials, z, bound),
            any_at_least: EventEstimate::from_counts(any_ge, trials, z, f64::NAN),
            any_more_than_n: EventEstimate::from_counts(any_gt, trials, z, f64::NAN),
            covering_count: count,
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.eps).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.grid_at_least.p_hat).collect();
    let dd = d.get() as f64;
    let slope_target = delta * dd * n1 as f64 - dd * (1.0 + delta);
    Ok(OccupancyResult { n1, n, rows, fit: fit_loglog(&xs, &ys), slope_target })
}

/// All index pairs `(i, j, |p_i − p_j|)` with `i < j` and distance strictly below `radius`.
///
/// Points are bucketed into strips of width `radius` along the first axis by a
/// counting sort; each strip is compared with itself and its right neighbour.
pub fn close_pairs(points: &[Point], d: Dim, radius: f64) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    if points.len() < 2 {
        return out;
    }
    let dd = d.get();
    let r2 = radius * radius;
    let x0 = points.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
    let x1 = points.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
    let strips = (((x1 - x0) / radius).floor() as usize + 1).min(4 * points.len());
    let width = ((x1 - x0) / strips as f64).max(radius);
    let key = |p: &Point| (((p[0] - x0) / width) as usize).min(strips - 1);
    let mut start = vec![0usize; strips + 1];
    for p in points {
        start[key(p) + 1] += 1;
    }
    for k in 0..strips {
        start[k + 1] += start[k];
    }
    let mut fill = start.clone();
    let mut idx = vec![0usize; points.len()];
    for (i, p) in points.iter().enumerate() {
        let k = key(p);
        idx[fill[k]] = i;
        fill[k] += 1;
    }
    let sorted: Vec<Point> = idx.iter().map(|&i| points[i]).collect();
    for k in 0..strips {
        let end = if k + 1 < strips { start[k + 2] } else { start[k + 1] };
        for m in start[k]..start[k + 1] {
            let p = &sorted[m];
            for (n, q) in sorted[m + 1..end].iter().enumerate() {
                let s: f64 = (0..dd).map(|a| (p[a] - q[a]) * (p[a] - q[a])).sum();
                if s < r2 {
                    let (i, j) = (idx[m], idx[m + 1 + n]);
                    out.push((i.min(j), i.max(j), s.sqrt()));
                }
            }
        }
    }
    out.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    out
}

/// Whether two of the points are closer than `radius` (strictly).
pub fn has_close_pair(points: &[Point], d: Dim, radius: f64) -> bool {
    !close_pairs(points, d, radius).is_empty()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationResult {
    pub kappa: f64,
    pub tau: f64,
    pub rows: Vec<(f64, EventEstimate)>,
    pub fit: Option<LineFit>,
    /// `d(κ − 1)`.
    pub slope_target: f64,
}

/// Estimates `P(two balls of radius τε^{1+κ} around admitted centers εz_j intersect)`.
pub fn estimate_separation_event(
    lambda: f64,
    domain: &StarDomain,
    kappa: f64,
    tau: f64,
    config: &TrialConfig,
) -> Result<SeparationResult, LabError> {
    config.validate()?;
    if !(kappa > 1.0) || !(tau >= 1.0) || !(lambda > 0.0) {
        return Err(LabError::BadParam("need kappa > 1, tau ≥ 1, lambda > 0".into()));
    }
    let d = domain.dim();
    let eps_min = *config.eps_ladder.last().unwrap();
    let window = crate::sampler::scaled_window(domain, eps_min);
    let hits: Vec<Vec<bool>> = (0..config.trials as u64)
        .into_par_iter()
        .map(|t| -> Result<Vec<bool>, SamplerError> {
            let pts = sample_ppp_positions(lambda, &window, trial_seed(config.seed, t))?;
            // Pairs close enough for the largest radius; smaller radii filter this list.
            let r_max = 2.0 * tau * config.eps_ladder[0].powf(kappa);
            let pairs = close_pairs(&pts, d, r_max);
            Ok(config
                .eps_ladder
                .iter()
                .map(|&eps| {
                    let r = 2.0 * tau * eps.powf(kappa);
                    let admitted = |z: &Point| domain.boundary_distance(&[eps * z[0], eps * z[1], eps * z[2]]) > eps;
                    // |εz_i − εz_j| < 2τε^{1+κ}  ⇔  |z_i − z_j| < 2τε^κ.
                    pairs.iter().any(|&(i, j, dist)| dist < r && admitted(&pts[i]) && admitted(&pts[j]))
                })
                .collect())
        })
        .collect::<Result<_, _>>()?;
    let z = config.z();
    let rows: Vec<(f64, EventEstimate)> = config
        .eps_ladder
        .iter()
        .enumerate()
        .map(|(k, &eps)| {
            let h = hits.iter().filter(|v| v[k]).count() as u64;
            (eps, EventEstimate::from_counts(h, config.trials as u64, z, f64::NAN))
        })
        .collect();
    let xs: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.1.p_hat).collect();
    Ok(SeparationResult { kappa, tau, fit: fit_loglog(&xs, &ys), rows, slope_target: d.get() as f64 * (kappa - 1.0) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SllnRow {
    pub eps: f64,
    /// Mean and standard error of `ε^d N(ε⁻¹S)`.
    pub count_mean: f64,
    pub count_se: f64,
    /// Mean and standard error of `ε^d Σ_{z_j ∈ ε⁻¹S} r_j^m`.
    pub moment_mean: f64,
    pub moment_se: f64,
    /// Mean and standard error of `ε^d Σ_{z_j ∈ Φ^ε(S)} r_j^m`.
    pub admitted_moment_mean: f64,
    pub admitted_moment_se: f64,
    pub count_limit: f64,
    pub moment_limit: f64,
    pub seeds: usize,
}

/// Scaled counts and mark-moment sums over `ε⁻¹S`, averaged over seeds.
pub fn slln_estimate(
    lambda: f64,
    marks: &MarkDist,
    s: &StarDomain,
    m: f64,
    config: &TrialConfig,
) -> Result<Vec<SllnRow>, LabError> {
    config.validate()?;
    marks.validate()?;
    if !(m >= 0.0) {
        return Err(LabError::BadParam("moment order must be non-negative".into()));
    }
    let d = s.dim();
    let vol = s.volume();
    let mut rows = Vec::new();
    for &eps in &config.eps_ladder {
        let window = crate::sampler::scaled_window(s, eps);
        let ed = eps.powi(d.get() as i32);
        let per: Vec<(f64, f64, f64)> = (0..config.trials as u64)
            .into_par_iter()
            .map(|t| -> Result<(f64, f64, f64), SamplerError> {
                let p = ProcessParams { intensity: lambda, marks: *marks, seed: trial_seed(config.seed, t) };
                let smp = sample_marked_ppp(&p, &window)?;
                let inside: Vec<&crate::sampler::MarkedPoint> =
                    smp.points.iter().filter(|q| s.contains(&[eps * q.z[0], eps * q.z[1], eps * q.z[2]])).collect();
                let count = inside.len() as f64;
                let mom: f64 = inside.iter().map(|q| q.r.powf(m)).sum();
                let adm: f64 = select_interior(&smp, s, eps)?.iter().map(|&j| smp.points[j].r.powf(m)).sum();
                Ok((ed * count, ed * mom, ed * adm))
            })
            .collect::<Result<_, _>>()?;
        let (c, mo, ad): (Vec<f64>, Vec<f64>, Vec<f64>) = per.iter().fold((vec![], vec![], vec![]), |mut acc, v| {
            acc.0.push(v.0);
            acc.1.push(v.1);
            acc.2.push(v.2);
            acc
        });
        let (cm, cs) = mean_se(&c);
        let (mm, ms) = mean_se(&mo);
        let (am, as_) = mean_se(&ad);
        rows.push(SllnRow {
            eps,
            count_mean: cm,
            count_se: cs,
            moment_mean: mm,
            moment_se: ms,
            admitted_moment_mean: am,
            admitted_moment_se: as_,
            count_limit: lambda * vol,
            moment_limit: lambda * marks.moment(m) * vol,
            seeds: config.trials,
        });
    }
    Ok(rows)
}

/// CSV rows `eps,estimator,p_hat,ci_lo,ci_hi,theory_bound,n_trials`.
pub fn occupancy_csv(res: &OccupancyResult) -> String {
    let mut s = String::from("eps,estimator,p_hat,ci_lo,ci_hi,theory_bound,n_trials\n");
    for r in &res.rows {
        for (name, e) in [
            ("grid_at_least_n1", &r.grid_at_least),
            ("grid_more_than_n1", &r.grid_more_than),
            ("any_at_least_n1", &r.any_at_least),
            ("any_more_than_n", &r.any_more_than_n),
        ] {
            s.push_str(&format!("{},{},{},{},{},{},{}\n", r.eps, name, e.p_hat, e.ci_lo, e.ci_hi, e.theory_bound, e.n));
        }
    }
    s
}

pub fn separation_csv(res: &SeparationResult) -> String {
    let mut s = String::from("eps,estimator,p_hat,ci_lo,ci_hi,theory_bound,n_trials\n");
    for (eps, e) in &res.rows {
        s.push_str(&format!("{},close_pair,{},{},{},{},{}\n", eps, e.p_hat, e.ci_lo, e.ci_hi, e.theory_bound, e.n));
    }
    s
}

pub fn slln_csv(rows: &[SllnRow]) -> String {
    let mut s = String::from("eps,estimator,mean,se,limit,seeds\n");
    for r in rows {
        s.push_str(&format!("{},count,{},{},{},{}\n", r.eps, r.count_mean, r.count_se, r.count_limit, r.seeds));
        s.push_str(&format!("{},moment,{},{},{},{}\n", r.eps, r.moment_mean, r.moment_se, r.moment_limit, r.seeds));
        s.push_str(&format!("{},admitted_moment,{},{},{},{}\n", r.eps, r.admitted_moment_mean, r.admitted_moment_se, r.moment_limit, r.seeds));
    }
    s
}

/// Domain used by default for occupancy runs: a ball small enough that the
/// occupancy probabilities stay well below one across the ladder.
pub fn default_occupancy_domain(d: Dim) -> StarDomain {
    StarDomain::Ball { dim: d, radius: 0.014 }
}

#[doc(hidden)]
pub fn unit_box(d: Dim) -> AxisBox {
    AxisBox::cube(d, -1.0, 1.0).unwrap()
}
