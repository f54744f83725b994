//! The hole cut-off `g_ε(x) = min(ε^(−α) dist(x, H_ε), 1)` and its
//! `W^{1,r}` distance to 1.
//!
//! Distances to the union of holes are exact (minimum over balls found by a
//! spatial hash). Away from the `ε^α`-neighborhood of the holes `g = 1`, so
//! the rate experiment walks only the cells near each hole on a virtual
//! lattice of spacing `h`; each cell is charged to its nearest hole.

use crate::geometry::{Ball, Dim, Point};
use crate::grid::MaskedGrid;
use crate::sampler::{build_perforation, sample_marked_ppp, scaled_window, PerforatedDomain, ProcessParams, SamplerError};
use crate::stats::{fit_loglog, LineFit};
use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CutoffError {
    #[error("ramp width ε^α = {ramp:e} spans {cells:.2} cells; at least 3 are needed")]
    UnresolvableRamp { ramp: f64, cells: f64 },
    #[error("exponent r = {r} is inadmissible in dimension {d}: {violated}")]
    Inadmissible { r: f64, d: usize, violated: String },
    #[error("rate fit needs at least 3 ladder points with positive gaps")]
    TooFewPoints,
    #[error("invalid ladder: {0}")]
    BadLadder(String),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}

type Result<T> = std::result::Result<T, CutoffError>;

/// Hole balls with a bucket index for distance queries up to `reach`.
#[derive(Debug, Clone)]
pub struct HoleIndex {
    dim: Dim,
    holes: Vec<Ball>,
    side: f64,
    buckets: FxHashMap<[i64; 3], Vec<u32>>,
}

impl HoleIndex {
    /// Queries are exact for points within `reach` of some hole surface.
    pub fn new(dim: Dim, holes: &[Ball], reach: f64) -> Self {
        let rmax = holes.iter().map(|b| b.radius).fold(0.0, f64::max);
        let side = (reach + rmax).max(f64::MIN_POSITIVE);
        let mut buckets: FxHashMap<[i64; 3], Vec<u32>> = FxHashMap::default();
        for (k, b) in holes.iter().enumerate() {
            buckets.entry(bucket(dim, &b.center, side)).or_default().push(k as u32);
        }
        HoleIndex { dim, holes: holes.to_vec(), side, buckets }
    }

    pub fn holes(&self) -> &[Ball] {
        &self.holes
    }

    /// `(distance to the union, nearest hole)`, or `(∞, None)` beyond the reach.
    pub fn nearest(&self, x: &Point) -> (f64, Option<usize>) {
        let d = self.dim.get();
        let c = bucket(self.dim, x, self.side);
        let mut best = (f64::INFINITY, None);
        let span = |a: usize| if a < d { -1..=1 } else { 0..=0 };
        for i in span(0) {
            for j in span(1) {
                for k in span(2) {
                    if let Some(list) = self.buckets.get(&[c[0] + i, c[1] + j, c[2] + k]) {
                        for &h in list {
                            let b = &self.holes[h as usize];
                            let s = crate::geometry::dist(self.dim, x, &b.center) - b.radius;
                            if s < best.0 || (s == best.0 && Some(h as usize) < best.1) {
                                best = (s, Some(h as usize));
                            }
                        }
                    }
                }
            }
        }
        (best.0.max(0.0), best.1)
    }
}

fn bucket(dim: Dim, x: &Point, side: f64) -> [i64; 3] {
    let mut out = [0i64; 3];
    for a in 0..dim.get() {
        out[a] = (x[a] / side).floor() as i64;
    }
    out
}

/// `min(dist/ramp, 1)`.
#[inline]
pub fn ramp_value(dist: f64, ramp: f64) -> f64 {
    (dist / ramp).min(1.0)
}

/// `g_ε` sampled at cell centers of a grid covering `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct CutoffField {
    pub grid: MaskedGrid,
    pub values: Vec<f64>,
    pub eps: f64,
    pub alpha: f64,
}

/// Dense `g_ε` on `grid`; the grid must resolve `ε^α` with 3 cells.
pub fn build_g_eps(perf: &PerforatedDomain, grid: &MaskedGrid) -> Result<CutoffField> {
    let ramp = perf.eps.powf(perf.alpha);
    check_ramp(ramp, grid.h)?;
    let index = HoleIndex::new(perf.dim(), &perf.holes, ramp);
    let values = (0..grid.cells())
        .into_par_iter()
        .map(|c| ramp_value(index.nearest(&grid.cell_center(c)).0, ramp))
        .collect();
    Ok(CutoffField { grid: grid.clone(), values, eps: perf.eps, alpha: perf.alpha })
}

fn check_ramp(ramp: f64, h: f64) -> Result<()> {
    let cells = ramp / h;
    if cells < 3.0 - 1e-9 {
        return Err(CutoffError::UnresolvableRamp { ramp, cells });
    }
    Ok(())
}

/// Rate `σ` and the admissibility condition for `(d, r, α)`.
///
/// `d = 3`: `1 < r < 3`, `(3 − r)α − 3 > 0`, `σ = ((3 − r)α − 3)/r`.
/// `d = 2`: the same count with `ε^{−2}` holes of area `ε^{2α}`:
/// `1 < r < 2`, `(2 − r)α − 2 > 0`, `σ = ((2 − r)α − 2)/r`.
pub fn sigma(d: Dim, r: f64, alpha: f64) -> Result<f64> {
    let dd = d.get() as f64;
    let bad = |v: String| Err(CutoffError::Inadmissible { r, d: d.get(), violated: v });
    if !(r > 1.0 && r < dd) {
        return bad(format!("1 < r < {dd}"));
    }
    let num = (dd - r) * alpha - dd;
    if num <= 0.0 {
        return bad(format!("({dd} − r)α − {dd} = {num} must be positive"));
    }
    Ok(num / r)
}

/// Parts of `‖g − 1‖_{W^{1,r}}` and the gradient sup norm.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GapParts {
    /// `(Σ (|g−1|^r + |∇g|^r) h^d)^{1/r}`.
    pub gap: f64,
    /// `(Σ |g−1|^r h^d)^{1/r}`.
    pub value_part: f64,
    /// `(Σ_{hole cells} h^d)^{1/r}`, the contribution of cells inside holes.
    pub hole_part: f64,
    /// Largest forward-difference gradient magnitude.
    pub max_grad: f64,
    pub cells: u64,
}

/// Sums `(|g−1|^r, |∇g|^r)` for one cell from its value and forward neighbors.
#[inline]
fn cell_terms(g: f64, fwd: &[f64], h: f64, r: f64) -> (f64, f64, f64) {
    let mut s = 0.0;
    for &n in fwd {
        s += ((n - g) / h).powi(2);
    }
    let grad = s.sqrt();
    ((1.0 - g).abs().powf(r), grad.powf(r), grad)
}

/// `‖g − 1‖_{W^{1,r}}` of a dense field (forward differences; the last layer
/// of cells has no forward neighbor along that axis).
pub fn w1r_norm_gap(field: &CutoffField, r: f64) -> Result<GapParts> {
    let g = &field.grid;
    let d = g.dim.get();
    sigma(g.dim, r, field.alpha)?;
    let mut acc = (0.0, 0.0, 0.0, 0.0f64, 0u64);
    for c in 0..g.cells() {
        let k = g.cell_coords(c);
        let mut fwd = [0.0; 3];
        let mut m = 0;
        for a in 0..d {
            if k[a] + 1 < g.n[a] {
                let mut kk = k;
                kk[a] += 1;
                fwd[m] = field.values[g.cell_index(kk)];
                m += 1;
            }
        }
        let v = field.values[c];
        let (tv, tg, grad) = cell_terms(v, &fwd[..m], g.h, r);
        acc.0 += tv;
        acc.1 += tg;
        acc.2 += if v == 0.0 { 1.0 } else { 0.0 };
        acc.3 = acc.3.max(grad);
        acc.4 += 1;
    }
    Ok(finish(acc, g.cell_volume(), r))
}

fn finish(acc: (f64, f64, f64, f64, u64), vol: f64, r: f64) -> GapParts {
    GapParts {
        gap: ((acc.0 + acc.1) * vol).powf(1.0 / r),
        value_part: (acc.0 * vol).powf(1.0 / r),
        hole_part: (acc.2 * vol).powf(1.0 / r),
        max_grad: acc.3,
        cells: acc.4,
    }
}

/// Same sums on the virtual lattice `h·(Z^d + 1/2)`, visiting only cells
/// whose forward stencil reaches within `ε^α` of a hole.
pub fn sparse_gap(perf: &PerforatedDomain, h: f64, r: f64) -> Result<GapParts> {
    let dim = perf.dim();
    let d = dim.get();
    let ramp = perf.eps.powf(perf.alpha);
    check_ramp(ramp, h)?;
    sigma(dim, r, perf.alpha)?;
    let index = HoleIndex::new(dim, &perf.holes, ramp + 2.0 * h);
    let center = |k: [i64; 3]| {
        let mut x = [0.0; 3];
        for a in 0..d {
            x[a] = (k[a] as f64 + 0.5) * h;
        }
        x
    };
    let parts: Vec<(f64, f64, f64, f64, u64)> = perf
        .holes
        .par_iter()
        .enumerate()
        .map(|(j, b)| {
            let reach = b.radius + ramp + 2.0 * h;
            let mut lo = [0i64; 3];
            let mut hi = [0i64; 3];
            for a in 0..d {
                lo[a] = ((b.center[a] - reach) / h).floor() as i64 - 1;
                hi[a] = ((b.center[a] + reach) / h).ceil() as i64 + 1;
            }
            let mut acc = (0.0, 0.0, 0.0, 0.0f64, 0u64);
            let zr = if d == 3 { lo[2]..=hi[2] } else { 0..=0 };
            for k2 in zr {
                for k1 in lo[1]..=hi[1] {
                    for k0 in lo[0]..=hi[0] {
                        let k = [k0, k1, k2];
                        let (dist, owner) = index.nearest(&center(k));
                        if owner != Some(j) {
                            continue;
                        }
                        let v = ramp_value(dist, ramp);
                        let mut fwd = [0.0; 3];
                        for (a, slot) in fwd.iter_mut().enumerate().take(d) {
                            let mut kk = k;
                            kk[a] += 1;
                            *slot = ramp_value(index.nearest(&center(kk)).0, ramp);
                        }
                        if v == 1.0 && fwd[..d].iter().all(|&x| x == 1.0) {
                            continue;
                        }
                        let (tv, tg, grad) = cell_terms(v, &fwd[..d], h, r);
                        acc.0 += tv;
                        acc.1 += tg;
                        acc.2 += if v == 0.0 { 1.0 } else { 0.0 };
                        acc.3 = acc.3.max(grad);
                        acc.4 += 1;
                    }
                }
            }
            acc
        })
        .collect();
    let mut total = (0.0, 0.0, 0.0, 0.0f64, 0u64);
    for p in parts {
        total.0 += p.0;
        total.1 += p.1;
        total.2 += p.2;
        total.3 = total.3.max(p.3);
        total.4 += p.4;
    }
    Ok(finish(total, h.powi(d as i32), r))
}

/// Least-squares slope of `ln gap` against `ln ε`.
pub fn rate_fit(points: &[(f64, f64)]) -> Result<LineFit> {
    let (e, g): (Vec<f64>, Vec<f64>) = points.iter().filter(|(_, g)| *g > 0.0).copied().unzip();
    if e.len() < 3 {
        return Err(CutoffError::TooFewPoints);
    }
    fit_loglog(&e, &g).ok_or(CutoffError::TooFewPoints)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateConfig {
    pub process: ProcessParams,
    pub domain: crate::geometry::StarDomain,
    pub alpha: f64,
    pub r: f64,
    pub eps_ladder: Vec<f64>,
    /// Lattice cells across the ramp `ε^α`.
    pub cells_per_ramp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub eps: f64,
    pub h: f64,
    pub holes: usize,
    pub parts: GapParts,
    /// `ε^(−α)(1 + 3h/ε^α)`.
    pub grad_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateResult {
    pub sigma: f64,
    pub rows: Vec<RateRow>,
    pub fit: LineFit,
}

impl RateResult {
    pub fn gradient_bound_holds(&self) -> bool {
        self.rows.iter().all(|r| r.parts.max_grad <= r.grad_bound)
    }
}

/// One realization on the window for the smallest `ε`, restricted for every
/// `ε` on the ladder.
pub fn cutoff_rate(cfg: &RateConfig) -> Result<RateResult> {
    let dim = cfg.domain.dim();
    let sig = sigma(dim, cfg.r, cfg.alpha)?;
    if cfg.eps_ladder.len() < 3 || cfg.eps_ladder.windows(2).any(|w| w[1] >= w[0]) || cfg.eps_ladder.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
        return Err(CutoffError::BadLadder("need at least 3 strictly decreasing values in (0, 1)".into()));
    }
    let eps_min = *cfg.eps_ladder.last().unwrap();
    let sample = sample_marked_ppp(&cfg.process, &scaled_window(&cfg.domain, eps_min))?;
    let mut rows = Vec::new();
    for &eps in &cfg.eps_ladder {
        let perf = build_perforation(&sample, &cfg.domain, eps, cfg.alpha)?;
        let ramp = eps.powf(cfg.alpha);
        let h = ramp / cfg.cells_per_ramp;
        let parts = sparse_gap(&perf, h, cfg.r)?;
        rows.push(RateRow { eps, h, holes: perf.holes.len(), parts, grad_bound: (1.0 + 3.0 * h / ramp) / ramp });
    }
    let fit = rate_fit(&rows.iter().map(|r| (r.eps, r.parts.gap)).collect::<Vec<_>>())?;
    Ok(RateResult { sigma: sig, rows, fit })
}

/// `eps,gap,sigma_theory`.
pub fn rate_csv(res: &RateResult) -> String {
    let mut s = String::from("eps,gap,sigma_theory\n");
    for r in &res.rows {
        let _ = writeln!(s, "{},{},{}", r.eps, r.parts.gap, res.sigma);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::StarDomain;
    use crate::sampler::MarkDist;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn perf_with(holes: Vec<Ball>, eps: f64, alpha: f64, dim: Dim) -> PerforatedDomain {
        PerforatedDomain { domain: StarDomain::unit_ball(dim), eps, alpha, holes, interior_indices: vec![], oversized: vec![] }
    }

    fn square_grid(n: usize) -> MaskedGrid {
        MaskedGrid::new(Dim::TWO, [-0.5, -0.5, 0.0], 1.0 / n as f64, [n, n, 1]).unwrap()
    }

    #[test]
    fn no_holes_gives_one_and_zero_gap() {
        let perf = perf_with(vec![], 0.7, 6.0, Dim::TWO);
        let f = build_g_eps(&perf, &square_grid(40)).unwrap();
        assert!(f.values.iter().all(|&v| v == 1.0));
        assert_eq!(w1r_norm_gap(&f, 1.5).unwrap().gap, 0.0);
    }

    #[test]
    fn single_hole_radial_profile() {
        let (eps, alpha) = (0.7f64, 6.0f64);
        let ramp = eps.powf(alpha);
        let ball = Ball { center: [0.01, -0.02, 0.0], radius: 0.05 };
        let perf = perf_with(vec![ball], eps, alpha, Dim::TWO);
        let grid = square_grid(100);
        let f = build_g_eps(&perf, &grid).unwrap();
        for c in 0..grid.cells() {
            let x = grid.cell_center(c);
            let rho = crate::geometry::dist(Dim::TWO, &x, &ball.center);
            let expect = ((rho - ball.radius) / ramp).clamp(0.0, 1.0);
            assert_relative_eq!(f.values[c], expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn gradient_respects_the_ramp_bound() {
        let (eps, alpha) = (0.7f64, 6.0f64);
        let ramp = eps.powf(alpha);
        let holes = vec![Ball { center: [0.1, 0.0, 0.0], radius: 0.03 }, Ball { center: [-0.2, 0.15, 0.0], radius: 0.01 }];
        let grid = square_grid(120);
        let f = build_g_eps(&perf_with(holes, eps, alpha, Dim::TWO), &grid).unwrap();
        let parts = w1r_norm_gap(&f, 1.5).unwrap();
        assert!(parts.max_grad <= (1.0 + 3.0 * grid.h / ramp) / ramp);
    }

    #[test]
    fn unresolved_ramp_is_rejected() {
        let perf = perf_with(vec![], 0.7, 6.0, Dim::TWO);
        assert!(matches!(build_g_eps(&perf, &square_grid(10)), Err(CutoffError::UnresolvableRamp { .. })));
    }

    #[test]
    fn sigma_examples_and_admissibility() {
        assert_relative_eq!(sigma(Dim::THREE, 2.0, 4.0).unwrap(), 0.5);
        assert!(sigma(Dim::THREE, 3.5, 4.0).is_err());
        assert!(sigma(Dim::THREE, 2.5, 4.0).is_err());
        assert!(sigma(Dim::TWO, 1.5, 6.0).is_ok());
    }

    #[test]
    fn rate_fit_examples() {
        let pts: Vec<(f64, f64)> = [0.2, 0.1, 0.05, 0.025].iter().map(|&e: &f64| (e, e.powf(0.5))).collect();
        let fit = rate_fit(&pts).unwrap();
        assert_relative_eq!(fit.slope, 0.5, epsilon = 1e-12);
        assert!(fit.slope_stderr < 1e-12);
        let flat: Vec<(f64, f64)> = [0.2, 0.1, 0.05].iter().map(|&e| (e, 3.0)).collect();
        assert!(rate_fit(&flat).unwrap().slope.abs() < 1e-12);
        assert!(rate_fit(&pts[..2]).is_err());
    }

    #[test]
    fn sparse_walk_matches_dense_grid() {
        // Dense grid aligned with the virtual lattice: origin at a multiple of h.
        let (eps, alpha, r) = (0.7f64, 6.0f64, 1.5f64);
        let ramp = eps.powf(alpha);
        let n = 2 * (0.5 * 4.0 / ramp).round() as usize;
        let h = 1.0 / n as f64;
        let holes = vec![
            Ball { center: [0.11, 0.02, 0.0], radius: 0.03 },
            Ball { center: [0.16, 0.05, 0.0], radius: 0.012 },
            Ball { center: [-0.3, -0.2, 0.0], radius: 0.02 },
        ];
        let perf = perf_with(holes, eps, alpha, Dim::TWO);
        let grid = MaskedGrid::new(Dim::TWO, [-0.5, -0.5, 0.0], h, [n, n, 1]).unwrap();
        let dense = w1r_norm_gap(&build_g_eps(&perf, &grid).unwrap(), r).unwrap();
        let sparse = sparse_gap(&perf, h, r).unwrap();
        assert_relative_eq!(dense.gap, sparse.gap, max_relative = 1e-10);
        assert_relative_eq!(dense.hole_part, sparse.hole_part, max_relative = 1e-12);
        assert_relative_eq!(dense.max_grad, sparse.max_grad, max_relative = 1e-12);
    }

    #[test]
    fn hole_part_scales_with_hole_volume() {
        // ‖·‖ over hole cells ≈ (total hole volume)^{1/r}.
        let (eps, alpha, r) = (0.7f64, 6.0f64, 1.5f64);
        let holes = vec![Ball { center: [0.0; 3], radius: 0.1 }];
        let h = eps.powf(alpha) / 8.0;
        let p = sparse_gap(&perf_with(holes, eps, alpha, Dim::TWO), h, r).unwrap();
        let vol = std::f64::consts::PI * 0.01;
        assert_relative_eq!(p.hole_part, vol.powf(1.0 / r), max_relative = 0.05);
    }

    #[test]
    fn small_three_dimensional_ladder() {
        let cfg = RateConfig {
            process: ProcessParams { intensity: 0.05, marks: MarkDist::Uniform { a: 0.5, b: 1.0 }, seed: 3 },
            domain: StarDomain::Ball { dim: Dim::THREE, radius: 1.5 },
            alpha: 4.0,
            r: 2.0,
            eps_ladder: vec![0.3, 0.2, 0.15],
            cells_per_ramp: 3.0,
        };
        let res = cutoff_rate(&cfg).unwrap();
        assert!(res.gradient_bound_holds());
        assert!(res.rows.iter().all(|r| r.holes > 0 && r.parts.gap > 0.0));
        assert!(res.rows.windows(2).all(|w| w[1].parts.gap < w[0].parts.gap));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn enlarging_a_hole_lowers_g(x in -0.4..0.4f64, y in -0.4..0.4f64, r0 in 0.01..0.05f64, grow in 0.0..0.05f64) {
            let (eps, alpha) = (0.7f64, 6.0f64);
            let mk = |r: f64| perf_with(vec![Ball { center: [0.05, -0.05, 0.0], radius: r }, Ball { center: [-0.2, 0.2, 0.0], radius: 0.02 }], eps, alpha, Dim::TWO);
            let ramp = eps.powf(alpha);
            let (small, large) = (mk(r0), mk(r0 + grow));
            let p = [x, y, 0.0];
            let gs = ramp_value(HoleIndex::new(Dim::TWO, &small.holes, ramp).nearest(&p).0, ramp);
            let gl = ramp_value(HoleIndex::new(Dim::TWO, &large.holes, ramp).nearest(&p).0, ramp);
            prop_assert!(gl <= gs);
        }

        #[test]
        fn values_stay_in_unit_interval(seed in any::<u64>()) {
            use rand::Rng;
            let mut rng = crate::rng::substream(seed, crate::rng::TAG_AUX, 0);
            let holes: Vec<Ball> = (0..5).map(|_| Ball { center: [rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4), 0.0], radius: rng.random_range(0.0..0.05) }).collect();
            let f = build_g_eps(&perf_with(holes.clone(), 0.7, 6.0, Dim::TWO), &square_grid(50)).unwrap();
            for (c, &v) in f.values.iter().enumerate() {
                prop_assert!((0.0..=1.0).contains(&v));
                let x = f.grid.cell_center(c);
                if holes.iter().any(|b| crate::geometry::dist(Dim::TWO, &x, &b.center) < b.radius) {
                    prop_assert_eq!(v, 0.0);
                }
            }
        }
    }
}
