//! Marked Poisson point process sampling and assembly of perforated domains.

use crate::geometry::{AxisBox, Ball, Dim, GeometryError, Point, StarDomain};
use crate::rng::{substream, StreamRng, TAG_COUNT, TAG_MARK, TAG_POSITIONS};
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use std::io::{BufRead, Write};
use thiserror::Error;

/// Largest expected point count a single window may request.
pub const MAX_EXPECTED_POINTS: f64 = 1e8;

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("intensity must be positive and finite, got {0}")]
    BadIntensity(f64),
    #[error("sampling window has zero volume")]
    DegenerateWindow,
    #[error("expected point count {0:.3e} exceeds the resource limit")]
    TooManyPoints(f64),
    #[error("invalid mark distribution: {0}")]
    BadMarks(String),
    #[error("exponent alpha={alpha} is not admissible in dimension {dim} (need alpha > {dim})")]
    BadAlpha { alpha: f64, dim: usize },
    #[error("scale eps must be positive, got {0}")]
    BadEps(f64),
    #[error("sample window does not cover the rescaled domain box")]
    WindowTooSmall,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed sample file: {0}")]
    Format(String),
}

/// Law of the radius marks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MarkDist {
    Constant { r0: f64 },
    Uniform { a: f64, b: f64 },
    /// Pareto law with minimum `scale` and tail index `shape`, conditioned on `r ≤ cap`.
    ParetoTruncated { scale: f64, shape: f64, cap: f64 },
}

impl MarkDist {
    pub fn validate(&self) -> Result<(), SamplerError> {
        let bad = |m: &str| Err(SamplerError::BadMarks(m.to_string()));
        match *self {
            MarkDist::Constant { r0 } => {
                if !(r0.is_finite() && r0 >= 0.0) {
                    return bad("constant mark must be finite and non-negative");
                }
            }
            MarkDist::Uniform { a, b } => {
                if !(a.is_finite() && b.is_finite() && 0.0 <= a && a < b) {
                    return bad("uniform marks need 0 ≤ a < b");
                }
            }
            MarkDist::ParetoTruncated { scale, shape, cap } => {
                if !(scale > 0.0 && scale.is_finite()) {
                    return bad("pareto scale must be positive");
                }
                if !(shape > 3.0 && shape.is_finite()) {
                    return bad("pareto shape must exceed 3");
                }
                if !(cap > scale && cap.is_finite()) {
                    return bad("pareto cap must exceed the scale");
                }
            }
        }
        Ok(())
    }

    /// Closed-form `E[r^m]`.
    pub fn moment(&self, m: f64) -> f64 {
        match *self {
            MarkDist::Constant { r0 } => {
                if m == 0.0 {
                    1.0
                } else {
                    r0.powf(m)
                }
            }
            MarkDist::Uniform { a, b } => {
                (b.powf(m + 1.0) - a.powf(m + 1.0)) / ((m + 1.0) * (b - a))
            }
            MarkDist::ParetoTruncated { scale: xm, shape: s, cap } => {
                let norm = 1.0 - (xm / cap).powf(s);
                let lead = s * xm.powf(s) / norm;
                if (m - s).abs() < 1e-12 {
                    lead * (cap / xm).ln()
                } else {
                    lead * (cap.powf(m - s) - xm.powf(m - s)) / (m - s)
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            MarkDist::Constant { r0 } => r0,
            MarkDist::Uniform { a, b } => a + (b - a) * rng.random::<f64>(),
            MarkDist::ParetoTruncated { scale: xm, shape: s, cap } => {
                let u: f64 = rng.random();
                let tail = 1.0 - (xm / cap).powf(s);
                (xm * (1.0 - u * tail).powf(-1.0 / s)).min(cap)
            }
        }
    }

    pub fn max_value(&self) -> f64 {
        match *self {
            MarkDist::Constant { r0 } => r0,
            MarkDist::Uniform { b, .. } => b,
            MarkDist::ParetoTruncated { cap, .. } => cap,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessParams {
    pub intensity: f64,
    pub marks: MarkDist,
    pub seed: u64,
}

impl ProcessParams {
    pub fn validate(&self) -> Result<(), SamplerError> {
        if !(self.intensity.is_finite() && self.intensity > 0.0) {
            return Err(SamplerError::BadIntensity(self.intensity));
        }
        self.marks.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkedPoint {
    pub z: Point,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkedPointSample {
    pub window: AxisBox,
    pub points: Vec<MarkedPoint>,
}

impl MarkedPointSample {
    pub fn dim(&self) -> Dim {
        self.window.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Whether the window contains `eps⁻¹·bbox(domain)`.
    pub fn covers(&self, domain: &StarDomain, eps: f64) -> bool {
        let b = domain.bbox();
        (0..self.dim().get()).all(|a| {
            self.window.lo[a] <= b.lo[a] / eps && self.window.hi[a] >= b.hi[a] / eps
        })
    }

    /// JSON lines: a header record followed by one `{z, r}` record per point.
    pub fn write_jsonl<W: Write>(&self, params: &ProcessParams, mut w: W) -> Result<(), SamplerError> {
        let d = self.dim().get();
        let header = serde_json::json!({
            "params": params,
            "seed": params.seed,
            "window": self.window,
            "count": self.points.len(),
        });
        writeln!(w, "{}", serde_json::to_string(&header)?)?;
        for p in &self.points {
            let rec = serde_json::json!({ "z": &p.z[..d], "r": p.r });
            writeln!(w, "{}", serde_json::to_string(&rec)?)?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<(ProcessParams, Self), SamplerError> {
        #[derive(Deserialize)]
        struct Header {
            params: ProcessParams,
            window: AxisBox,
            count: usize,
        }
        #[derive(Deserialize)]
        struct Rec {
            z: Vec<f64>,
            r: f64,
        }
        let mut lines = r.lines();
        let first = lines.next().ok_or_else(|| SamplerError::Format("empty file".into()))??;
        let h: Header = serde_json::from_str(&first)?;
        let d = h.window.dim.get();
        let mut points = Vec::with_capacity(h.count);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: Rec = serde_json::from_str(&line)?;
            if rec.z.len() != d {
                return Err(SamplerError::Format(format!("point has {} coordinates, expected {d}", rec.z.len())));
            }
            let mut z = [0.0; 3];
            z[..d].copy_from_slice(&rec.z);
            points.push(MarkedPoint { z, r: rec.r });
        }
        if points.len() != h.count {
            return Err(SamplerError::Format(format!("header count {} but {} records", h.count, points.len())));
        }
        Ok((h.params, MarkedPointSample { window: h.window, points }))
    }
}

/// Poisson variate: sequential inversion below mean 30, transformed rejection above.
pub fn sample_poisson<R: Rng + ?Sized>(mu: f64, rng: &mut R) -> u64 {
    if mu <= 0.0 {
        return 0;
    }
    if mu < 30.0 {
        let mut p = (-mu).exp();
        let mut f = p;
        let u: f64 = rng.random();
        let mut k = 0u64;
        while u > f {
            k += 1;
            p *= mu / k as f64;
            f += p;
            if p == 0.0 && k as f64 > mu {
                break;
            }
        }
        return k;
    }
    let smu = mu.sqrt();
    let b = 0.931 + 2.53 * smu;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    let lmu = mu.ln();
    loop {
        let u = rng.random::<f64>() - 0.5;
        let v: f64 = rng.random();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + mu + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        if v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln() <= -mu + k * lmu - ln_gamma(k + 1.0) {
            return k as u64;
        }
    }
}

/// Marked Poisson sample on `window`; reproducible per `params.seed`.
pub fn sample_marked_ppp(params: &ProcessParams, window: &AxisBox) -> Result<MarkedPointSample, SamplerError> {
    params.validate()?;
    if window.is_degenerate() {
        return Err(SamplerError::DegenerateWindow);
    }
    let mean = params.intensity * window.volume();
    if !(mean <= MAX_EXPECTED_POINTS) {
        return Err(SamplerError::TooManyPoints(mean));
    }
    let points = positions_unchecked(mean, window, params.seed)
        .into_iter()
        .enumerate()
        .map(|(j, z)| MarkedPoint { z, r: params.marks.sample(&mut substream(params.seed, TAG_MARK, j as u64)) })
        .collect();
    Ok(MarkedPointSample { window: *window, points })
}

fn positions_unchecked(mean: f64, window: &AxisBox, seed: u64) -> Vec<Point> {
    let n = sample_poisson(mean, &mut substream(seed, TAG_COUNT, 0)) as usize;
    let d = window.dim.get();
    let mut pos: StreamRng = substream(seed, TAG_POSITIONS, 0);
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let mut z = [0.0; 3];
        for a in 0..d {
            z[a] = window.lo[a] + window.side(a) * pos.random::<f64>();
        }
        points.push(z);
    }
    points
}

/// Unmarked positions; identical to the positions of [`sample_marked_ppp`] for the same seed.
pub fn sample_ppp_positions(intensity: f64, window: &AxisBox, seed: u64) -> Result<Vec<Point>, SamplerError> {
    if !(intensity.is_finite() && intensity > 0.0) {
        return Err(SamplerError::BadIntensity(intensity));
    }
    if window.is_degenerate() {
        return Err(SamplerError::DegenerateWindow);
    }
    let mean = intensity * window.volume();
    if !(mean <= MAX_EXPECTED_POINTS) {
        return Err(SamplerError::TooManyPoints(mean));
    }
    Ok(positions_unchecked(mean, window, seed))
}

/// Sampling window `eps⁻¹·bbox(domain)`.
pub fn scaled_window(domain: &StarDomain, eps: f64) -> AxisBox {
    let b = domain.bbox();
    let mut w = b;
    for a in 0..b.dim.get() {
        w.lo[a] = b.lo[a] / eps;
        w.hi[a] = b.hi[a] / eps;
    }
    w
}

#[inline]
fn scaled(eps: f64, z: &Point) -> Point {
    [eps * z[0], eps * z[1], eps * z[2]]
}

/// Indices `j` with `eps·z_j ∈ D` and `dist(eps·z_j, ∂D) > eps`.
pub fn select_interior(sample: &MarkedPointSample, domain: &StarDomain, eps: f64) -> Result<Vec<usize>, SamplerError> {
    if !(eps > 0.0) {
        return Err(SamplerError::BadEps(eps));
    }
    if !sample.covers(domain, eps) {
        return Err(SamplerError::WindowTooSmall);
    }
    let bb = domain.bbox();
    let d = sample.dim().get();
    Ok(sample
        .points
        .iter()
        .enumerate()
        .filter(|(_, p)| {
            let x = scaled(eps, &p.z);
            // Cheap reject before the exact distance.
            (0..d).all(|a| x[a] - bb.lo[a] > eps && bb.hi[a] - x[a] > eps)
                && domain.boundary_distance(&x) > eps
        })
        .map(|(j, _)| j)
        .collect())
}

/// `D` with holes `B(eps·z_j, eps^alpha·r_j)` at the admitted points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerforatedDomain {
    pub domain: StarDomain,
    pub eps: f64,
    pub alpha: f64,
    pub holes: Vec<Ball>,
    /// Sample indices of the admitted points, aligned with `holes`.
    pub interior_indices: Vec<usize>,
    /// Positions in `holes` whose radius exceeds `eps`.
    pub oversized: Vec<usize>,
}

impl PerforatedDomain {
    pub fn dim(&self) -> Dim {
        self.domain.dim()
    }

    pub fn total_hole_volume(&self) -> f64 {
        let d = self.dim();
        self.holes.iter().map(|b| d.unit_ball_volume() * b.radius.powi(d.get() as i32)).sum()
    }

    pub fn centers(&self) -> Vec<Point> {
        self.holes.iter().map(|b| b.center).collect()
    }
}

pub fn check_alpha(alpha: f64, d: Dim) -> Result<(), SamplerError> {
    if !(alpha > d.get() as f64 && alpha.is_finite()) {
        return Err(SamplerError::BadAlpha { alpha, dim: d.get() });
    }
    Ok(())
}

pub fn build_perforation(
    sample: &MarkedPointSample,
    domain: &StarDomain,
    eps: f64,
    alpha: f64,
) -> Result<PerforatedDomain, SamplerError> {
    check_alpha(alpha, domain.dim())?;
    let idx = select_interior(sample, domain, eps)?;
    let scale = eps.powf(alpha);
    let holes: Vec<Ball> = idx
        .iter()
        .map(|&j| {
            let p = &sample.points[j];
            Ball { center: scaled(eps, &p.z), radius: scale * p.r }
        })
        .collect();
    let oversized = holes.iter().enumerate().filter(|(_, b)| b.radius > eps).map(|(k, _)| k).collect();
    Ok(PerforatedDomain { domain: domain.clone(), eps, alpha, holes, interior_indices: idx, oversized })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::mean_se;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use statrs::distribution::{DiscreteCDF, Poisson};

    fn unit_cube(d: Dim) -> AxisBox {
        AxisBox::cube(d, 0.0, 1.0).unwrap()
    }

    fn params(l: f64, seed: u64) -> ProcessParams {
        ProcessParams { intensity: l, marks: MarkDist::Uniform { a: 0.0, b: 1.0 }, seed }
    }

    #[test]
    fn rejects_degenerate_inputs() {
        let flat = AxisBox::new(Dim::TWO, [0.0; 3], [1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(sample_marked_ppp(&params(1.0, 1), &flat), Err(SamplerError::DegenerateWindow)));
        assert!(matches!(sample_marked_ppp(&params(0.0, 1), &unit_cube(Dim::TWO)), Err(SamplerError::BadIntensity(_))));
        let huge = AxisBox::cube(Dim::THREE, 0.0, 1000.0).unwrap();
        assert!(matches!(sample_marked_ppp(&params(1.0, 1), &huge), Err(SamplerError::TooManyPoints(_))));
    }

    #[test]
    fn count_mean_matches_intensity() {
        let n = 10_000;
        let counts: Vec<f64> = (0..n)
            .map(|s| sample_marked_ppp(&params(10.0, s), &unit_cube(Dim::THREE)).unwrap().len() as f64)
            .collect();
        let (m, _) = mean_se(&counts);
        assert!((m - 10.0).abs() < 3.0 * (10.0 / n as f64).sqrt(), "mean {m}");
    }

    /// Chi-square goodness of fit of the count law against the exact Poisson CDF.
    fn poisson_chi2(mu: f64, n: usize) -> (f64, usize) {
        let dist = Poisson::new(mu).unwrap();
        let mut rng = substream(77, 1, mu.to_bits());
        let mut draws: Vec<u64> = (0..n).map(|_| sample_poisson(mu, &mut rng)).collect();
        draws.sort_unstable();
        // Bins at quantiles with expected mass ≥ ~1%.
        let mut edges = vec![];
        let mut k = 0u64;
        let mut last = 0.0;
        while dist.cdf(k) < 0.995 {
            if dist.cdf(k) - last >= 0.02 {
                edges.push(k);
                last = dist.cdf(k);
            }
            k += 1;
        }
        let mut chi = 0.0;
        let mut prev: Option<u64> = None;
        let mut prev_cdf = 0.0;
        for &e in edges.iter().chain(std::iter::once(&u64::MAX)) {
            let cdf = if e == u64::MAX { 1.0 } else { dist.cdf(e) };
            let exp = (cdf - prev_cdf) * n as f64;
            let obs = draws.iter().filter(|&&x| prev.is_none_or(|p| x > p) && x <= e).count() as f64;
            chi += (obs - exp).powi(2) / exp;
            prev = Some(e);
            prev_cdf = cdf;
        }
        (chi, edges.len())
    }

    #[test]
    fn poisson_law_matches_cdf_in_both_regimes() {
        for mu in [0.3, 4.0, 29.0, 30.0, 75.0, 1000.0] {
            let (chi, dof) = poisson_chi2(mu, 40_000);
            // Loose 99.9% bound for up to ~60 degrees of freedom.
            let bound = dof as f64 + 4.0 * (2.0 * dof as f64).sqrt() + 10.0;
            assert!(chi < bound, "mu={mu} chi2={chi} dof={dof}");
        }
    }

    #[test]
    fn disjoint_windows_have_uncorrelated_counts() {
        let w = AxisBox::new(Dim::TWO, [0.0; 3], [2.0, 1.0, 0.0]).unwrap();
        let n = 4000;
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for s in 0..n {
            let smp = sample_marked_ppp(&params(5.0, s), &w).unwrap();
            a.push(smp.points.iter().filter(|p| p.z[0] < 1.0).count() as f64);
            b.push(smp.points.iter().filter(|p| p.z[0] >= 1.0).count() as f64);
        }
        let (ma, _) = mean_se(&a);
        let (mb, _) = mean_se(&b);
        let cov = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (n as f64 - 1.0);
        // Var(count) = 5, so the sampling sd of the covariance is about 5/√n.
        assert!(cov.abs() < 4.0 * 5.0 / (n as f64).sqrt(), "cov {cov}");
    }

    #[test]
    fn third_moments_match_closed_forms() {
        let dists = [
            MarkDist::Constant { r0: 0.7 },
            MarkDist::Uniform { a: 0.0, b: 1.0 },
            MarkDist::ParetoTruncated { scale: 0.5, shape: 3.5, cap: 20.0 },
        ];
        assert_abs_diff_eq!(dists[1].moment(3.0), 0.25, epsilon = 1e-15);
        for (i, md) in dists.iter().enumerate() {
            let mut rng = substream(5, 9, i as u64);
            let xs: Vec<f64> = (0..200_000).map(|_| md.sample(&mut rng).powi(3)).collect();
            let (m, se) = mean_se(&xs);
            let exact = md.moment(3.0);
            assert!((m - exact).abs() <= 4.0 * se + 1e-12, "{md:?}: {m} vs {exact}");
        }
    }

    #[test]
    fn pareto_moment_matches_quadrature() {
        let md = MarkDist::ParetoTruncated { scale: 0.5, shape: 3.5, cap: 20.0 };
        let (xm, s, cap) = (0.5f64, 3.5f64, 20.0f64);
        let norm = 1.0 - (xm / cap).powf(s);
        let n = 2_000_000;
        let (la, lb) = (xm.ln(), cap.ln());
        let h = (lb - la) / n as f64;
        let mut q = 0.0;
        for k in 0..n {
            let r = (la + (k as f64 + 0.5) * h).exp();
            q += r.powi(3) * s * xm.powf(s) * r.powf(-s - 1.0) / norm * r * h;
        }
        assert_abs_diff_eq!(md.moment(3.0), q, epsilon = 1e-6 * q);
        assert_abs_diff_eq!(md.moment(0.0), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn selection_examples() {
        let dom = StarDomain::unit_ball(Dim::THREE);
        let window = scaled_window(&dom, 0.1);
        let mk = |z: Point| MarkedPointSample { window, points: vec![MarkedPoint { z, r: 1.0 }] };
        assert_eq!(select_interior(&mk([0.0; 3]), &dom, 0.1).unwrap(), vec![0]);
        // eps·z on the boundary.
        assert!(select_interior(&mk([10.0, 0.0, 0.0]), &dom, 0.1).unwrap().is_empty());
        // ε-deep exactly: strict inequality rejects.
        assert!(select_interior(&mk([9.0, 0.0, 0.0]), &dom, 0.1).unwrap().is_empty());
        let smp = sample_marked_ppp(&params(0.5, 3), &scaled_window(&dom, 1.0)).unwrap();
        assert!(select_interior(&smp, &dom, 1.0).unwrap().is_empty());
        let small = MarkedPointSample { window: unit_cube(Dim::THREE), points: vec![] };
        assert!(matches!(select_interior(&small, &dom, 0.1), Err(SamplerError::WindowTooSmall)));
    }

    #[test]
    fn perforation_examples() {
        let dom = StarDomain::unit_ball(Dim::THREE);
        let window = scaled_window(&dom, 0.1);
        let empty = MarkedPointSample { window, points: vec![] };
        let p = build_perforation(&empty, &dom, 0.1, 4.0).unwrap();
        assert!(p.holes.is_empty());
        let one = MarkedPointSample { window, points: vec![MarkedPoint { z: [1.0, 2.0, 0.0], r: 1.0 }] };
        let p = build_perforation(&one, &dom, 0.1, 4.0).unwrap();
        assert_abs_diff_eq!(p.holes[0].radius, 1e-4, epsilon = 1e-18);
        assert!(matches!(build_perforation(&one, &dom, 0.1, 3.0), Err(SamplerError::BadAlpha { .. })));
        let big = MarkedPointSample { window, points: vec![MarkedPoint { z: [0.0; 3], r: 1e5 }] };
        assert_eq!(build_perforation(&big, &dom, 0.1, 4.0).unwrap().oversized, vec![0]);
    }

    #[test]
    fn hole_volume_bound_per_realization() {
        let dom = StarDomain::unit_ball(Dim::THREE);
        for (seed, eps) in [(1u64, 0.2), (2, 0.1), (3, 0.08)] {
            let pp = ProcessParams { intensity: 2.0, marks: MarkDist::ParetoTruncated { scale: 0.5, shape: 4.0, cap: 5.0 }, seed };
            let smp = sample_marked_ppp(&pp, &scaled_window(&dom, eps)).unwrap();
            let perf = build_perforation(&smp, &dom, eps, 4.0).unwrap();
            let sum_r3: f64 = perf.interior_indices.iter().map(|&j| smp.points[j].r.powi(3)).sum();
            let bound = Dim::THREE.unit_ball_volume() * eps.powf(3.0 * (4.0 - 1.0)) * eps.powi(3) * sum_r3;
            assert!(perf.total_hole_volume() <= bound * (1.0 + 1e-12));
            for h in &perf.holes {
                assert!(dom.boundary_distance(&h.center) > eps);
                assert!(dom.boundary_distance(&h.center) > h.radius);
            }
        }
    }

    #[test]
    fn admitted_set_grows_along_dyadic_ladder() {
        let dom = StarDomain::Ellipsoid { dim: Dim::TWO, semi_axes: [1.0, 0.6, 0.0] };
        let eps_min = 2f64.powi(-6);
        for seed in 0..5 {
            let smp = sample_marked_ppp(&params(1.0, seed), &scaled_window(&dom, eps_min)).unwrap();
            let mut prev: Vec<usize> = vec![];
            for k in 2..=6 {
                let sel = select_interior(&smp, &dom, 2f64.powi(-k)).unwrap();
                assert!(prev.iter().all(|j| sel.binary_search(j).is_ok()));
                prev = sel;
            }
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let pp = params(3.0, 8);
        let smp = sample_marked_ppp(&pp, &AxisBox::cube(Dim::TWO, -1.0, 1.0).unwrap()).unwrap();
        let mut buf = Vec::new();
        smp.write_jsonl(&pp, &mut buf).unwrap();
        let (pp2, back) = MarkedPointSample::read_jsonl(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(pp, pp2);
        assert_eq!(smp, back);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn same_seed_gives_identical_sample(seed in any::<u64>(), l in 0.5..20.0f64) {
            let w = AxisBox::cube(Dim::TWO, 0.0, 2.0).unwrap();
            let a = sample_marked_ppp(&params(l, seed), &w).unwrap();
            let b = sample_marked_ppp(&params(l, seed), &w).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn marks_of_existing_points_do_not_depend_on_count(seed in any::<u64>()) {
            let w1 = AxisBox::cube(Dim::TWO, 0.0, 1.0).unwrap();
            let w2 = AxisBox::cube(Dim::TWO, 0.0, 3.0).unwrap();
            let a = sample_marked_ppp(&params(5.0, seed), &w1).unwrap();
            let b = sample_marked_ppp(&params(5.0, seed), &w2).unwrap();
            let k = a.len().min(b.len());
            for j in 0..k {
                prop_assert_eq!(a.points[j].r, b.points[j].r);
            }
        }

        #[test]
        fn unmarked_positions_match_marked_sample(seed in any::<u64>()) {
            let w = AxisBox::cube(Dim::TWO, -1.0, 1.0).unwrap();
            let a = sample_marked_ppp(&params(7.0, seed), &w).unwrap();
            let b = sample_ppp_positions(7.0, &w, seed).unwrap();
            prop_assert_eq!(a.points.iter().map(|p| p.z).collect::<Vec<_>>(), b);
        }

        #[test]
        fn all_points_lie_in_window(seed in any::<u64>()) {
            let w = AxisBox::new(Dim::THREE, [-1.0, 0.0, 2.0], [0.5, 0.3, 4.0]).unwrap();
            let s = sample_marked_ppp(&params(40.0, seed), &w).unwrap();
            for p in &s.points {
                prop_assert!(w.contains_closed(&p.z));
                prop_assert!(p.r >= 0.0 && p.r <= 1.0);
            }
        }
    }
}
