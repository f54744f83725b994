//! Axis-aligned boxes, balls and star-shaped domains in two or three dimensions.
//!
//! Points are stored as `[f64; 3]`; in dimension 2 the third coordinate is
//! ignored and kept at zero.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// A point with room for three coordinates.
pub type Point = [f64; 3];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("dimension must be 2 or 3, got {0}")]
    BadDimension(usize),
    #[error("box corner lo={lo:?} exceeds hi={hi:?}")]
    InvertedBox { lo: Point, hi: Point },
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("negative radius {0}")]
    NegativeRadius(f64),
    #[error("ball center {center:?} lies outside the box")]
    CenterOutsideBox { center: Point },
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
}

/// Spatial dimension, 2 or 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct Dim(u8);

impl Dim {
    pub const TWO: Dim = Dim(2);
    pub const THREE: Dim = Dim(3);

    pub fn new(d: usize) -> Result<Self, GeometryError> {
        match d {
            2 | 3 => Ok(Dim(d as u8)),
            _ => Err(GeometryError::BadDimension(d)),
        }
    }

    #[inline]
    pub fn get(self) -> usize {
        self.0 as usize
    }

    /// Volume of the unit ball in this dimension.
    pub fn unit_ball_volume(self) -> f64 {
        match self.0 {
            2 => PI,
            _ => 4.0 * PI / 3.0,
        }
    }
}

impl TryFrom<usize> for Dim {
    type Error = GeometryError;
    fn try_from(d: usize) -> Result<Self, Self::Error> {
        Dim::new(d)
    }
}

impl From<Dim> for usize {
    fn from(d: Dim) -> usize {
        d.get()
    }
}

#[inline]
pub fn dist2(d: Dim, a: &Point, b: &Point) -> f64 {
    (0..d.get()).map(|i| (a[i] - b[i]) * (a[i] - b[i])).sum()
}

#[inline]
pub fn dist(d: Dim, a: &Point, b: &Point) -> f64 {
    dist2(d, a, b).sqrt()
}

#[inline]
pub fn norm(d: Dim, a: &Point) -> f64 {
    (0..d.get()).map(|i| a[i] * a[i]).sum::<f64>().sqrt()
}

/// Axis-aligned box `lo ≤ x ≤ hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisBox {
    pub dim: Dim,
    pub lo: Point,
    pub hi: Point,
}

impl AxisBox {
    pub fn new(dim: Dim, lo: Point, hi: Point) -> Result<Self, GeometryError> {
        let mut lo_c = [0.0; 3];
        let mut hi_c = [0.0; 3];
        for i in 0..dim.get() {
            if !lo[i].is_finite() || !hi[i].is_finite() {
                return Err(GeometryError::NonFinite);
            }
            if lo[i] > hi[i] {
                return Err(GeometryError::InvertedBox { lo, hi });
            }
            lo_c[i] = lo[i];
            hi_c[i] = hi[i];
        }
        Ok(AxisBox { dim, lo: lo_c, hi: hi_c })
    }

    /// The cube `[lo, hi]^d`.
    pub fn cube(dim: Dim, lo: f64, hi: f64) -> Result<Self, GeometryError> {
        AxisBox::new(dim, [lo; 3], [hi; 3])
    }

    #[inline]
    pub fn side(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn min_side(&self) -> f64 {
        (0..self.dim.get()).map(|a| self.side(a)).fold(f64::INFINITY, f64::min)
    }

    pub fn max_side(&self) -> f64 {
        (0..self.dim.get()).map(|a| self.side(a)).fold(0.0, f64::max)
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim.get()).map(|a| self.side(a)).product()
    }

    pub fn is_degenerate(&self) -> bool {
        (0..self.dim.get()).any(|a| self.side(a) <= 0.0)
    }

    pub fn center(&self) -> Point {
        let mut c = [0.0; 3];
        for a in 0..self.dim.get() {
            c[a] = 0.5 * (self.lo[a] + self.hi[a]);
        }
        c
    }

    pub fn contains_closed(&self, p: &Point) -> bool {
        (0..self.dim.get()).all(|a| p[a] >= self.lo[a] && p[a] <= self.hi[a])
    }

    pub fn contains_open(&self, p: &Point) -> bool {
        (0..self.dim.get()).all(|a| p[a] > self.lo[a] && p[a] < self.hi[a])
    }

    /// Signed distance from `p` to the boundary, positive inside.
    pub fn signed_boundary_distance(&self, p: &Point) -> f64 {
        if self.contains_closed(p) {
            (0..self.dim.get())
                .map(|a| (p[a] - self.lo[a]).min(self.hi[a] - p[a]))
                .fold(f64::INFINITY, f64::min)
        } else {
            let mut s = 0.0;
            for a in 0..self.dim.get() {
                let g = (self.lo[a] - p[a]).max(p[a] - self.hi[a]).max(0.0);
                s += g * g;
            }
            -s.sqrt()
        }
    }

    /// ℓ∞ distance from `p` to the boundary.
    pub fn linf_to_boundary(&self, p: &Point) -> f64 {
        if self.contains_closed(p) {
            self.signed_boundary_distance(p)
        } else {
            (0..self.dim.get())
                .map(|a| (self.lo[a] - p[a]).max(p[a] - self.hi[a]).max(0.0))
                .fold(0.0, f64::max)
        }
    }
}

/// Infimum of the ℓ∞ distance between points of `a` and `b`.
pub fn dist_inf(a: &AxisBox, b: &AxisBox) -> f64 {
    (0..a.dim.get())
        .map(|i| (b.lo[i] - a.hi[i]).max(a.lo[i] - b.hi[i]).max(0.0))
        .fold(0.0, f64::max)
}

/// `{x : dist_∞(x, b) ≤ margin}`. Panics on a negative margin.
pub fn inflate(b: &AxisBox, margin: f64) -> AxisBox {
    assert!(margin >= 0.0, "inflate margin must be non-negative");
    let mut out = *b;
    for a in 0..b.dim.get() {
        out.lo[a] -= margin;
        out.hi[a] += margin;
    }
    out
}

/// Smallest box containing both arguments.
pub fn bounding_box(a: &AxisBox, b: &AxisBox) -> AxisBox {
    let mut out = *a;
    for i in 0..a.dim.get() {
        out.lo[i] = a.lo[i].min(b.lo[i]);
        out.hi[i] = a.hi[i].max(b.hi[i]);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Point, radius: f64) -> Result<Self, GeometryError> {
        if !(radius >= 0.0) {
            return Err(GeometryError::NegativeRadius(radius));
        }
        Ok(Ball { center, radius })
    }

    /// Signed distance to the sphere, positive outside the ball.
    #[inline]
    pub fn surface_distance(&self, d: Dim, p: &Point) -> f64 {
        dist(d, &self.center, p) - self.radius
    }
}

/// Distance between the ball surface and the box boundary; negative if the ball pokes out.
pub fn ball_box_clearance(ball: &Ball, b: &AxisBox) -> Result<f64, GeometryError> {
    if !b.contains_closed(&ball.center) {
        return Err(GeometryError::CenterOutsideBox { center: ball.center });
    }
    Ok(b.signed_boundary_distance(&ball.center) - ball.radius)
}

/// Boundary radius samples for a radial domain `{x : |x| < R(x/|x|)}`.
///
/// In 2D `radii[k]` is the radius at angle `2πk/len`. In 3D the table is
/// `n_polar + 1` rows of `n_azimuth` values: row `i` sits at polar angle
/// `π i / n_polar`, column `j` at azimuth `2π j / n_azimuth`. Values are
/// interpolated (bi)linearly and periodically in azimuth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialTable {
    pub dim: Dim,
    pub radii: Vec<f64>,
    pub n_polar: usize,
    pub n_azimuth: usize,
}

impl RadialTable {
    pub fn new_2d(radii: Vec<f64>) -> Result<Self, GeometryError> {
        let t = RadialTable { dim: Dim::TWO, n_polar: 0, n_azimuth: radii.len(), radii };
        t.validate()?;
        Ok(t)
    }

    pub fn new_3d(radii: Vec<f64>, n_polar: usize, n_azimuth: usize) -> Result<Self, GeometryError> {
        let t = RadialTable { dim: Dim::THREE, radii, n_polar, n_azimuth };
        t.validate()?;
        Ok(t)
    }

    fn validate(&self) -> Result<(), GeometryError> {
        let bad = |m: &str| Err(GeometryError::InvalidDomain(m.to_string()));
        if self.radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return bad("radial table entries must be positive and finite");
        }
        match self.dim.get() {
            2 => {
                if self.radii.len() < 3 {
                    return bad("2D radial table needs at least 3 samples");
                }
            }
            _ => {
                if self.n_polar < 2 || self.n_azimuth < 3 {
                    return bad("3D radial table needs n_polar ≥ 2 and n_azimuth ≥ 3");
                }
                if self.radii.len() != (self.n_polar + 1) * self.n_azimuth {
                    return bad("3D radial table has the wrong length");
                }
                for row in [0, self.n_polar] {
                    let r = &self.radii[row * self.n_azimuth..(row + 1) * self.n_azimuth];
                    if r.iter().any(|v| *v != r[0]) {
                        return bad("pole rows must be constant");
                    }
                }
            }
        }
        Ok(())
    }

    /// Radius along the angular parameters (θ in 2D; polar θ and azimuth φ in 3D).
    fn radius_at(&self, theta: f64, phi: f64) -> f64 {
        let tau = 2.0 * PI;
        match self.dim.get() {
            2 => {
                let m = self.radii.len();
                let s = theta.rem_euclid(tau) / tau * m as f64;
                let k = (s.floor() as usize).min(m - 1);
                let t = s - k as f64;
                self.radii[k] * (1.0 - t) + self.radii[(k + 1) % m] * t
            }
            _ => {
                let (np, na) = (self.n_polar, self.n_azimuth);
                let sp = (theta.clamp(0.0, PI) / PI * np as f64).min(np as f64);
                let i = (sp.floor() as usize).min(np - 1);
                let tp = sp - i as f64;
                let sa = phi.rem_euclid(tau) / tau * na as f64;
                let j = (sa.floor() as usize).min(na - 1);
                let ta = sa - j as f64;
                let j1 = (j + 1) % na;
                let at = |r: usize, c: usize| self.radii[r * na + c];
                let lo = at(i, j) * (1.0 - ta) + at(i, j1) * ta;
                let hi = at(i + 1, j) * (1.0 - ta) + at(i + 1, j1) * ta;
                lo * (1.0 - tp) + hi * tp
            }
        }
    }

    fn angles_of(&self, x: &Point) -> (f64, f64) {
        match self.dim.get() {
            2 => (x[1].atan2(x[0]), 0.0),
            _ => {
                let r = norm(Dim::THREE, x);
                let theta = if r == 0.0 { 0.0 } else { (x[2] / r).clamp(-1.0, 1.0).acos() };
                (theta, x[1].atan2(x[0]))
            }
        }
    }

    fn boundary_point(&self, theta: f64, phi: f64) -> Point {
        let r = self.radius_at(theta, phi);
        match self.dim.get() {
            2 => [r * theta.cos(), r * theta.sin(), 0.0],
            _ => [
                r * theta.sin() * phi.cos(),
                r * theta.sin() * phi.sin(),
                r * theta.cos(),
            ],
        }
    }

    fn max_radius(&self) -> f64 {
        self.radii.iter().copied().fold(0.0, f64::max)
    }

    fn min_radius(&self) -> f64 {
        self.radii.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Unsigned distance from `x` to the boundary surface.
    ///
    /// Coarse scan over the angular parameters, then alternating bisection on
    /// the derivative of the squared distance along each parameter.
    fn boundary_distance_unsigned(&self, x: &Point) -> f64 {
        let d = self.dim;
        let f = |t: f64, p: f64| dist2(d, x, &self.boundary_point(t, p));
        match d.get() {
            2 => {
                let m = (self.radii.len() * 16).max(256);
                let step = 2.0 * PI / m as f64;
                let mut best = (f64::INFINITY, 0.0);
                for k in 0..m {
                    let t = k as f64 * step;
                    let v = f(t, 0.0);
                    if v < best.0 {
                        best = (v, t);
                    }
                }
                let t = refine_1d(|t| f(t, 0.0), best.1 - step, best.1 + step);
                f(t, 0.0).min(best.0).sqrt()
            }
            _ => {
                let mp = (self.n_polar * 8).max(64);
                let ma = (self.n_azimuth * 8).max(128);
                let (sp, sa) = (PI / mp as f64, 2.0 * PI / ma as f64);
                let mut best = (f64::INFINITY, 0.0, 0.0);
                for i in 0..=mp {
                    for j in 0..ma {
                        let (t, p) = (i as f64 * sp, j as f64 * sa);
                        let v = f(t, p);
                        if v < best.0 {
                            best = (v, t, p);
                        }
                    }
                }
                let (mut t, mut p) = (best.1, best.2);
                let mut val = best.0;
                for _ in 0..40 {
                    let t_new = refine_1d(|s| f(s, p), (t - sp).max(0.0), (t + sp).min(PI));
                    let p_new = refine_1d(|s| f(t_new, s), p - sa, p + sa);
                    let v = f(t_new, p_new);
                    let done = (val - v).abs() <= 1e-24 * val.max(1e-300);
                    if v <= val {
                        t = t_new;
                        p = p_new;
                        val = v;
                    }
                    if done {
                        break;
                    }
                }
                val.sqrt()
            }
        }
    }

    fn volume(&self) -> f64 {
        match self.dim.get() {
            2 => {
                // Exact for piecewise-linear R: ∫ (a + (b−a)t)² dt = (a² + ab + b²)/3.
                let m = self.radii.len();
                let dth = 2.0 * PI / m as f64;
                (0..m)
                    .map(|k| {
                        let (a, b) = (self.radii[k], self.radii[(k + 1) % m]);
                        0.5 * dth * (a * a + a * b + b * b) / 3.0
                    })
                    .sum()
            }
            _ => {
                let (mp, ma) = (self.n_polar * 16, self.n_azimuth * 16);
                let (dt, dp) = (PI / mp as f64, 2.0 * PI / ma as f64);
                let mut s = 0.0;
                for i in 0..mp {
                    let t = (i as f64 + 0.5) * dt;
                    for j in 0..ma {
                        let p = (j as f64 + 0.5) * dp;
                        s += self.radius_at(t, p).powi(3) / 3.0 * t.sin() * dt * dp;
                    }
                }
                s
            }
        }
    }
}

/// Minimizer of a smooth function on `[a, b]` by bisection on the sign of a
/// central-difference derivative, to relative parameter tolerance 1e-12.
fn refine_1d<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let scale = a.abs().max(b.abs()).max(1.0);
    let tol = 1e-12 * scale;
    let slope = |t: f64| {
        let e = 1e-7 * scale;
        f(t + e) - f(t - e)
    };
    if slope(a) >= 0.0 {
        return if f(a) <= f(b) { a } else { b };
    }
    if slope(b) <= 0.0 {
        return b;
    }
    while b - a > tol {
        let m = 0.5 * (a + b);
        if slope(m) > 0.0 {
            b = m;
        } else {
            a = m;
        }
    }
    0.5 * (a + b)
}

/// Domain star-shaped with respect to the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StarDomain {
    /// Ball of the given radius centered at the origin.
    Ball { dim: Dim, radius: f64 },
    /// Axis box containing the origin in its interior.
    Box { aabb: AxisBox },
    /// Origin-centered, axis-aligned ellipsoid.
    Ellipsoid { dim: Dim, semi_axes: Point },
    Radial { table: RadialTable },
}

impl StarDomain {
    pub fn unit_ball(dim: Dim) -> Self {
        StarDomain::Ball { dim, radius: 1.0 }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let bad = |m: &str| Err(GeometryError::InvalidDomain(m.to_string()));
        match self {
            StarDomain::Ball { radius, .. } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return bad("ball radius must be positive");
                }
            }
            StarDomain::Box { aabb } => {
                let o = [0.0; 3];
                if !aabb.contains_open(&o) {
                    return bad("box must contain the origin in its interior");
                }
            }
            StarDomain::Ellipsoid { dim, semi_axes } => {
                if semi_axes[..dim.get()].iter().any(|e| !(e.is_finite() && *e > 0.0)) {
                    return bad("semi-axes must be positive");
                }
            }
            StarDomain::Radial { table } => table.validate()?,
        }
        Ok(())
    }

    pub fn dim(&self) -> Dim {
        match self {
            StarDomain::Ball { dim, .. } | StarDomain::Ellipsoid { dim, .. } => *dim,
            StarDomain::Box { aabb } => aabb.dim,
            StarDomain::Radial { table } => table.dim,
        }
    }

    /// Signed distance to the boundary, positive in the interior.
    pub fn boundary_distance(&self, x: &Point) -> f64 {
        let d = self.dim();
        match self {
            StarDomain::Ball { radius, .. } => radius - norm(d, x),
            StarDomain::Box { aabb } => aabb.signed_boundary_distance(x),
            StarDomain::Ellipsoid { semi_axes, .. } => ellipsoid_signed_distance(d, semi_axes, x),
            StarDomain::Radial { table } => {
                let u = table.boundary_distance_unsigned(x);
                if self.contains(x) {
                    u
                } else {
                    -u
                }
            }
        }
    }

    /// Open-set membership.
    pub fn contains(&self, x: &Point) -> bool {
        let d = self.dim();
        match self {
            StarDomain::Ball { radius, .. } => norm(d, x) < *radius,
            StarDomain::Box { aabb } => aabb.contains_open(x),
            StarDomain::Ellipsoid { semi_axes, .. } => {
                (0..d.get()).map(|i| (x[i] / semi_axes[i]).powi(2)).sum::<f64>() < 1.0
            }
            StarDomain::Radial { table } => {
                let r = norm(d, x);
                if r == 0.0 {
                    return true;
                }
                let (t, p) = table.angles_of(x);
                r < table.radius_at(t, p)
            }
        }
    }

    pub fn bbox(&self) -> AxisBox {
        let d = self.dim();
        let sym = |h: Point| AxisBox { dim: d, lo: [-h[0], -h[1], -h[2]], hi: h };
        match self {
            StarDomain::Ball { radius, .. } => {
                let mut h = [0.0; 3];
                h[..d.get()].fill(*radius);
                sym(h)
            }
            StarDomain::Box { aabb } => *aabb,
            StarDomain::Ellipsoid { semi_axes, .. } => {
                let mut h = [0.0; 3];
                h[..d.get()].copy_from_slice(&semi_axes[..d.get()]);
                sym(h)
            }
            StarDomain::Radial { table } => {
                let mut h = [0.0; 3];
                h[..d.get()].fill(table.max_radius());
                sym(h)
            }
        }
    }

    pub fn volume(&self) -> f64 {
        let d = self.dim();
        match self {
            StarDomain::Ball { radius, .. } => d.unit_ball_volume() * radius.powi(d.get() as i32),
            StarDomain::Box { aabb } => aabb.volume(),
            StarDomain::Ellipsoid { semi_axes, .. } => {
                d.unit_ball_volume() * semi_axes[..d.get()].iter().product::<f64>()
            }
            StarDomain::Radial { table } => table.volume(),
        }
    }

    /// A lower bound on the largest inscribed ball radius around the origin.
    pub fn origin_depth(&self) -> f64 {
        match self {
            StarDomain::Radial { table } => table.min_radius().min(self.boundary_distance(&[0.0; 3])),
            _ => self.boundary_distance(&[0.0; 3]),
        }
    }
}

/// Signed distance to an axis-aligned ellipsoid, positive inside.
fn ellipsoid_signed_distance(d: Dim, semi_axes: &Point, x: &Point) -> f64 {
    let n = d.get();
    // Reflect into the positive orthant and sort axes by decreasing length,
    // placing zero components first among equal lengths.
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| {
        semi_axes[b]
            .partial_cmp(&semi_axes[a])
            .unwrap()
            .then(x[a].abs().partial_cmp(&x[b].abs()).unwrap().reverse())
    });
    let e: Vec<f64> = idx.iter().map(|&i| semi_axes[i]).collect();
    let y: Vec<f64> = idx.iter().map(|&i| x[i].abs()).collect();
    let c = ellipsoid_closest_sorted(&e, &y);
    let dd = y.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let inside = y.iter().zip(&e).map(|(a, b)| (a / b).powi(2)).sum::<f64>() < 1.0;
    if inside {
        dd
    } else {
        -dd
    }
}

/// Closest ellipsoid point for `y ≥ 0` with `e` sorted decreasingly.
fn ellipsoid_closest_sorted(e: &[f64], y: &[f64]) -> Vec<f64> {
    let n = e.len();
    if n == 1 {
        return vec![e[0]];
    }
    let last = n - 1;
    if y[last] > 0.0 {
        return ellipsoid_closest_positive(e, y);
    }
    let el2 = e[last] * e[last];
    let mut x = vec![0.0; n];
    let mut sum = 0.0;
    let mut inside = true;
    for i in 0..last {
        if y[i] > 0.0 {
            let den = e[i] * e[i] - el2;
            let q = e[i] * y[i] / den;
            if !(den > 0.0) || q >= 1.0 {
                inside = false;
                break;
            }
            x[i] = e[i] * q;
            sum += q * q;
        }
    }
    if inside && sum < 1.0 {
        x[last] = e[last] * (1.0 - sum).sqrt();
        return x;
    }
    let mut sub = ellipsoid_closest_sorted(&e[..last], &y[..last]);
    sub.push(0.0);
    sub
}

/// Case where the component along the shortest axis is positive: a single
/// root of the secular equation, found by bisection.
fn ellipsoid_closest_positive(e: &[f64], y: &[f64]) -> Vec<f64> {
    let n = e.len();
    let el = e[n - 1];
    let pos: Vec<usize> = (0..n).filter(|&i| y[i] > 0.0).collect();
    let r: Vec<f64> = pos.iter().map(|&i| (e[i] / el).powi(2)).collect();
    let z: Vec<f64> = pos.iter().map(|&i| y[i] / e[i]).collect();
    let g = z.iter().map(|v| v * v).sum::<f64>() - 1.0;
    let mut x = vec![0.0; n];
    if g == 0.0 {
        x.copy_from_slice(y);
        return x;
    }
    let zl = *z.last().unwrap();
    let mut s0 = zl - 1.0;
    let mut s1 = if g < 0.0 {
        0.0
    } else {
        r.iter().zip(&z).map(|(a, b)| (a * b).powi(2)).sum::<f64>().sqrt() - 1.0
    };
    let mut s = 0.5 * (s0 + s1);
    for _ in 0..2200 {
        s = 0.5 * (s0 + s1);
        if s == s0 || s == s1 {
            break;
        }
        let gs = r.iter().zip(&z).map(|(ri, zi)| (ri * zi / (s + ri)).powi(2)).sum::<f64>() - 1.0;
        if gs > 0.0 {
            s0 = s;
        } else if gs < 0.0 {
            s1 = s;
        } else {
            break;
        }
    }
    for (k, &i) in pos.iter().enumerate() {
        x[i] = r[k] * y[i] / (s + r[k]);
    }
    x
}
