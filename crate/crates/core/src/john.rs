//! Paths certifying that a box with a few small holes is a John domain.
//!
//! Coordinates are normalized: the box is centered at the origin and its
//! shortest side has length 1. That side's axis is called vertical and the
//! anchor point `x0` sits on the highway directly below the top face.
//!
//! Every path goes from `x` to the highway `L` (the shell at ℓ∞-distance `w`
//! inside the box) and then along `L` to `x0`:
//! - from the ring `G` around `L`, by the shortest segment to `L`;
//! - from the interior, straight along the axis of a cone that misses all holes;
//! - on `L`, directly along axis-parallel segments of the shell.

use crate::geometry::{AxisBox, Ball, Dim, Point};
use crate::rng::{substream, TAG_AUX};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JohnError {
    #[error("no free cone at {x:?}: largest projected radius {max_projection} vs disc radius {disc_radius}")]
    ConeNotFound { x: Point, max_projection: f64, disc_radius: f64 },
    #[error("point {0:?} is not in the carved box")]
    OutsideDomain(Point),
    #[error("invalid carved box: {0}")]
    Invalid(String),
}

/// Angular radius of the candidate discs, `π/(4N+4)`.
pub fn disc_radius(n: usize) -> f64 {
    PI / (4.0 * n as f64 + 4.0)
}

/// Cap on the witness constant for admissible inputs, `√d·(64N² + 1)`.
pub fn witness_cap(d: Dim, n: usize) -> f64 {
    (d.get() as f64).sqrt() * (64.0 * (n * n) as f64 + 1.0)
}

/// A box minus disjoint balls, in normalized coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarvedBox {
    pub dim: Dim,
    /// Half side lengths; the box is `∏(−half_a, half_a)`.
    pub half: Point,
    pub balls: Vec<Ball>,
    pub n: usize,
    /// Highway offset `w` from the box boundary.
    pub highway: f64,
    pub vertical: usize,
    /// Physical center and length unit, for mapping back.
    pub origin: Point,
    pub unit: f64,
}

impl CarvedBox {
    /// Normalizes a physical cluster box with its holes. `scale` is the cube
    /// side `ε^{1+δ}`, so the highway sits at `scale/(32N)` and balls must
    /// keep `scale/(16N)` from the box boundary.
    pub fn new(aabb: &AxisBox, balls: &[Ball], n: usize, scale: f64) -> Result<Self, JohnError> {
        let c = Self::new_unchecked(aabb, balls, n, scale)?;
        let d = c.dim.get();
        for (i, b) in c.balls.iter().enumerate() {
            let clearance = (0..d).map(|a| c.half[a] - b.center[a].abs()).fold(f64::INFINITY, f64::min) - b.radius;
            if clearance < 2.0 * c.highway * (1.0 - 1e-12) {
                return Err(JohnError::Invalid(format!("ball {i} clearance {clearance} below {}", 2.0 * c.highway)));
            }
            for (j, o) in c.balls[..i].iter().enumerate() {
                if crate::geometry::dist(c.dim, &b.center, &o.center) <= b.radius + o.radius {
                    return Err(JohnError::Invalid(format!("balls {j} and {i} intersect")));
                }
            }
        }
        Ok(c)
    }

    /// Same normalization without clearance or disjointness checks.
    pub fn new_unchecked(aabb: &AxisBox, balls: &[Ball], n: usize, scale: f64) -> Result<Self, JohnError> {
        let d = aabb.dim.get();
        if aabb.is_degenerate() || n == 0 || !(scale > 0.0) {
            return Err(JohnError::Invalid("degenerate box, zero capacity or bad scale".into()));
        }
        let unit = aabb.min_side();
        let origin = aabb.center();
        let mut half = [0.0; 3];
        for a in 0..d {
            half[a] = aabb.side(a) / (2.0 * unit);
        }
        // Shortest axis, ties to the highest index.
        let vertical = (0..d).rev().min_by(|&a, &b| half[a].partial_cmp(&half[b]).unwrap()).unwrap();
        let highway = scale / (32.0 * n as f64) / unit;
        if highway >= 0.25 {
            return Err(JohnError::Invalid(format!("highway offset {highway} too wide for the box")));
        }
        let balls = balls
            .iter()
            .map(|b| {
                let mut c = [0.0; 3];
                for a in 0..d {
                    c[a] = (b.center[a] - origin[a]) / unit;
                }
                Ball { center: c, radius: b.radius / unit }
            })
            .collect();
        Ok(CarvedBox { dim: aabb.dim, half, balls, n, highway, vertical, origin, unit })
    }

    /// Half sides of the highway shell.
    pub fn shell(&self) -> Point {
        let mut h = [0.0; 3];
        for a in 0..self.dim.get() {
            h[a] = self.half[a] - self.highway;
        }
        h
    }

    pub fn anchor(&self) -> Point {
        let mut x = [0.0; 3];
        x[self.vertical] = self.shell()[self.vertical];
        x
    }

    /// Euclidean distance to the box boundary, negative outside.
    pub fn box_distance(&self, x: &Point) -> f64 {
        (0..self.dim.get()).map(|a| self.half[a] - x[a].abs()).fold(f64::INFINITY, f64::min)
    }

    /// `dist(x, ∂U)`, negative outside `U`.
    pub fn boundary_distance(&self, x: &Point) -> f64 {
        let mut g = self.box_distance(x);
        for b in &self.balls {
            g = g.min(b.surface_distance(self.dim, x));
        }
        g
    }

    pub fn contains(&self, x: &Point) -> bool {
        self.boundary_distance(x) > 0.0
    }

    pub fn to_physical(&self, x: &Point) -> Point {
        let mut p = [0.0; 3];
        for a in 0..self.dim.get() {
            p[a] = self.origin[a] + self.unit * x[a];
        }
        p
    }

    pub fn diameter(&self) -> f64 {
        2.0 * (0..self.dim.get()).map(|a| self.half[a] * self.half[a]).sum::<f64>().sqrt()
    }

    /// Step for witness sampling: a tenth of the smallest feature size.
    fn base_step(&self) -> f64 {
        let mut m = self.highway;
        for b in &self.balls {
            m = m.min(b.radius.max(1e-3 * self.highway));
        }
        0.1 * m
    }
}

fn sub(d: usize, a: &Point, b: &Point) -> Point {
    let mut r = [0.0; 3];
    for i in 0..d {
        r[i] = a[i] - b[i];
    }
    r
}

fn dot(d: usize, a: &Point, b: &Point) -> f64 {
    (0..d).map(|i| a[i] * b[i]).sum()
}

fn normalize(d: usize, a: &Point) -> Point {
    let n = dot(d, a, a).sqrt();
    let mut r = [0.0; 3];
    for i in 0..d {
        r[i] = a[i] / n;
    }
    r
}

fn angle(d: usize, u: &Point, v: &Point) -> f64 {
    dot(d, u, v).clamp(-1.0, 1.0).acos()
}

/// Angular radii `asin(ρ/|c − x|)` of the balls seen from `x`.
pub fn projection_radii(d: Dim, x: &Point, balls: &[Ball]) -> Vec<f64> {
    balls
        .iter()
        .map(|b| {
            let r = crate::geometry::dist(d, x, &b.center);
            (b.radius / r).min(1.0).asin()
        })
        .collect()
}

/// Candidate cone axes: `N` directions on the rim of the half-sphere opposite `b`.
pub fn candidate_directions(d: Dim, b: &Point, n: usize) -> Vec<Point> {
    let dd = d.get();
    let r = disc_radius(n);
    let pole = {
        let mut p = [0.0; 3];
        for a in 0..dd {
            p[a] = -b[a];
        }
        p
    };
    let theta = PI / 2.0 - 2.0 * r;
    if dd == 2 {
        let base = pole[1].atan2(pole[0]);
        (0..n)
            .map(|k| {
                let psi = if n == 1 { 0.0 } else { -theta + k as f64 * 2.0 * theta / (n - 1) as f64 };
                [(base + psi).cos(), (base + psi).sin(), 0.0]
            })
            .collect()
    } else {
        // Frame perpendicular to the pole, seeded by the least aligned axis.
        let e = (0..3).min_by(|&i, &j| pole[i].abs().partial_cmp(&pole[j].abs()).unwrap()).unwrap();
        let mut u1 = [0.0; 3];
        u1[e] = 1.0;
        let pr = dot(3, &u1, &pole);
        for a in 0..3 {
            u1[a] -= pr * pole[a];
        }
        let u1 = normalize(3, &u1);
        let u2 = [
            pole[1] * u1[2] - pole[2] * u1[1],
            pole[2] * u1[0] - pole[0] * u1[2],
            pole[0] * u1[1] - pole[1] * u1[0],
        ];
        (0..n)
            .map(|k| {
                let phi = 2.0 * PI * k as f64 / n as f64;
                let mut v = [0.0; 3];
                for a in 0..3 {
                    v[a] = theta.cos() * pole[a] + theta.sin() * (phi.cos() * u1[a] + phi.sin() * u2[a]);
                }
                normalize(3, &v)
            })
            .collect()
    }
}

/// Cone at `x` avoiding all balls: `(axis, half_angle)`.
///
/// The ball with the nearest center is excluded by looking into the opposite
/// half-sphere; among `N` candidate axes on its rim, the one with the largest
/// angular margin to the other projections is returned if that margin is at
/// least the disc radius.
pub fn find_escape_cone(d: Dim, x: &Point, balls: &[Ball], n: usize) -> Result<(Point, f64), JohnError> {
    let dd = d.get();
    if balls.is_empty() {
        let mut up = [0.0; 3];
        up[dd - 1] = 1.0;
        return Ok((up, PI / 2.0));
    }
    let mut nearest = 0;
    let mut best = f64::INFINITY;
    for (i, b) in balls.iter().enumerate() {
        let r = crate::geometry::dist2(d, x, &b.center);
        if r < best {
            best = r;
            nearest = i;
        }
    }
    let b1 = normalize(dd, &sub(dd, &balls[nearest].center, x));
    let proj = projection_radii(d, x, balls);
    let dirs: Vec<Point> = balls.iter().map(|b| normalize(dd, &sub(dd, &b.center, x))).collect();
    let r = disc_radius(n);
    let mut choice: Option<(Point, f64)> = None;
    for c in candidate_directions(d, &b1, n) {
        let margin = dirs.iter().zip(&proj).map(|(u, p)| angle(dd, &c, u) - p).fold(PI / 2.0, f64::min);
        if margin >= r && choice.map_or(true, |(_, m)| margin > m) {
            choice = Some((c, margin));
        }
    }
    choice.ok_or_else(|| JohnError::ConeNotFound {
        x: *x,
        max_projection: proj.iter().enumerate().filter(|(i, _)| *i != nearest).map(|(_, p)| *p).fold(0.0, f64::max),
        disc_radius: r,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Highway,
    Ring,
    Interior,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JohnPath {
    pub vertices: Vec<Point>,
    pub total_length: f64,
    pub witness_constant: f64,
    pub regime: Regime,
}

/// Axis-parallel route along the shell from `y ∈ L` to the anchor.
fn highway_route(cb: &CarvedBox, y: &Point) -> Vec<Point> {
    let d = cb.dim.get();
    let v = cb.vertical;
    let h = cb.shell();
    let tol = 1e-12 * (1.0 + h[v]);
    let others: Vec<usize> = (0..d).filter(|&a| a != v).collect();
    let mut route = vec![*y];
    let mut cur = *y;
    let push = |cur: &mut Point, axis: usize, value: f64, route: &mut Vec<Point>| {
        if cur[axis] != value {
            cur[axis] = value;
            route.push(*cur);
        }
    };
    let on_top = (y[v] - h[v]).abs() <= tol;
    let on_bottom = (y[v] + h[v]).abs() <= tol;
    let side = others.iter().find(|&&a| (y[a].abs() - h[a]).abs() <= tol).copied();
    if !on_top {
        if side.is_none() && on_bottom {
            // Choose the side face with the shortest unfolded route.
            let mut best: Option<(f64, usize, f64)> = None;
            for &a in &others {
                for sgn in [-1.0, 1.0] {
                    let len = (sgn * h[a] - y[a]).abs() + h[a];
                    if best.map_or(true, |(l, _, _)| len < l) {
                        best = Some((len, a, sgn));
                    }
                }
            }
            let (_, a, sgn) = best.unwrap();
            push(&mut cur, a, sgn * h[a], &mut route);
        }
        push(&mut cur, v, h[v], &mut route);
    }
    for &a in &others {
        push(&mut cur, a, 0.0, &mut route);
    }
    route
}

/// Path from `x` to the anchor with its witness constant.
pub fn construct_john_path(x: &Point, cb: &CarvedBox) -> Result<JohnPath, JohnError> {
    let d = cb.dim.get();
    if !cb.contains(x) {
        return Err(JohnError::OutsideDomain(*x));
    }
    let h = cb.shell();
    let w = cb.highway;
    // ℓ∞ distance to the shell, signed positive inside the shell.
    let inner = (0..d).map(|a| h[a] - x[a].abs()).fold(f64::INFINITY, f64::min);
    let (regime, entry) = if inner.abs() <= 1e-12 * (1.0 + h[cb.vertical]) {
        (Regime::Highway, *x)
    } else if inner < w {
        let mut y = *x;
        if inner < 0.0 {
            for a in 0..d {
                y[a] = y[a].clamp(-h[a], h[a]);
            }
        } else {
            let a = (0..d).min_by(|&i, &j| (h[i] - x[i].abs()).partial_cmp(&(h[j] - x[j].abs())).unwrap()).unwrap();
            y[a] = h[a].copysign(x[a]);
        }
        (Regime::Ring, y)
    } else {
        let (u, _) = find_escape_cone(cb.dim, x, &cb.balls, cb.n)?;
        let mut t_exit = f64::INFINITY;
        let mut hit = 0;
        for a in 0..d {
            if u[a] != 0.0 {
                let t = (h[a].copysign(u[a]) - x[a]) / u[a];
                if t < t_exit {
                    t_exit = t;
                    hit = a;
                }
            }
        }
        let mut y = *x;
        for a in 0..d {
            y[a] = (x[a] + t_exit * u[a]).clamp(-h[a], h[a]);
        }
        y[hit] = h[hit].copysign(u[hit]);
        (Regime::Interior, y)
    };
    let mut vertices = vec![*x];
    if entry != *x {
        vertices.push(entry);
    }
    vertices.extend(highway_route(cb, &entry).into_iter().skip(1));
    let total_length = vertices.windows(2).map(|s| crate::geometry::dist(cb.dim, &s[0], &s[1])).sum();
    let witness_constant = path_witness(cb, x, &vertices);
    Ok(JohnPath { vertices, total_length, witness_constant, regime })
}

/// Largest `|Γ − x| / dist(Γ, ∂U)` over samples spaced at most `step` apart.
/// Infinite if a sample leaves `U`.
pub fn sampled_witness(cb: &CarvedBox, x: &Point, vertices: &[Point], step: f64) -> f64 {
    let d = cb.dim;
    let mut wmax: f64 = 0.0;
    for s in vertices.windows(2) {
        let len = crate::geometry::dist(d, &s[0], &s[1]);
        let k = (len / step).ceil().max(1.0) as usize;
        for i in 0..=k {
            let t = i as f64 / k as f64;
            let mut p = [0.0; 3];
            for a in 0..d.get() {
                p[a] = s[0][a] + t * (s[1][a] - s[0][a]);
            }
            let g = cb.boundary_distance(&p);
            let f = crate::geometry::dist(d, &p, x);
            if g <= 0.0 {
                return f64::INFINITY;
            }
            wmax = wmax.max(f / g);
        }
    }
    wmax
}

/// Witness with step halving until two successive values agree within 1%.
fn path_witness(cb: &CarvedBox, x: &Point, vertices: &[Point]) -> f64 {
    if vertices.len() < 2 {
        return 0.0;
    }
    let mut step = cb.base_step();
    let mut w = sampled_witness(cb, x, vertices, step);
    for _ in 0..8 {
        if !w.is_finite() {
            return w;
        }
        step *= 0.5;
        let w2 = sampled_witness(cb, x, vertices, step);
        let done = (w2 - w).abs() <= 0.01 * w;
        w = w.max(w2);
        if done {
            break;
        }
    }
    w
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JohnEstimate {
    pub c_hat: f64,
    pub worst_point: Point,
    pub points: usize,
}

/// Probe points: corners, ring midpoints on each face, and offsets just outside each ball.
pub fn adversarial_points(cb: &CarvedBox) -> Vec<Point> {
    let d = cb.dim.get();
    let w = cb.highway;
    let mut out = Vec::new();
    for mask in 0..(1usize << d) {
        let mut p = [0.0; 3];
        for a in 0..d {
            let s = if mask >> a & 1 == 1 { 1.0 } else { -1.0 };
            p[a] = s * (cb.half[a] - 0.5 * w);
        }
        out.push(p);
    }
    for a in 0..d {
        for s in [-1.0, 1.0] {
            for depth in [0.5 * w, 1.5 * w] {
                let mut p = [0.0; 3];
                p[a] = s * (cb.half[a] - depth);
                out.push(p);
            }
        }
    }
    for b in &cb.balls {
        for a in 0..d {
            for s in [-1.0, 1.0] {
                let mut p = b.center;
                p[a] += s * b.radius * (1.0 + 1e-3);
                if cb.contains(&p) {
                    out.push(p);
                }
            }
        }
    }
    out
}

/// Largest witness constant over uniformly sampled and adversarial points.
/// A point whose cone search fails contributes an infinite constant.
pub fn estimate_john_constant(cb: &CarvedBox, samples: usize, seed: u64) -> JohnEstimate {
    let d = cb.dim.get();
    let mut rng = substream(seed, TAG_AUX, 0x6a6f686e);
    let mut pts = adversarial_points(cb);
    let mut drawn = 0;
    while drawn < samples {
        let mut p = [0.0; 3];
        for a in 0..d {
            p[a] = rng.random_range(-cb.half[a]..cb.half[a]);
        }
        if cb.contains(&p) {
            pts.push(p);
            drawn += 1;
        }
    }
    let vals: Vec<f64> = pts
        .par_iter()
        .map(|p| construct_john_path(p, cb).map_or(f64::INFINITY, |path| path.witness_constant))
        .collect();
    let (mut c_hat, mut worst) = (0.0, pts[0]);
    for (p, v) in pts.iter().zip(&vals) {
        if *v > c_hat {
            c_hat = *v;
            worst = *p;
        }
    }
    JohnEstimate { c_hat, worst_point: worst, points: pts.len() }
}

/// Two balls of radius `ε^α` whose centers are `2ε^{1+κ}` apart at the
/// center of a box with sides `(1, 1, ½)·ε^{1+δ}`: the ε-family used for the
/// uniformity sweep.
pub fn two_ball_scene(d: Dim, eps: f64, alpha: f64, kappa: f64, n: usize) -> Result<CarvedBox, JohnError> {
    let dd = d.get();
    let delta = crate::clusterer::delta_of_alpha(alpha, d);
    let s = eps.powf(1.0 + delta);
    let mut hi = [0.0; 3];
    for a in 0..dd {
        hi[a] = if a == dd - 1 { 0.25 * s } else { 0.5 * s };
    }
    let lo = [-hi[0], -hi[1], -hi[2]];
    let aabb = AxisBox::new(d, lo, hi).map_err(|e| JohnError::Invalid(e.to_string()))?;
    let sep = eps.powf(1.0 + kappa);
    let r = eps.powf(alpha);
    let balls = [Ball { center: [-sep, 0.0, 0.0], radius: r }, Ball { center: [sep, 0.0, 0.0], radius: r }];
    CarvedBox::new(&aabb, &balls, n, s)
}

/// Negative control: one ball just below the anchor, inside the clearance band.
pub fn clearance_violation_scene(d: Dim, n: usize) -> CarvedBox {
    let dd = d.get();
    let mut hi = [0.5; 3];
    if dd == 2 {
        hi[2] = 0.0;
    }
    let lo = [-hi[0], -hi[1], -hi[2]];
    let aabb = AxisBox::new(d, lo, hi).unwrap();
    let scale = 1.0;
    let w = scale / (32.0 * n as f64);
    let rho = 0.2 * w;
    let mut c = [0.0; 3];
    c[dd - 1] = 0.5 - w - 1e-6 * w - rho;
    CarvedBox::new_unchecked(&aabb, &[Ball { center: c, radius: rho }], n, scale).unwrap()
}
