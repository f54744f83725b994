//! Grid-cube merging into well-separated cluster boxes.
//!
//! Points are binned into half-open cubes of side `l = s/(2N)` where
//! `s = eps^(1+delta)`. Occupied cubes start as boxes; any two boxes at
//! ℓ∞-distance zero are replaced by their bounding box until no such pair
//! remains. Each final box is inflated by `s/(8N)`.

use crate::geometry::{ball_box_clearance, dist_inf, inflate, AxisBox, Dim, Point};
use crate::sampler::PerforatedDomain;
use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClusterError {
    #[error("delta must be positive, got {0}")]
    BadDelta(f64),
    #[error("kappa={kappa} outside the open interval ({lo}, {hi})")]
    BadKappa { kappa: f64, lo: f64, hi: f64 },
    #[error("eps must lie in (0, 1), got {0}")]
    BadEps(f64),
    #[error("scale must be positive, got {0}")]
    BadScale(f64),
    #[error("a merged box holds {count} points, capacity is {capacity}; eps is too large for this realization")]
    EpsilonTooLarge { count: usize, capacity: usize, members: Vec<usize>, cells_lo: [i64; 3], cells_hi: [i64; 3] },
}

/// `2^d (2 + ⌈1/δ⌉)`, the cube capacity.
pub fn n_of_delta(delta: f64, d: Dim) -> Result<usize, ClusterError> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(ClusterError::BadDelta(delta));
    }
    Ok((1usize << d.get()) * n1_of_delta(delta))
}

/// `2 + ⌈1/δ⌉`, with `1/δ` snapped to an integer when within rounding of one.
pub fn n1_of_delta(delta: f64) -> usize {
    let inv = 1.0 / delta;
    let r = inv.round();
    let c = if (inv - r).abs() <= 1e-9 * inv.max(1.0) { r } else { inv.ceil() };
    2 + c as usize
}

/// `(alpha − d)/d`.
pub fn delta_of_alpha(alpha: f64, d: Dim) -> f64 {
    (alpha - d.get() as f64) / d.get() as f64
}

/// Length scale and capacity that fix the cube grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterGeometry {
    pub dim: Dim,
    /// `eps^(1+delta)` in physical runs.
    pub scale: f64,
    pub n: usize,
}

impl ClusterGeometry {
    pub fn new(dim: Dim, scale: f64, n: usize) -> Result<Self, ClusterError> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(ClusterError::BadScale(scale));
        }
        Ok(ClusterGeometry { dim, scale, n: n.max(1) })
    }

    /// Grid cube side `s/(2N)`.
    pub fn cell(&self) -> f64 {
        self.scale / (2.0 * self.n as f64)
    }

    /// Inflation from inner to outer box, `s/(8N)`.
    pub fn margin(&self) -> f64 {
        self.scale / (8.0 * self.n as f64)
    }

    /// Transition layer width, `s/(16N)`.
    pub fn layer(&self) -> f64 {
        self.scale / (16.0 * self.n as f64)
    }

    /// Required distance between outer boxes, `s/(4N)`.
    pub fn separation(&self) -> f64 {
        self.scale / (4.0 * self.n as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    pub dim: Dim,
    pub eps: f64,
    pub delta: f64,
    pub n: usize,
    pub kappa: f64,
}

impl ClusterParams {
    /// Parameters from `(eps, alpha, kappa)` with `delta = (alpha − d)/d`.
    pub fn new(dim: Dim, eps: f64, alpha: f64, kappa: f64) -> Result<Self, ClusterError> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(ClusterError::BadEps(eps));
        }
        let delta = delta_of_alpha(alpha, dim);
        let n = n_of_delta(delta, dim)?;
        let (lo, hi) = (1f64.max(delta), alpha - 2.0);
        if !(kappa > lo && kappa < hi) {
            return Err(ClusterError::BadKappa { kappa, lo, hi });
        }
        Ok(ClusterParams { dim, eps, delta, n, kappa })
    }

    pub fn geometry(&self) -> ClusterGeometry {
        ClusterGeometry { dim: self.dim, scale: self.eps.powf(1.0 + self.delta), n: self.n }
    }

    /// Radius `eps^(1+kappa)` of the separation balls.
    pub fn kappa_radius(&self) -> f64 {
        self.eps.powf(1.0 + self.kappa)
    }

    /// Whether `eps^(1+kappa) ≤ s/(16N)`.
    pub fn kappa_precondition(&self) -> bool {
        self.kappa_radius() <= self.geometry().layer()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterBox {
    pub inner: AxisBox,
    pub outer: AxisBox,
    /// Sorted indices into the input point list.
    pub members: Vec<usize>,
    /// Inner box in grid-cube units: cubes `cells_lo ≤ k < cells_hi`.
    pub cells_lo: [i64; 3],
    pub cells_hi: [i64; 3],
}

#[derive(Debug, Clone)]
struct WorkBox {
    lo: [i64; 3],
    hi: [i64; 3],
    members: Vec<usize>,
    alive: bool,
}

#[inline]
fn touching(d: usize, a: &WorkBox, b: &WorkBox) -> bool {
    (0..d).all(|i| a.lo[i] <= b.hi[i] && b.lo[i] <= a.hi[i])
}

/// Cube index of `p` under the half-open convention `[k l, (k+1) l)`.
pub fn cell_of(p: &Point, d: Dim, l: f64) -> [i64; 3] {
    let mut k = [0i64; 3];
    for a in 0..d.get() {
        k[a] = (p[a] / l).floor() as i64;
    }
    k
}

fn initial_boxes(points: &[Point], g: &ClusterGeometry) -> Vec<WorkBox> {
    let d = g.dim.get();
    let l = g.cell();
    let mut by_cell: FxHashMap<[i64; 3], usize> = FxHashMap::default();
    let mut boxes: Vec<WorkBox> = Vec::new();
    for (j, p) in points.iter().enumerate() {
        let k = cell_of(p, g.dim, l);
        let id = *by_cell.entry(k).or_insert_with(|| {
            let mut hi = k;
            for a in 0..d {
                hi[a] += 1;
            }
            boxes.push(WorkBox { lo: k, hi, members: Vec::new(), alive: true });
            boxes.len() - 1
        });
        boxes[id].members.push(j);
    }
    boxes
}

/// Spatial hash over buckets of `side` cubes.
struct BucketIndex {
    d: usize,
    side: i64,
    map: FxHashMap<[i64; 3], Vec<usize>>,
}

impl BucketIndex {
    fn new(d: usize, side: i64) -> Self {
        BucketIndex { d, side, map: FxHashMap::default() }
    }

    fn range(&self, lo: &[i64; 3], hi: &[i64; 3], pad: i64) -> ([i64; 3], [i64; 3]) {
        let mut a = [0i64; 3];
        let mut b = [0i64; 3];
        for i in 0..self.d {
            a[i] = (lo[i] - pad).div_euclid(self.side);
            b[i] = (hi[i] + pad).div_euclid(self.side);
        }
        (a, b)
    }

    fn for_each_bucket(&self, a: [i64; 3], b: [i64; 3], mut f: impl FnMut([i64; 3])) {
        for x in a[0]..=b[0] {
            for y in a[1]..=b[1] {
                for z in a[2]..=b[2] {
                    f([x, y, z]);
                }
            }
        }
    }

    fn insert(&mut self, id: usize, lo: &[i64; 3], hi: &[i64; 3]) {
        let (a, b) = self.range(lo, hi, 0);
        let mut keys = Vec::new();
        self.for_each_bucket(a, b, |k| keys.push(k));
        for k in keys {
            let v = self.map.entry(k).or_default();
            if !v.contains(&id) {
                v.push(id);
            }
        }
    }

    fn candidates(&self, lo: &[i64; 3], hi: &[i64; 3], pad: i64, out: &mut Vec<usize>) {
        out.clear();
        let (a, b) = self.range(lo, hi, pad);
        self.for_each_bucket(a, b, |k| {
            if let Some(v) = self.map.get(&k) {
                out.extend_from_slice(v);
            }
        });
        out.sort_unstable();
        out.dedup();
    }
}

fn finish(boxes: Vec<WorkBox>, g: &ClusterGeometry) -> Vec<ClusterBox> {
    let l = g.cell();
    let d = g.dim.get();
    let mut out: Vec<ClusterBox> = boxes
        .into_iter()
        .filter(|b| b.alive)
        .map(|mut b| {
            b.members.sort_unstable();
            let mut lo = [0.0; 3];
            let mut hi = [0.0; 3];
            for a in 0..d {
                lo[a] = b.lo[a] as f64 * l;
                hi[a] = b.hi[a] as f64 * l;
            }
            let inner = AxisBox { dim: g.dim, lo, hi };
            ClusterBox { inner, outer: inflate(&inner, g.margin()), members: b.members, cells_lo: b.lo, cells_hi: b.hi }
        })
        .collect();
    out.sort_by(|a, b| a.cells_lo.cmp(&b.cells_lo).then(a.members.cmp(&b.members)));
    out
}

fn merge_into(boxes: &mut [WorkBox], a: usize, b: usize, d: usize, cap: usize) -> Result<(), ClusterError> {
    let (lo_b, hi_b) = (boxes[b].lo, boxes[b].hi);
    let moved = std::mem::take(&mut boxes[b].members);
    boxes[b].alive = false;
    let wa = &mut boxes[a];
    for i in 0..d {
        wa.lo[i] = wa.lo[i].min(lo_b[i]);
        wa.hi[i] = wa.hi[i].max(hi_b[i]);
    }
    wa.members.extend(moved);
    if wa.members.len() > cap {
        let mut members = wa.members.clone();
        members.sort_unstable();
        return Err(ClusterError::EpsilonTooLarge {
            count: members.len(),
            capacity: cap,
            members,
            cells_lo: wa.lo,
            cells_hi: wa.hi,
        });
    }
    // Every unit slice of a merged box meets a member, so no side exceeds the member count.
    for i in 0..d {
        assert!(
            (wa.hi[i] - wa.lo[i]) as usize <= wa.members.len(),
            "side of {} cubes exceeds member count {}",
            wa.hi[i] - wa.lo[i],
            wa.members.len()
        );
    }
    Ok(())
}

/// Merge with an explicit initial processing order (a permutation of the
/// occupied cubes in first-seen order); used to test order independence.
pub fn build_boxes_ordered(points: &[Point], g: &ClusterGeometry, order: Option<&[usize]>) -> Result<Vec<ClusterBox>, ClusterError> {
    let d = g.dim.get();
    let mut boxes = initial_boxes(points, g);
    for b in &boxes {
        if b.members.len() > g.n {
            let mut members = b.members.clone();
            members.sort_unstable();
            return Err(ClusterError::EpsilonTooLarge { count: members.len(), capacity: g.n, members, cells_lo: b.lo, cells_hi: b.hi });
        }
    }
    let side = 64.max(g.n as i64 + 1);
    let mut index = BucketIndex::new(d, side);
    for (id, b) in boxes.iter().enumerate() {
        index.insert(id, &b.lo, &b.hi);
    }
    let mut work: Vec<usize> = match order {
        Some(o) => o.iter().rev().copied().collect(),
        None => (0..boxes.len()).rev().collect(),
    };
    let mut cand = Vec::new();
    while let Some(a) = work.pop() {
        if !boxes[a].alive {
            continue;
        }
        let (lo, hi) = (boxes[a].lo, boxes[a].hi);
        index.candidates(&lo, &hi, 1, &mut cand);
        let hit = cand.iter().copied().find(|&b| b != a && boxes[b].alive && touching(d, &boxes[a], &boxes[b]));
        if let Some(b) = hit {
            merge_into(&mut boxes, a, b, d, g.n)?;
            let (lo, hi) = (boxes[a].lo, boxes[a].hi);
            index.insert(a, &lo, &hi);
            work.push(a);
        }
    }
    Ok(finish(boxes, g))
}

/// Cluster boxes for the given points.
pub fn build_cluster_boxes(points: &[Point], params: &ClusterParams) -> Result<Vec<ClusterBox>, ClusterError> {
    build_boxes_ordered(points, &params.geometry(), None)
}

/// Quadratic merge loop without spatial indexing.
pub fn build_boxes_naive(points: &[Point], g: &ClusterGeometry) -> Result<Vec<ClusterBox>, ClusterError> {
    let d = g.dim.get();
    let mut boxes = initial_boxes(points, g);
    loop {
        let mut pair = None;
        'scan: for a in 0..boxes.len() {
            if !boxes[a].alive {
                continue;
            }
            for b in (a + 1)..boxes.len() {
                if boxes[b].alive && touching(d, &boxes[a], &boxes[b]) {
                    pair = Some((a, b));
                    break 'scan;
                }
            }
        }
        match pair {
            Some((a, b)) => merge_into(&mut boxes, a, b, d, g.n)?,
            None => break,
        }
    }
    for b in &boxes {
        if b.alive && b.members.len() > g.n {
            let mut members = b.members.clone();
            members.sort_unstable();
            return Err(ClusterError::EpsilonTooLarge { count: members.len(), capacity: g.n, members, cells_lo: b.lo, cells_hi: b.hi });
        }
    }
    Ok(finish(boxes, g))
}

/// One verified property with its worst-case value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub property: String,
    /// Worst observed value (minimum for lower bounds, maximum for upper bounds).
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub checks: Vec<PropertyCheck>,
    /// Whether `eps^(1+kappa) ≤ s/(16N)`; informational.
    pub kappa_precondition: bool,
}

impl ClusterReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn get(&self, property: &str) -> Option<&PropertyCheck> {
        self.checks.iter().find(|c| c.property == property)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("property,margin,threshold,pass\n");
        for c in &self.checks {
            s.push_str(&format!("{},{},{},{}\n", c.property, c.value, c.threshold, c.pass));
        }
        s
    }
}

/// Checks the five box guarantees for the holes of `perf`.
///
/// Cover (a) and clearance (c) are evaluated on the hole balls; the
/// `eps^(1+kappa)` ball version is reported separately as `a_kappa`/`c_kappa`
/// rows that only count towards the verdict when the radius precondition holds.
pub fn verify_cluster_properties(boxes: &[ClusterBox], perf: &PerforatedDomain, params: &ClusterParams) -> ClusterReport {
    verify_with_geometry(boxes, perf, &params.geometry(), Some(params.kappa_radius()))
}

pub fn verify_with_geometry(
    boxes: &[ClusterBox],
    perf: &PerforatedDomain,
    g: &ClusterGeometry,
    kappa_radius: Option<f64>,
) -> ClusterReport {
    let d = g.dim.get();
    let s = g.scale;
    let tol = 1e-12 * s;
    let l = g.cell();
    // Locate the box of every hole by its cube.
    let mut cube_owner: FxHashMap<[i64; 3], usize> = FxHashMap::default();
    for (bi, b) in boxes.iter().enumerate() {
        for &m in &b.members {
            if let Some(h) = perf.holes.get(m) {
                cube_owner.insert(cell_of(&h.center, g.dim, l), bi);
            }
        }
    }
    let owner = |p: &Point| -> Option<usize> {
        cube_owner.get(&cell_of(p, g.dim, l)).copied().or_else(|| boxes.iter().position(|b| b.outer.contains_closed(p)))
    };

    let mut cover = f64::INFINITY;
    let mut clear = f64::INFINITY;
    let mut cover_k = f64::INFINITY;
    let mut clear_k = f64::INFINITY;
    for h in &perf.holes {
        match owner(&h.center) {
            Some(bi) => {
                let o = &boxes[bi].outer;
                let c = ball_box_clearance(h, o).unwrap_or(f64::NEG_INFINITY);
                cover = cover.min(c);
                clear = clear.min(c);
                if let Some(rk) = kappa_radius {
                    let ck = o.signed_boundary_distance(&h.center) - rk;
                    cover_k = cover_k.min(ck);
                    clear_k = clear_k.min(ck);
                }
            }
            None => {
                cover = f64::NEG_INFINITY;
                clear = f64::NEG_INFINITY;
                cover_k = f64::NEG_INFINITY;
                clear_k = f64::NEG_INFINITY;
            }
        }
    }
    let max_count = boxes.iter().map(|b| b.members.len()).max().unwrap_or(0);

    // Pairwise separation through a bucket hash on outer boxes.
    let mut min_sep = f64::INFINITY;
    let side = 64.max(g.n as i64 + 1);
    let mut index = BucketIndex::new(d, side);
    for (i, b) in boxes.iter().enumerate() {
        index.insert(i, &b.cells_lo, &b.cells_hi);
    }
    let mut cand = Vec::new();
    for (i, b) in boxes.iter().enumerate() {
        index.candidates(&b.cells_lo, &b.cells_hi, 3, &mut cand);
        for &j in &cand {
            if j > i {
                min_sep = min_sep.min(dist_inf(&b.outer, &boxes[j].outer));
            }
        }
    }
    let min_side = boxes.iter().map(|b| b.outer.min_side()).fold(f64::INFINITY, f64::min);
    let max_side = boxes.iter().map(|b| b.outer.max_side()).fold(0.0, f64::max);

    let layer = g.layer();
    let mut checks = vec![
        PropertyCheck { property: "a_cover".into(), value: cover, threshold: 0.0, pass: cover >= 0.0 },
        PropertyCheck { property: "b_count".into(), value: max_count as f64, threshold: g.n as f64, pass: max_count <= g.n },
        PropertyCheck { property: "c_clearance".into(), value: clear, threshold: layer, pass: clear >= layer - tol },
        PropertyCheck { property: "d_separation".into(), value: min_sep, threshold: g.separation(), pass: min_sep >= g.separation() - tol },
        PropertyCheck { property: "e_min_side".into(), value: min_side, threshold: s / (2.0 * g.n as f64), pass: min_side >= s / (2.0 * g.n as f64) - tol },
        PropertyCheck { property: "e_max_side".into(), value: max_side, threshold: s, pass: max_side <= s + tol },
    ];
    let mut kappa_ok = true;
    if let Some(rk) = kappa_radius {
        kappa_ok = rk <= layer;
        if kappa_ok {
            checks.push(PropertyCheck { property: "a_kappa_cover".into(), value: cover_k, threshold: 0.0, pass: cover_k >= 0.0 });
            checks.push(PropertyCheck { property: "c_kappa_clearance".into(), value: clear_k, threshold: layer, pass: clear_k >= layer - tol });
        }
    }
    ClusterReport { checks, kappa_precondition: kappa_ok }
}

/// Partition of point indices induced by a box list, canonicalized.
pub fn partition(boxes: &[ClusterBox]) -> Vec<Vec<usize>> {
    let mut p: Vec<Vec<usize>> = boxes.iter().map(|b| b.members.clone()).collect();
    p.sort();
    p
}

/// JSON records `{inner: [lo, hi], outer: [lo, hi], members}`.
pub fn boxes_to_json(boxes: &[ClusterBox]) -> serde_json::Value {
    let d = boxes.first().map(|b| b.inner.dim.get()).unwrap_or(3);
    serde_json::Value::Array(
        boxes
            .iter()
            .map(|b| {
                serde_json::json!({
                    "inner": [&b.inner.lo[..d], &b.inner.hi[..d]],
                    "outer": [&b.outer.lo[..d], &b.outer.hi[..d]],
                    "members": b.members,
                })
            })
            .collect(),
    )
}

/// Check that every point lies in exactly one inner box under the half-open rule.
pub fn assignment_is_exact(points: &[Point], boxes: &[ClusterBox], g: &ClusterGeometry) -> bool {
    let l = g.cell();
    let d = g.dim.get();
    let mut seen: FxHashSet<usize> = FxHashSet::default();
    for b in boxes {
        for &m in &b.members {
            let k = cell_of(&points[m], g.dim, l);
            if !(0..d).all(|a| b.cells_lo[a] <= k[a] && k[a] < b.cells_hi[a]) || !seen.insert(m) {
                return false;
            }
        }
    }
    seen.len() == points.len()
}
