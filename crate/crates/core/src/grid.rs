//! Staggered grids: scalars at cell centers, velocity components on faces.
//!
//! Cell `(i, j, k)` has flat index `i + n0·(j + n1·k)`. Faces normal to axis
//! `a` form a grid with `n_a + 1` entries along `a`; face `(a, I)` separates
//! cells `I − e_a` and `I`.

use crate::geometry::{Dim, Point};
use serde::{Deserialize, Serialize};
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("grid needs at least one cell per axis and a positive spacing")]
    Empty,
    #[error("field length {got} does not match {expected}")]
    Length { got: usize, expected: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CellClass {
    Fluid,
    Hole,
    Exterior,
}

pub const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskedGrid {
    pub dim: Dim,
    pub origin: Point,
    pub h: f64,
    /// Cells per axis; unused axes hold 1.
    pub n: [usize; 3],
    pub class: Vec<CellClass>,
    /// Hole index per cell, or `NONE`.
    pub hole_of: Vec<u32>,
    /// Cluster box index per cell, or `NONE`.
    pub box_of: Vec<u32>,
}

impl MaskedGrid {
    /// All-fluid grid.
    pub fn new(dim: Dim, origin: Point, h: f64, n: [usize; 3]) -> Result<Self, GridError> {
        let mut n = n;
        if dim.get() == 2 {
            n[2] = 1;
        }
        if !(h > 0.0) || n.iter().any(|&k| k == 0) {
            return Err(GridError::Empty);
        }
        let cells = n[0] * n[1] * n[2];
        Ok(MaskedGrid { dim, origin, h, n, class: vec![CellClass::Fluid; cells], hole_of: vec![NONE; cells], box_of: vec![NONE; cells] })
    }

    #[inline]
    pub fn cells(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    #[inline]
    pub fn cell_index(&self, i: [usize; 3]) -> usize {
        i[0] + self.n[0] * (i[1] + self.n[1] * i[2])
    }

    #[inline]
    pub fn cell_coords(&self, c: usize) -> [usize; 3] {
        let i = c % self.n[0];
        let r = c / self.n[0];
        [i, r % self.n[1], r / self.n[1]]
    }

    pub fn cell_center(&self, c: usize) -> Point {
        let i = self.cell_coords(c);
        let mut p = [0.0; 3];
        for a in 0..self.dim.get() {
            p[a] = self.origin[a] + (i[a] as f64 + 0.5) * self.h;
        }
        p
    }

    /// Face grid extents for faces normal to `axis`.
    #[inline]
    pub fn face_dims(&self, axis: usize) -> [usize; 3] {
        let mut m = self.n;
        m[axis] += 1;
        m
    }

    #[inline]
    pub fn faces(&self, axis: usize) -> usize {
        let m = self.face_dims(axis);
        m[0] * m[1] * m[2]
    }

    #[inline]
    pub fn face_index(&self, axis: usize, i: [usize; 3]) -> usize {
        let m = self.face_dims(axis);
        i[0] + m[0] * (i[1] + m[1] * i[2])
    }

    #[inline]
    pub fn face_coords(&self, axis: usize, f: usize) -> [usize; 3] {
        let m = self.face_dims(axis);
        let i = f % m[0];
        let r = f / m[0];
        [i, r % m[1], r / m[1]]
    }

    pub fn face_center(&self, axis: usize, f: usize) -> Point {
        let i = self.face_coords(axis, f);
        let mut p = [0.0; 3];
        for a in 0..self.dim.get() {
            let off = if a == axis { 0.0 } else { 0.5 };
            p[a] = self.origin[a] + (i[a] as f64 + off) * self.h;
        }
        p
    }

    /// Cells on the low and high side of a face, if inside the grid.
    #[inline]
    pub fn face_cells(&self, axis: usize, f: usize) -> (Option<usize>, Option<usize>) {
        let i = self.face_coords(axis, f);
        let lo = if i[axis] > 0 {
            let mut j = i;
            j[axis] -= 1;
            Some(self.cell_index(j))
        } else {
            None
        };
        let hi = if i[axis] < self.n[axis] { Some(self.cell_index(i)) } else { None };
        (lo, hi)
    }

    /// Low and high face of a cell along `axis`.
    #[inline]
    pub fn cell_faces(&self, c: usize, axis: usize) -> (usize, usize) {
        let i = self.cell_coords(c);
        let lo = self.face_index(axis, i);
        let mut j = i;
        j[axis] += 1;
        (lo, self.face_index(axis, j))
    }

    pub fn is_fluid(&self, c: usize) -> bool {
        self.class[c] == CellClass::Fluid
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim.get() as i32)
    }

    /// Face neighbor along `dir` (`±e_b`) within the face grid of `axis`.
    #[inline]
    pub fn face_neighbor(&self, axis: usize, f: usize, b: usize, up: bool) -> Option<usize> {
        let m = self.face_dims(axis);
        let mut i = self.face_coords(axis, f);
        if up {
            if i[b] + 1 >= m[b] {
                return None;
            }
            i[b] += 1;
        } else {
            if i[b] == 0 {
                return None;
            }
            i[b] -= 1;
        }
        Some(self.face_index(axis, i))
    }

    /// Mask of fluid cells.
    pub fn fluid_mask(&self) -> Vec<bool> {
        self.class.iter().map(|c| *c == CellClass::Fluid).collect()
    }

    /// Mask of cells that are not exterior (fluid or hole).
    pub fn domain_mask(&self) -> Vec<bool> {
        self.class.iter().map(|c| *c != CellClass::Exterior).collect()
    }

    /// Writes a JSON header line followed by the classes as little-endian bytes.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<(), GridError> {
        let header = serde_json::json!({
            "dim": self.dim.get(), "origin": self.origin, "h": self.h, "n": self.n,
            "classes": ["fluid", "hole", "exterior"],
        });
        writeln!(w, "{header}")?;
        let bytes: Vec<u8> = self
            .class
            .iter()
            .map(|c| match c {
                CellClass::Fluid => 0,
                CellClass::Hole => 1,
                CellClass::Exterior => 2,
            })
            .collect();
        w.write_all(&bytes)?;
        Ok(())
    }
}

/// Face-centered vector field, one array per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityField {
    pub comps: Vec<Vec<f64>>,
}

impl VelocityField {
    pub fn zeros(g: &MaskedGrid) -> Self {
        VelocityField { comps: (0..g.dim.get()).map(|a| vec![0.0; g.faces(a)]).collect() }
    }

    pub fn axpy(&mut self, alpha: f64, other: &VelocityField) {
        for (a, b) in self.comps.iter_mut().zip(&other.comps) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += alpha * y;
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Writes a JSON header line then all components as little-endian `f64`.
    pub fn write_binary<W: Write>(&self, g: &MaskedGrid, mut w: W) -> Result<(), GridError> {
        let header = serde_json::json!({ "dim": g.dim.get(), "origin": g.origin, "h": g.h, "n": g.n, "layout": "faces" });
        writeln!(w, "{header}")?;
        for c in &self.comps {
            for v in c {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }
}

/// Discrete divergence at every cell.
pub fn divergence(g: &MaskedGrid, u: &VelocityField) -> Vec<f64> {
    let mut out = vec![0.0; g.cells()];
    for (c, o) in out.iter_mut().enumerate() {
        let mut s = 0.0;
        for a in 0..g.dim.get() {
            let (lo, hi) = g.cell_faces(c, a);
            s += u.comps[a][hi] - u.comps[a][lo];
        }
        *o = s / g.h;
    }
    out
}

/// `(Σ |∂_b u_a|^q h^d)^{1/q}` over neighboring faces; faces beyond the
/// tangential grid edge count as zero.
pub fn grad_norm(g: &MaskedGrid, u: &VelocityField, q: f64) -> f64 {
    let d = g.dim.get();
    let mut s = 0.0;
    for a in 0..d {
        let ua = &u.comps[a];
        for f in 0..g.faces(a) {
            for b in 0..d {
                let v = ua[f];
                match g.face_neighbor(a, f, b, true) {
                    Some(n) => s += ((ua[n] - v) / g.h).abs().powf(q),
                    None if b != a => s += (v / g.h).abs().powf(q),
                    None => {}
                }
                if b != a && g.face_neighbor(a, f, b, false).is_none() {
                    s += (v / g.h).abs().powf(q);
                }
            }
        }
    }
    (s * g.cell_volume()).powf(1.0 / q)
}

/// `G u`, where `uᵀ G u · h^(d−2)` equals `grad_norm(u, 2)²`.
pub fn energy_apply(g: &MaskedGrid, u: &VelocityField) -> VelocityField {
    let d = g.dim.get();
    let mut out = VelocityField::zeros(g);
    for a in 0..d {
        let ua = &u.comps[a];
        for f in 0..g.faces(a) {
            let mut s = 0.0;
            for b in 0..d {
                for up in [false, true] {
                    match g.face_neighbor(a, f, b, up) {
                        Some(n) => s += ua[f] - ua[n],
                        None if b != a => s += ua[f],
                        None => {}
                    }
                }
            }
            out.comps[a][f] = s;
        }
    }
    out
}

/// Transpose of `divergence` restricted to the masked cells.
pub fn divergence_adjoint(g: &MaskedGrid, p: &[f64], mask: &[bool]) -> VelocityField {
    let mut out = VelocityField::zeros(g);
    let val = |c: Option<usize>| c.filter(|&c| mask[c]).map_or(0.0, |c| p[c]);
    for a in 0..g.dim.get() {
        for f in 0..g.faces(a) {
            let (lo, hi) = g.face_cells(a, f);
            out.comps[a][f] = (val(lo) - val(hi)) / g.h;
        }
    }
    out
}

/// Euclidean inner product of two face fields.
pub fn face_dot(u: &VelocityField, v: &VelocityField) -> f64 {
    u.comps.iter().zip(&v.comps).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()).sum()
}

/// `(Σ_{mask} |f|^q h^d)^{1/q}`.
pub fn scalar_norm(g: &MaskedGrid, f: &[f64], mask: &[bool], q: f64) -> f64 {
    let s: f64 = f.iter().zip(mask).filter(|(_, m)| **m).map(|(v, _)| v.abs().powf(q)).sum();
    (s * g.cell_volume()).powf(1.0 / q)
}

/// `(Σ |u_a|^q h^d)^{1/q}` over all faces and components.
pub fn velocity_norm(g: &MaskedGrid, u: &VelocityField, q: f64) -> f64 {
    let s: f64 = u.comps.iter().flatten().map(|v| v.abs().powf(q)).sum();
    (s * g.cell_volume()).powf(1.0 / q)
}

/// Mean of `f` over the masked cells.
pub fn masked_mean(f: &[f64], mask: &[bool]) -> f64 {
    let (s, n) = f.iter().zip(mask).filter(|(_, m)| **m).fold((0.0, 0usize), |(s, n), (v, _)| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Interpolated cell-center velocity: average of the two faces along each axis.
pub fn cell_velocity(g: &MaskedGrid, u: &VelocityField, c: usize) -> Point {
    let mut v = [0.0; 3];
    for a in 0..g.dim.get() {
        let (lo, hi) = g.cell_faces(c, a);
        v[a] = 0.5 * (u.comps[a][lo] + u.comps[a][hi]);
    }
    v
}
