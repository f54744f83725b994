//! Minimal-gradient-norm solutions of `div u = f` on a set of cells.
//!
//! The unknowns are the faces between two cells of the region; every other
//! face is held at zero. With `L` the face Laplacian (unscaled neighbor
//! differences) and `D` the unscaled divergence, the minimizer of `uᵀLu`
//! subject to `Du = h f` is `u = −L⁻¹Dᵀp` with `(D L⁻¹ Dᵀ) p = −h f`. The
//! pressure system is solved by projected preconditioned conjugate gradients;
//! `L` is factored once per axis by sparse Cholesky.

use crate::grid::{MaskedGrid, VelocityField};
use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("right-hand side has mean {mean} on a connected piece (norm {norm})")]
    NonZeroMean { mean: f64, norm: f64 },
    #[error("no convergence after {iterations} iterations (relative residual {residual})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("face Laplacian is not positive definite")]
    Factorization,
    #[error("dense oracle limited to {max} unknowns, got {got}")]
    TooLarge { max: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub iterations: usize,
    /// `‖D u − h f‖ / ‖h f‖`.
    pub constraint_residual: f64,
    /// `‖L u + Dᵀ p‖ / ‖Dᵀ p‖`.
    pub optimality_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Allowed `|mean| / ‖f‖_∞` per connected piece before the solve is refused.
    pub mean_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-10, max_iter: 5000, mean_tol: 1e-12 }
    }
}

struct AxisSystem {
    /// Face index of each unknown.
    faces: Vec<usize>,
    /// Unknown index of each face, or `usize::MAX`.
    slot: Vec<usize>,
    chol: Option<CscCholesky<f64>>,
    /// Factor row of each unknown (nested-dissection order).
    perm: Vec<usize>,
    diag: Vec<f64>,
    lap: CscMatrix<f64>,
}

/// Factored minimal-norm divergence solver for one region.
pub struct DivSolver {
    grid: MaskedGrid,
    /// Region cells in increasing order and their position lookup.
    cells: Vec<usize>,
    pos: Vec<usize>,
    /// Connected piece of each region cell (by position).
    piece: Vec<usize>,
    pieces: usize,
    axes: Vec<AxisSystem>,
    precond: Vec<f64>,
}

impl DivSolver {
    /// `region[c]` selects the cells on which the divergence is prescribed.
    pub fn new(grid: &MaskedGrid, region: &[bool]) -> Result<Self, SolverError> {
        let d = grid.dim.get();
        let cells: Vec<usize> = (0..grid.cells()).filter(|&c| region[c]).collect();
        let mut pos = vec![usize::MAX; grid.cells()];
        for (k, &c) in cells.iter().enumerate() {
            pos[c] = k;
        }
        let mut axes = Vec::with_capacity(d);
        for a in 0..d {
            let mut slot = vec![usize::MAX; grid.faces(a)];
            let mut faces = Vec::new();
            for f in 0..grid.faces(a) {
                if let (Some(lo), Some(hi)) = grid.face_cells(a, f) {
                    if region[lo] && region[hi] {
                        slot[f] = faces.len();
                        faces.push(f);
                    }
                }
            }
            let m = faces.len();
            let mut coo = CooMatrix::new(m, m);
            let mut diag = vec![0.0; m];
            for (k, &f) in faces.iter().enumerate() {
                let mut dk = 0.0;
                for b in 0..d {
                    for up in [false, true] {
                        match grid.face_neighbor(a, f, b, up) {
                            Some(n) => {
                                dk += 1.0;
                                if slot[n] != usize::MAX {
                                    coo.push(k, slot[n], -1.0);
                                }
                            }
                            None if b != a => dk += 1.0,
                            None => {}
                        }
                    }
                }
                coo.push(k, k, dk);
                diag[k] = dk;
            }
            let lap = CscMatrix::from(&coo);
            let coords: Vec<[usize; 3]> = faces.iter().map(|&f| grid.face_coords(a, f)).collect();
            let mut order = Vec::with_capacity(m);
            dissect((0..m).collect(), &coords, d, &mut order);
            let mut perm = vec![0; m];
            for (row, &k) in order.iter().enumerate() {
                perm[k] = row;
            }
            let mut pcoo = CooMatrix::new(m, m);
            for (i, j, v) in lap.triplet_iter() {
                pcoo.push(perm[i], perm[j], *v);
            }
            let chol = if m > 0 {
                Some(CscCholesky::factor(&CscMatrix::from(&pcoo)).map_err(|_| SolverError::Factorization)?)
            } else {
                None
            };
            axes.push(AxisSystem { faces, slot, chol, perm, diag, lap });
        }
        // Connected pieces through unknown faces.
        let mut piece = vec![usize::MAX; cells.len()];
        let mut pieces = 0;
        let mut stack = Vec::new();
        for start in 0..cells.len() {
            if piece[start] != usize::MAX {
                continue;
            }
            piece[start] = pieces;
            stack.push(start);
            while let Some(k) = stack.pop() {
                let c = cells[k];
                for (a, ax) in axes.iter().enumerate() {
                    let (lo, hi) = grid.cell_faces(c, a);
                    for f in [lo, hi] {
                        if ax.slot[f] == usize::MAX {
                            continue;
                        }
                        let (x, y) = grid.face_cells(a, f);
                        let other = if x == Some(c) { y } else { x }.unwrap();
                        let ko = pos[other];
                        if piece[ko] == usize::MAX {
                            piece[ko] = pieces;
                            stack.push(ko);
                        }
                    }
                }
            }
            pieces += 1;
        }
        // Jacobi preconditioner of D diag(L)⁻¹ Dᵀ.
        let mut precond = vec![0.0; cells.len()];
        for (k, &c) in cells.iter().enumerate() {
            let mut s = 0.0;
            for (a, ax) in axes.iter().enumerate() {
                let (lo, hi) = grid.cell_faces(c, a);
                for f in [lo, hi] {
                    if ax.slot[f] != usize::MAX {
                        s += 1.0 / ax.diag[ax.slot[f]];
                    }
                }
            }
            precond[k] = if s > 0.0 { 1.0 / s } else { 0.0 };
        }
        Ok(DivSolver { grid: grid.clone(), cells, pos, piece, pieces, axes, precond })
    }

    pub fn region_cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn unknowns(&self) -> usize {
        self.axes.iter().map(|a| a.faces.len()).sum()
    }

    /// Cells grouped by connected piece.
    pub fn pieces(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.pieces];
        for (k, &c) in self.cells.iter().enumerate() {
            out[self.piece[k]].push(c);
        }
        out
    }

    /// `Dᵀ p` scattered to unknowns, per axis.
    fn apply_dt(&self, p: &[f64]) -> Vec<Vec<f64>> {
        self.axes
            .iter()
            .enumerate()
            .map(|(a, ax)| {
                ax.faces
                    .iter()
                    .map(|&f| {
                        let (lo, hi) = self.grid.face_cells(a, f);
                        // Face value enters +1 in the low cell and −1 in the high cell.
                        p[self.pos[lo.unwrap()]] - p[self.pos[hi.unwrap()]]
                    })
                    .collect()
            })
            .collect()
    }

    /// `D u` on region cells from per-axis unknowns.
    fn apply_d(&self, x: &[Vec<f64>]) -> Vec<f64> {
        let mut out = vec![0.0; self.cells.len()];
        for (a, ax) in self.axes.iter().enumerate() {
            for (k, &f) in ax.faces.iter().enumerate() {
                let (lo, hi) = self.grid.face_cells(a, f);
                out[self.pos[lo.unwrap()]] += x[a][k];
                out[self.pos[hi.unwrap()]] -= x[a][k];
            }
        }
        out
    }

    fn solve_l(&self, rhs: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
        rhs.into_iter()
            .zip(&self.axes)
            .map(|(r, ax)| match &ax.chol {
                Some(ch) => {
                    let mut m = DMatrix::zeros(r.len(), 1);
                    for (k, v) in r.iter().enumerate() {
                        m[ax.perm[k]] = *v;
                    }
                    ch.solve_mut(&mut m);
                    ax.perm.iter().map(|&row| m[row]).collect()
                }
                None => r,
            })
            .collect()
    }

    /// `S p = D L⁻¹ Dᵀ p`.
    fn apply_schur(&self, p: &[f64]) -> Vec<f64> {
        self.apply_d(&self.solve_l(self.apply_dt(p)))
    }

    fn project(&self, v: &mut [f64]) {
        let mut sum = vec![0.0; self.pieces];
        let mut cnt = vec![0usize; self.pieces];
        for (k, x) in v.iter().enumerate() {
            sum[self.piece[k]] += x;
            cnt[self.piece[k]] += 1;
        }
        for (k, x) in v.iter_mut().enumerate() {
            *x -= sum[self.piece[k]] / cnt[self.piece[k]] as f64;
        }
    }

    /// Largest `|mean|` of `f` over a connected piece.
    pub fn max_piece_mean(&self, f: &[f64]) -> f64 {
        let mut sum = vec![0.0; self.pieces];
        let mut cnt = vec![0usize; self.pieces];
        for (k, &c) in self.cells.iter().enumerate() {
            sum[self.piece[k]] += f[c];
            cnt[self.piece[k]] += 1;
        }
        sum.iter().zip(&cnt).map(|(s, n)| (s / *n as f64).abs()).fold(0.0, f64::max)
    }

    /// Minimal-norm `u` with `div u = f` on the region (`f` indexed by grid cell).
    pub fn solve(&self, f: &[f64], opts: &SolveOptions) -> Result<(VelocityField, SolveStats), SolverError> {
        let norm_inf = self.cells.iter().map(|&c| f[c].abs()).fold(0.0, f64::max);
        let mean = self.max_piece_mean(f);
        if mean > opts.mean_tol * norm_inf.max(f64::MIN_POSITIVE) {
            return Err(SolverError::NonZeroMean { mean, norm: norm_inf });
        }
        let h = self.grid.h;
        let mut g: Vec<f64> = self.cells.iter().map(|&c| -h * f[c]).collect();
        self.project(&mut g);
        let mut u = VelocityField::zeros(&self.grid);
        let Some((p, it)) = self.pcg(g, opts)? else {
            return Ok((u, SolveStats { iterations: 0, constraint_residual: 0.0, optimality_residual: 0.0 }));
        };
        let dtp = self.apply_dt(&p);
        let x = self.solve_l(dtp.iter().map(|v| v.iter().map(|y| -y).collect()).collect());
        for (a, ax) in self.axes.iter().enumerate() {
            for (k, &face) in ax.faces.iter().enumerate() {
                u.comps[a][face] = x[a][k];
            }
        }
        // Residuals against the unprojected constraint D u = h f.
        let du = self.apply_d(&x);
        let target: Vec<f64> = self.cells.iter().map(|&c| h * f[c]).collect();
        let cres = norm2(&du.iter().zip(&target).map(|(a, b)| a - b).collect::<Vec<_>>()) / norm2(&target);
        let mut onum = 0.0;
        let mut oden = 0.0;
        for (a, ax) in self.axes.iter().enumerate() {
            let lx = &ax.lap * &DVector::from_column_slice(&x[a]);
            for k in 0..ax.faces.len() {
                onum += (lx[k] + dtp[a][k]).powi(2);
                oden += dtp[a][k].powi(2);
            }
        }
        let ores = if oden > 0.0 { (onum / oden).sqrt() } else { 0.0 };
        Ok((u, SolveStats { iterations: it, constraint_residual: cres, optimality_residual: ores }))
    }

    /// Projected PCG on `S p = g`; `None` when `g` vanishes.
    fn pcg(&self, g: Vec<f64>, opts: &SolveOptions) -> Result<Option<(Vec<f64>, usize)>, SolverError> {
        let gnorm = norm2(&g);
        if gnorm == 0.0 {
            return Ok(None);
        }
        let mut p = vec![0.0; g.len()];
        let mut r = g;
        let mut z: Vec<f64> = r.iter().zip(&self.precond).map(|(a, b)| a * b).collect();
        self.project(&mut z);
        let mut dir = z.clone();
        let mut rz = dot(&r, &z);
        let mut it = 0;
        let mut res = 1.0;
        while it < opts.max_iter {
            let sd = self.apply_schur(&dir);
            let alpha = rz / dot(&dir, &sd);
            for i in 0..p.len() {
                p[i] += alpha * dir[i];
                r[i] -= alpha * sd[i];
            }
            it += 1;
            res = norm2(&r) / gnorm;
            if res <= opts.tol {
                break;
            }
            z = r.iter().zip(&self.precond).map(|(a, b)| a * b).collect();
            self.project(&mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..dir.len() {
                dir[i] = z[i] + beta * dir[i];
            }
        }
        if res > opts.tol {
            return Err(SolverError::NonConvergence { iterations: it, residual: res });
        }
        Ok(Some((p, it)))
    }

    /// Transpose of the solution map `f ↦ u` (restricted to mean-zero data),
    /// returned as a cell field that vanishes off the region.
    pub fn solve_adjoint(&self, w: &VelocityField, opts: &SolveOptions) -> Result<(Vec<f64>, usize), SolverError> {
        let rhs: Vec<Vec<f64>> = self.axes.iter().enumerate().map(|(a, ax)| ax.faces.iter().map(|&f| w.comps[a][f]).collect()).collect();
        let mut y = self.apply_d(&self.solve_l(rhs));
        self.project(&mut y);
        let mut out = vec![0.0; self.grid.cells()];
        if let Some((mut z, it)) = self.pcg(y, opts)? {
            self.project(&mut z);
            for (k, &c) in self.cells.iter().enumerate() {
                out[c] = self.grid.h * z[k];
            }
            return Ok((out, it));
        }
        Ok((out, 0))
    }

    /// Subtracts the mean over each connected piece (cell-indexed `f`).
    pub fn remove_piece_means(&self, f: &mut [f64]) {
        let mut v: Vec<f64> = self.cells.iter().map(|&c| f[c]).collect();
        self.project(&mut v);
        for (k, &c) in self.cells.iter().enumerate() {
            f[c] = v[k];
        }
    }

    /// Dense saddle-point solve of the same problem, for small regions.
    ///
    /// The pressure is pinned by one bordering row per connected piece.
    pub fn solve_dense(&self, f: &[f64]) -> Result<VelocityField, SolverError> {
        const MAX: usize = 2000;
        let nu = self.unknowns();
        let np = self.cells.len();
        let n = nu + np + self.pieces;
        if n > MAX {
            return Err(SolverError::TooLarge { max: MAX, got: n });
        }
        let mut k = DMatrix::<f64>::zeros(n, n);
        let mut off = 0;
        let mut offsets = Vec::new();
        for ax in &self.axes {
            offsets.push(off);
            for (i, j, v) in ax.lap.triplet_iter() {
                k[(off + i, off + j)] = *v;
            }
            off += ax.faces.len();
        }
        for (a, ax) in self.axes.iter().enumerate() {
            for (i, &face) in ax.faces.iter().enumerate() {
                let (lo, hi) = self.grid.face_cells(a, face);
                let (pl, ph) = (nu + self.pos[lo.unwrap()], nu + self.pos[hi.unwrap()]);
                let col = offsets[a] + i;
                k[(pl, col)] += 1.0;
                k[(ph, col)] -= 1.0;
                k[(col, pl)] += 1.0;
                k[(col, ph)] -= 1.0;
            }
        }
        for (i, pc) in self.piece.iter().enumerate() {
            k[(nu + np + pc, nu + i)] = 1.0;
            k[(nu + i, nu + np + pc)] = 1.0;
        }
        let mut rhs = DVector::<f64>::zeros(n);
        for (i, &c) in self.cells.iter().enumerate() {
            rhs[nu + i] = self.grid.h * f[c];
        }
        let sol = k.lu().solve(&rhs).ok_or(SolverError::Factorization)?;
        let mut u = VelocityField::zeros(&self.grid);
        for (a, ax) in self.axes.iter().enumerate() {
            for (i, &face) in ax.faces.iter().enumerate() {
                u.comps[a][face] = sol[offsets[a] + i];
            }
        }
        Ok(u)
    }
}

/// Nested dissection on lattice coordinates: split at the median plane of the
/// widest axis, order both halves, then the separator.
fn dissect(ids: Vec<usize>, coords: &[[usize; 3]], d: usize, out: &mut Vec<usize>) {
    if ids.len() <= 64 {
        out.extend(ids);
        return;
    }
    let (mut axis, mut lo, mut hi) = (0, 0, 0);
    for a in 0..d {
        let mn = ids.iter().map(|&i| coords[i][a]).min().unwrap();
        let mx = ids.iter().map(|&i| coords[i][a]).max().unwrap();
        if mx - mn > hi - lo {
            (axis, lo, hi) = (a, mn, mx);
        }
    }
    if hi == lo {
        out.extend(ids);
        return;
    }
    let mid = (lo + hi) / 2;
    let (mut left, mut sep, mut right) = (Vec::new(), Vec::new(), Vec::new());
    for i in ids {
        match coords[i][axis].cmp(&mid) {
            std::cmp::Ordering::Less => left.push(i),
            std::cmp::Ordering::Equal => sep.push(i),
            std::cmp::Ordering::Greater => right.push(i),
        }
    }
    dissect(left, coords, d, out);
    dissect(right, coords, d, out);
    out.extend(sep);
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Removes the mean over the masked cells.
pub fn remove_mean(f: &mut [f64], mask: &[bool]) {
    let m = crate::grid::masked_mean(f, mask);
    for (v, &k) in f.iter_mut().zip(mask) {
        if k {
            *v -= m;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Dim;
    use crate::grid::{divergence, grad_norm, CellClass};
    use crate::rng::{substream, TAG_AUX};
    use proptest::prelude::*;
    use rand::Rng;

    fn square(n: usize) -> MaskedGrid {
        MaskedGrid::new(Dim::TWO, [0.0; 3], 1.0 / n as f64, [n, n, 1]).unwrap()
    }

    fn max_div_error(g: &MaskedGrid, u: &VelocityField, f: &[f64], region: &[bool]) -> f64 {
        divergence(g, u).iter().zip(f).zip(region).filter(|(_, r)| **r).map(|((a, b), _)| (a - b).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let g = square(6);
        let s = DivSolver::new(&g, &vec![true; g.cells()]).unwrap();
        let (u, st) = s.solve(&vec![0.0; g.cells()], &SolveOptions::default()).unwrap();
        assert_eq!(u.max_abs(), 0.0);
        assert_eq!(st.iterations, 0);
    }

    #[test]
    fn dipole_source_matches_dense_oracle() {
        // 8×8 grid, unit source in one cell balanced by a sink.
        let g = square(8);
        let region = vec![true; g.cells()];
        let mut f = vec![0.0; g.cells()];
        f[g.cell_index([2, 3, 0])] = 1.0;
        f[g.cell_index([5, 4, 0])] = -1.0;
        let s = DivSolver::new(&g, &region).unwrap();
        let (u, st) = s.solve(&f, &SolveOptions { tol: 1e-13, ..Default::default() }).unwrap();
        let v = s.solve_dense(&f).unwrap();
        let mut diff: f64 = 0.0;
        for a in 0..2 {
            for (x, y) in u.comps[a].iter().zip(&v.comps[a]) {
                diff = diff.max((x - y).abs());
            }
        }
        assert!(diff < 1e-10 * v.max_abs(), "diff {diff}");
        assert!(st.constraint_residual < 1e-12 && st.optimality_residual < 1e-10);
        assert!(max_div_error(&g, &u, &f, &region) < 1e-10);
    }

    #[test]
    fn solution_is_not_beaten_by_a_hand_built_field() {
        // w supported on interior faces; its divergence is the right-hand side.
        let g = square(10);
        let region = vec![true; g.cells()];
        let mut w = VelocityField::zeros(&g);
        for a in 0..2 {
            for f in 0..g.faces(a) {
                let p = g.face_center(a, f);
                let (lo, hi) = g.face_cells(a, f);
                if lo.is_some() && hi.is_some() {
                    w.comps[a][f] = (3.0 * p[0]).sin() * (p[1] * p[1] - p[1]) * if a == 0 { 1.0 } else { -0.5 };
                }
            }
        }
        let f = divergence(&g, &w);
        let s = DivSolver::new(&g, &region).unwrap();
        let (u, _) = s.solve(&f, &SolveOptions { mean_tol: 1e-10, ..Default::default() }).unwrap();
        assert!(max_div_error(&g, &u, &f, &region) < 1e-8 * f.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        assert!(grad_norm(&g, &u, 2.0) <= grad_norm(&g, &w, 2.0) * (1.0 + 1e-10));
    }

    #[test]
    fn non_zero_mean_is_refused() {
        let g = square(4);
        let s = DivSolver::new(&g, &vec![true; g.cells()]).unwrap();
        assert!(matches!(s.solve(&vec![1.0; g.cells()], &SolveOptions::default()), Err(SolverError::NonZeroMean { .. })));
    }

    #[test]
    fn region_with_hole_keeps_hole_faces_zero() {
        let mut g = square(12);
        let mut region = vec![true; g.cells()];
        for i in 5..7 {
            for j in 5..7 {
                let c = g.cell_index([i, j, 0]);
                g.class[c] = CellClass::Hole;
                region[c] = false;
            }
        }
        let mut rng = substream(1, TAG_AUX, 9);
        let mut f: Vec<f64> = (0..g.cells()).map(|c| if region[c] { rng.random_range(-1.0..1.0) } else { 0.0 }).collect();
        remove_mean(&mut f, &region);
        let s = DivSolver::new(&g, &region).unwrap();
        let (u, _) = s.solve(&f, &SolveOptions::default()).unwrap();
        for a in 0..2 {
            for face in 0..g.faces(a) {
                let (lo, hi) = g.face_cells(a, face);
                let touches = [lo, hi].iter().any(|c| c.map_or(true, |c| !region[c]));
                if touches {
                    assert_eq!(u.comps[a][face], 0.0);
                }
            }
        }
        assert!(max_div_error(&g, &u, &f, &region) < 1e-8);
        let v = s.solve_dense(&f).unwrap();
        let du = divergence(&g, &u);
        let dv = divergence(&g, &v);
        for c in 0..g.cells() {
            if region[c] {
                assert!((du[c] - dv[c]).abs() < 1e-10 * (1.0 + dv[c].abs()));
            }
        }
    }

    #[test]
    fn disconnected_pieces_are_detected() {
        let mut g = square(6);
        let mut region = vec![true; g.cells()];
        for j in 0..6 {
            let c = g.cell_index([3, j, 0]);
            g.class[c] = CellClass::Hole;
            region[c] = false;
        }
        let s = DivSolver::new(&g, &region).unwrap();
        assert_eq!(s.pieces().len(), 2);
        // Mean zero overall but not per piece.
        let f: Vec<f64> = (0..g.cells()).map(|c| if !region[c] { 0.0 } else if g.cell_coords(c)[0] < 3 { 1.0 } else { -1.2 }).collect();
        assert!(s.solve(&f, &SolveOptions::default()).is_err());
    }

    #[test]
    fn three_dimensional_solve() {
        let g = MaskedGrid::new(Dim::THREE, [0.0; 3], 0.25, [4, 4, 4]).unwrap();
        let region = vec![true; g.cells()];
        let mut f = vec![0.0; g.cells()];
        f[g.cell_index([1, 1, 1])] = 1.0;
        f[g.cell_index([2, 2, 2])] = -1.0;
        let s = DivSolver::new(&g, &region).unwrap();
        let (u, _) = s.solve(&f, &SolveOptions::default()).unwrap();
        assert!(max_div_error(&g, &u, &f, &region) < 1e-9);
        let v = s.solve_dense(&f).unwrap();
        assert!((grad_norm(&g, &u, 2.0) - grad_norm(&g, &v, 2.0)).abs() < 1e-8);
    }

    #[test]
    fn adjoint_is_transpose_on_mean_zero_data() {
        let mut g = square(9);
        let mut region = vec![true; g.cells()];
        let c = g.cell_index([4, 4, 0]);
        g.class[c] = CellClass::Hole;
        region[c] = false;
        let s = DivSolver::new(&g, &region).unwrap();
        let mut rng = substream(3, TAG_AUX, 1);
        let mut f: Vec<f64> = (0..g.cells()).map(|c| if region[c] { rng.random_range(-1.0..1.0) } else { 0.0 }).collect();
        remove_mean(&mut f, &region);
        let mut w = VelocityField::zeros(&g);
        for comp in &mut w.comps {
            comp.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
        }
        let opts = SolveOptions { tol: 1e-13, mean_tol: 1e-10, ..Default::default() };
        let (u, _) = s.solve(&f, &opts).unwrap();
        let (wt, _) = s.solve_adjoint(&w, &opts).unwrap();
        let lhs = crate::grid::face_dot(&w, &u);
        let rhs: f64 = f.iter().zip(&wt).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1e-3), "{lhs} vs {rhs}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn solver_is_linear(seed in any::<u64>(), a in -3.0..3.0f64, b in -3.0..3.0f64) {
            let g = square(7);
            let region = vec![true; g.cells()];
            let mut rng = substream(seed, TAG_AUX, 2);
            let mut f1: Vec<f64> = (0..g.cells()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut f2: Vec<f64> = (0..g.cells()).map(|_| rng.random_range(-1.0..1.0)).collect();
            remove_mean(&mut f1, &region);
            remove_mean(&mut f2, &region);
            let s = DivSolver::new(&g, &region).unwrap();
            let opts = SolveOptions { tol: 1e-13, mean_tol: 1e-10, ..Default::default() };
            let comb: Vec<f64> = f1.iter().zip(&f2).map(|(x, y)| a * x + b * y).collect();
            let (u1, _) = s.solve(&f1, &opts).unwrap();
            let (u2, _) = s.solve(&f2, &opts).unwrap();
            let (u3, _) = s.solve(&comb, &opts).unwrap();
            let mut lin = u1.clone();
            for c in &mut lin.comps { c.iter_mut().for_each(|v| *v *= a); }
            lin.axpy(b, &u2);
            for k in 0..2 {
                for (x, y) in lin.comps[k].iter().zip(&u3.comps[k]) {
                    prop_assert!((x - y).abs() < 1e-9 * (1.0 + u3.max_abs()));
                }
            }
        }
    }
}
