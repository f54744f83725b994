//! Discrete inverse divergence on perforated cluster scenes.
//!
//! Scenes live in frame units: lengths are divided by the cluster scale
//! `s = ε^(1+δ)`, so a grid cube has side `1/(2N)`, the transition layer has
//! width `1/(16N)` and a hole of mark `r` has radius `ε^(α−1−δ) r`. For
//! `q = 2` the ratio `‖∇u‖/‖div u‖` is invariant under this rescaling.
//!
//! `B_ε = R_ε ∘ B_D`: a global minimal-norm solve on `D` (holes treated as
//! fluid, data extended by zero) followed by the restriction
//! `R_ε u = u − Σ_j (β_j − C_j div β_j) − Σ_i (b_i − C_i div b_i)` with
//! `b_i = χ_i (u − ⟨u⟩_i)`, `β_j = ζ_j ⟨u⟩_i` and local minimal-norm solves
//! `C_i` on the perforated box and `C_j` on the annulus.

use crate::clusterer::{build_boxes_ordered, ClusterError, ClusterGeometry};
use crate::geometry::{dist, inflate, AxisBox, Dim, Point};
use crate::grid::{
    cell_velocity, divergence, divergence_adjoint, energy_apply, grad_norm, scalar_norm, CellClass, GridError, MaskedGrid,
    VelocityField, NONE,
};
use crate::rng::{substream, TAG_AUX};
use crate::solver::{DivSolver, SolveOptions, SolverError};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BogovskiiError {
    #[error("smallest hole spans {cells:.2} cells across its diameter; at least 3 are needed")]
    UnresolvableHoles { cells: f64 },
    #[error("transition layer spans {cells:.2} cells; at least 3 are needed")]
    UnresolvableLayer { cells: f64 },
    #[error("box {0} has no fluid cell in its transition layer")]
    EmptyLayer(usize),
    #[error("local data for {target} has mean {mean:e} against sup norm {norm:e}")]
    MeanDrift { target: String, mean: f64, norm: f64 },
    #[error("invalid scene: {0}")]
    Scene(String),
    #[error("no admissible layout after {0} attempts")]
    Layout(usize),
    #[error("invalid sweep: {0}")]
    Sweep(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

type Result<T> = std::result::Result<T, BogovskiiError>;

/// Hole ball in frame units with the box that owns it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hole {
    pub center: Point,
    pub radius: f64,
    pub owner: usize,
}

/// Rasterized scene: domain grid, outer boxes `I_i` and holes.
#[derive(Debug, Clone)]
pub struct Scene {
    pub grid: MaskedGrid,
    pub boxes: Vec<AxisBox>,
    pub holes: Vec<Hole>,
    pub layer: f64,
}

/// Classifies cells by center: hole if inside a hole ball, exterior if
/// outside `domain`. `h` must tile `domain`.
pub fn rasterize(domain: &AxisBox, h: f64, boxes: &[AxisBox], holes: &[Hole]) -> Result<MaskedGrid> {
    let d = domain.dim.get();
    let mut n = [1usize; 3];
    for a in 0..d {
        let k = domain.side(a) / h;
        if (k - k.round()).abs() > 1e-6 || k.round() < 1.0 {
            return Err(BogovskiiError::Scene(format!("spacing {h} does not tile the domain side {}", domain.side(a))));
        }
        n[a] = k.round() as usize;
    }
    let min_cells = holes.iter().map(|b| 2.0 * b.radius / h).fold(f64::INFINITY, f64::min);
    if min_cells < 3.0 {
        return Err(BogovskiiError::UnresolvableHoles { cells: min_cells });
    }
    let mut g = MaskedGrid::new(domain.dim, domain.lo, h, n)?;
    for c in 0..g.cells() {
        let x = g.cell_center(c);
        if !domain.contains_open(&x) {
            g.class[c] = CellClass::Exterior;
            continue;
        }
        if let Some(i) = boxes.iter().position(|b| b.contains_open(&x)) {
            g.box_of[c] = i as u32;
        }
        if let Some(j) = holes.iter().position(|b| dist(domain.dim, &x, &b.center) < b.radius) {
            g.class[c] = CellClass::Hole;
            g.hole_of[c] = j as u32;
            if g.box_of[c] != holes[j].owner as u32 {
                return Err(BogovskiiError::Scene(format!("hole {j} is not contained in box {}", holes[j].owner)));
            }
        }
    }
    Ok(g)
}

/// Sparse non-negative weights on faces.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FaceWeights {
    /// `(axis, face, value)` with `value > 0`.
    pub entries: Vec<(usize, usize, f64)>,
}

impl FaceWeights {
    fn dense(&self, g: &MaskedGrid) -> VelocityField {
        let mut out = VelocityField::zeros(g);
        for &(a, f, v) in &self.entries {
            out.comps[a][f] = v;
        }
        out
    }

    /// Largest neighbor difference over `h`.
    pub fn grad_sup(&self, g: &MaskedGrid) -> f64 {
        let dense = self.dense(g);
        let mut m: f64 = 0.0;
        for &(a, f, v) in &self.entries {
            for b in 0..g.dim.get() {
                for up in [false, true] {
                    let w = g.face_neighbor(a, f, b, up).map_or(0.0, |n| dense.comps[a][n]);
                    m = m.max((v - w).abs() / g.h);
                }
            }
        }
        m
    }
}

/// Box cut-offs `χ_i` and hole cut-offs `ζ_j` at face centers.
#[derive(Debug, Clone)]
pub struct CutoffPair {
    pub chi: Vec<FaceWeights>,
    pub zeta: Vec<FaceWeights>,
    pub chi_grad: Vec<f64>,
    pub zeta_grad: Vec<f64>,
}

/// `χ_i = clamp(dist_∞(x, ∂I_i)/layer)` inside `I_i`; `ζ_j = clamp(2 − |x − z_j|/ρ_j)`,
/// set to 1 on every face of a hole cell.
pub fn build_cutoffs(scene: &Scene) -> Result<CutoffPair> {
    let g = &scene.grid;
    let dim = g.dim;
    let d = dim.get();
    let cells = scene.layer / g.h;
    if cells < 3.0 - 1e-9 {
        return Err(BogovskiiError::UnresolvableLayer { cells });
    }
    let mut chi = vec![FaceWeights::default(); scene.boxes.len()];
    let mut zeta = vec![FaceWeights::default(); scene.holes.len()];
    for a in 0..d {
        for f in 0..g.faces(a) {
            let x = g.face_center(a, f);
            for (i, b) in scene.boxes.iter().enumerate() {
                if b.contains_open(&x) {
                    let v = (b.linf_to_boundary(&x) / scene.layer).min(1.0);
                    if v > 0.0 {
                        chi[i].entries.push((a, f, v));
                    }
                }
            }
            let (lo, hi) = g.face_cells(a, f);
            let hole_side = [lo, hi].iter().flatten().map(|&c| g.hole_of[c]).find(|&j| j != NONE);
            for (j, hole) in scene.holes.iter().enumerate() {
                let v = if hole_side == Some(j as u32) { 1.0 } else { (2.0 - dist(dim, &x, &hole.center) / hole.radius).clamp(0.0, 1.0) };
                if v > 0.0 {
                    zeta[j].entries.push((a, f, v));
                }
            }
        }
    }
    // Each annulus must sit where its box cut-off is 1, and annuli must not overlap.
    let mut owner: Vec<Vec<u32>> = (0..d).map(|a| vec![NONE; g.faces(a)]).collect();
    for (j, z) in zeta.iter().enumerate() {
        let chi_dense = chi[scene.holes[j].owner].dense(g);
        for &(a, f, _) in &z.entries {
            if chi_dense.comps[a][f] < 1.0 {
                return Err(BogovskiiError::Scene(format!("annulus of hole {j} reaches the transition layer")));
            }
            if owner[a][f] != NONE {
                return Err(BogovskiiError::Scene(format!("annuli of holes {} and {j} overlap", owner[a][f])));
            }
            owner[a][f] = j as u32;
        }
    }
    let chi_grad = chi.iter().map(|c| c.grad_sup(g)).collect();
    let zeta_grad = zeta.iter().map(|z| z.grad_sup(g)).collect();
    Ok(CutoffPair { chi, zeta, chi_grad, zeta_grad })
}

/// Fluid cells of the transition layer `I_i ∖ I_i^in`.
pub fn layer_cells(scene: &Scene, i: usize) -> Vec<usize> {
    let b = &scene.boxes[i];
    (0..scene.grid.cells())
        .filter(|&c| {
            let x = scene.grid.cell_center(c);
            scene.grid.is_fluid(c) && b.contains_open(&x) && b.linf_to_boundary(&x) < scene.layer
        })
        .collect()
}

/// Average of interpolated cell-center velocities over `cells`.
pub fn layer_mean(g: &MaskedGrid, u: &VelocityField, cells: &[usize]) -> Point {
    let mut m = [0.0; 3];
    for &c in cells {
        let v = cell_velocity(g, u, c);
        for a in 0..g.dim.get() {
            m[a] += v[a];
        }
    }
    m.map(|v| v / cells.len() as f64)
}

/// Transpose of `layer_mean`.
fn layer_mean_adjoint(g: &MaskedGrid, v: &Point, cells: &[usize], out: &mut VelocityField) {
    let w = 0.5 / cells.len() as f64;
    for &c in cells {
        for a in 0..g.dim.get() {
            let (lo, hi) = g.cell_faces(c, a);
            out.comps[a][lo] += w * v[a];
            out.comps[a][hi] += w * v[a];
        }
    }
}

struct LocalSolve {
    name: String,
    region: Vec<bool>,
    solver: DivSolver,
}

impl LocalSolve {
    fn new(name: String, g: &MaskedGrid, region: Vec<bool>) -> Result<Self> {
        let solver = DivSolver::new(g, &region)?;
        Ok(LocalSolve { name, region, solver })
    }

    /// `C div v` with the drift gate.
    fn correct(&self, g: &MaskedGrid, v: &VelocityField, opts: &SolveOptions) -> Result<(VelocityField, usize, f64)> {
        let mut rhs = divergence(g, v);
        for (r, &m) in rhs.iter_mut().zip(&self.region) {
            if !m {
                *r = 0.0;
            }
        }
        let norm = rhs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let mean = self.solver.max_piece_mean(&rhs);
        if mean > 1e-10 * norm {
            return Err(BogovskiiError::MeanDrift { target: self.name.clone(), mean, norm });
        }
        self.solver.remove_piece_means(&mut rhs);
        let (u, st) = self.solver.solve(&rhs, &SolveOptions { mean_tol: f64::INFINITY, ..*opts })?;
        Ok((u, st.iterations, if norm > 0.0 { mean / norm } else { 0.0 }))
    }

    /// Transpose of `correct` (the drift projection is part of the map).
    fn correct_adjoint(&self, g: &MaskedGrid, w: &VelocityField, opts: &SolveOptions) -> Result<VelocityField> {
        let (p, _) = self.solver.solve_adjoint(w, opts)?;
        Ok(divergence_adjoint(g, &p, &self.region))
    }
}

/// Statistics of one application of `B_ε`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ApplyStats {
    pub global_iterations: usize,
    pub local_iterations: usize,
    /// Largest relative mean removed from a local right-hand side.
    pub max_drift: f64,
    /// `max_i ‖∇b_i‖ / ‖∇u‖_{A_i}`.
    pub b_ratio: f64,
    /// `max_j ‖∇β_j‖ / ‖u‖_{A_i}`.
    pub beta_ratio: f64,
}

/// The restriction `R_ε` for a fixed scene.
pub struct Restriction {
    grid: MaskedGrid,
    cutoffs: CutoffPair,
    layers: Vec<Vec<usize>>,
    owner: Vec<usize>,
    boxes: Vec<LocalSolve>,
    annuli: Vec<LocalSolve>,
    opts: SolveOptions,
}

impl Restriction {
    pub fn new(scene: &Scene) -> Result<Self> {
        let g = &scene.grid;
        let cutoffs = build_cutoffs(scene)?;
        let layers: Vec<Vec<usize>> = (0..scene.boxes.len()).map(|i| layer_cells(scene, i)).collect();
        if let Some(i) = layers.iter().position(|l| l.is_empty()) {
            return Err(BogovskiiError::EmptyLayer(i));
        }
        let boxes = (0..scene.boxes.len())
            .into_par_iter()
            .map(|i| {
                let region: Vec<bool> = (0..g.cells()).map(|c| g.is_fluid(c) && g.box_of[c] == i as u32).collect();
                LocalSolve::new(format!("box {i}"), g, region)
            })
            .collect::<Result<Vec<_>>>()?;
        let annuli = cutoffs
            .zeta
            .par_iter()
            .enumerate()
            .map(|(j, z)| {
                let mut region = vec![false; g.cells()];
                for &(a, f, _) in &z.entries {
                    let (lo, hi) = g.face_cells(a, f);
                    for c in [lo, hi].into_iter().flatten() {
                        if g.is_fluid(c) {
                            region[c] = true;
                        }
                    }
                }
                LocalSolve::new(format!("annulus {j}"), g, region)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Restriction {
            grid: g.clone(),
            cutoffs,
            layers,
            owner: scene.holes.iter().map(|h| h.owner).collect(),
            boxes,
            annuli,
            opts: SolveOptions { tol: 1e-12, ..Default::default() },
        })
    }

    pub fn cutoffs(&self) -> &CutoffPair {
        &self.cutoffs
    }

    fn pieces(&self, u: &VelocityField) -> (Vec<Point>, Vec<VelocityField>, Vec<VelocityField>) {
        let g = &self.grid;
        let means: Vec<Point> = self.layers.iter().map(|l| layer_mean(g, u, l)).collect();
        let b = self
            .cutoffs
            .chi
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let mut out = VelocityField::zeros(g);
                for &(a, f, v) in &w.entries {
                    out.comps[a][f] = v * (u.comps[a][f] - means[i][a]);
                }
                out
            })
            .collect();
        let beta = self
            .cutoffs
            .zeta
            .iter()
            .enumerate()
            .map(|(j, w)| {
                let mut out = VelocityField::zeros(g);
                for &(a, f, v) in &w.entries {
                    out.comps[a][f] = v * means[self.owner[j]][a];
                }
                out
            })
            .collect();
        (means, b, beta)
    }

    /// `R_ε u`. Hole faces come out exactly zero.
    pub fn apply(&self, u: &VelocityField) -> Result<(VelocityField, ApplyStats)> {
        let g = &self.grid;
        let (_, b, beta) = self.pieces(u);
        let mut out = u.clone();
        for (j, w) in self.cutoffs.zeta.iter().enumerate() {
            for &(a, f, _) in &w.entries {
                out.comps[a][f] -= beta[j].comps[a][f];
            }
        }
        for (i, w) in self.cutoffs.chi.iter().enumerate() {
            for &(a, f, _) in &w.entries {
                out.comps[a][f] -= b[i].comps[a][f];
            }
        }
        let jobs: Vec<(&LocalSolve, &VelocityField)> = self.annuli.iter().zip(&beta).chain(self.boxes.iter().zip(&b)).collect();
        let corrections = jobs.par_iter().map(|(s, v)| s.correct(g, v, &self.opts)).collect::<Result<Vec<_>>>()?;
        let mut stats = ApplyStats::default();
        for (c, iters, drift) in &corrections {
            out.axpy(1.0, c);
            stats.local_iterations += iters;
            stats.max_drift = stats.max_drift.max(*drift);
        }
        for (i, l) in self.layers.iter().enumerate() {
            let mask = layer_face_mask(g, l);
            let gu = masked_grad_norm(g, u, &mask);
            let uu = masked_norm(g, u, &mask);
            if gu > 0.0 {
                stats.b_ratio = stats.b_ratio.max(grad_norm(g, &b[i], 2.0) / gu);
            }
            for (j, bj) in beta.iter().enumerate() {
                if self.owner[j] == i && uu > 0.0 {
                    stats.beta_ratio = stats.beta_ratio.max(grad_norm(g, bj, 2.0) / uu);
                }
            }
        }
        Ok((out, stats))
    }

    /// `R_εᵀ w`.
    pub fn apply_adjoint(&self, w: &VelocityField) -> Result<VelocityField> {
        let g = &self.grid;
        let jobs: Vec<&LocalSolve> = self.annuli.iter().chain(&self.boxes).collect();
        let ct = jobs.par_iter().map(|s| s.correct_adjoint(g, w, &self.opts)).collect::<Result<Vec<_>>>()?;
        let nh = self.annuli.len();
        let mut out = w.clone();
        // β_jᵀ y = meanᵀ(Σ_f ζ y), b_iᵀ y = χ y − meanᵀ(Σ_f χ y), with y = w − C_Kᵀ w.
        for (j, z) in self.cutoffs.zeta.iter().enumerate() {
            let mut s = [0.0; 3];
            for &(a, f, v) in &z.entries {
                s[a] += v * (w.comps[a][f] - ct[j].comps[a][f]);
            }
            layer_mean_adjoint(g, &s.map(|x| -x), &self.layers[self.owner[j]], &mut out);
        }
        for (i, c) in self.cutoffs.chi.iter().enumerate() {
            let mut s = [0.0; 3];
            for &(a, f, v) in &c.entries {
                let y = v * (w.comps[a][f] - ct[nh + i].comps[a][f]);
                out.comps[a][f] -= y;
                s[a] += y;
            }
            layer_mean_adjoint(g, &s, &self.layers[i], &mut out);
        }
        Ok(out)
    }
}

fn layer_face_mask(g: &MaskedGrid, cells: &[usize]) -> Vec<Vec<bool>> {
    let mut m: Vec<Vec<bool>> = (0..g.dim.get()).map(|a| vec![false; g.faces(a)]).collect();
    for &c in cells {
        for (a, row) in m.iter_mut().enumerate() {
            let (lo, hi) = g.cell_faces(c, a);
            row[lo] = true;
            row[hi] = true;
        }
    }
    m
}

fn masked_grad_norm(g: &MaskedGrid, u: &VelocityField, mask: &[Vec<bool>]) -> f64 {
    let mut s = 0.0;
    for a in 0..g.dim.get() {
        for f in 0..g.faces(a) {
            if !mask[a][f] {
                continue;
            }
            for b in 0..g.dim.get() {
                if let Some(n) = g.face_neighbor(a, f, b, true) {
                    if mask[a][n] {
                        s += ((u.comps[a][n] - u.comps[a][f]) / g.h).powi(2);
                    }
                }
            }
        }
    }
    (s * g.cell_volume()).sqrt()
}

fn masked_norm(g: &MaskedGrid, u: &VelocityField, mask: &[Vec<bool>]) -> f64 {
    let s: f64 = (0..g.dim.get()).map(|a| (0..g.faces(a)).filter(|&f| mask[a][f]).map(|f| u.comps[a][f].powi(2)).sum::<f64>()).sum();
    (s * g.cell_volume()).sqrt()
}

/// `B_ε`, its transpose and the naive control on one scene.
pub struct BogovskiiOperator {
    pub scene: Scene,
    fluid: Vec<bool>,
    hole_faces: Vec<Vec<bool>>,
    global: DivSolver,
    restriction: Restriction,
    opts: SolveOptions,
}

impl BogovskiiOperator {
    pub fn new(scene: Scene) -> Result<Self> {
        let g = &scene.grid;
        let domain: Vec<bool> = g.domain_mask();
        let global = DivSolver::new(g, &domain)?;
        let restriction = Restriction::new(&scene)?;
        let fluid = g.fluid_mask();
        let hole_faces = (0..g.dim.get())
            .map(|a| {
                (0..g.faces(a))
                    .map(|f| {
                        let (lo, hi) = g.face_cells(a, f);
                        [lo, hi].iter().flatten().any(|&c| g.class[c] == CellClass::Hole)
                    })
                    .collect()
            })
            .collect();
        Ok(BogovskiiOperator { scene, fluid, hole_faces, global, restriction, opts: SolveOptions { tol: 1e-12, ..Default::default() } })
    }

    pub fn grid(&self) -> &MaskedGrid {
        &self.scene.grid
    }

    pub fn fluid_mask(&self) -> &[bool] {
        &self.fluid
    }

    pub fn restriction(&self) -> &Restriction {
        &self.restriction
    }

    /// Zero outside fluid cells, then mean zero over fluid cells.
    pub fn project(&self, f: &mut [f64]) {
        for (v, &m) in f.iter_mut().zip(&self.fluid) {
            if !m {
                *v = 0.0;
            }
        }
        crate::solver::remove_mean(f, &self.fluid);
    }

    fn extend(&self, f: &[f64]) -> Vec<f64> {
        f.iter().zip(&self.fluid).map(|(v, &m)| if m { *v } else { 0.0 }).collect()
    }

    /// Global minimal-norm solve on `D` of the zero extension.
    pub fn global_solve(&self, f: &[f64]) -> Result<(VelocityField, usize)> {
        let (u, st) = self.global.solve(&self.extend(f), &self.opts)?;
        Ok((u, st.iterations))
    }

    /// `B_ε f`.
    pub fn apply(&self, f: &[f64]) -> Result<(VelocityField, ApplyStats)> {
        let (u, it) = self.global_solve(f)?;
        let (out, mut st) = self.restriction.apply(&u)?;
        st.global_iterations = it;
        Ok((out, st))
    }

    /// `B_εᵀ w`, projected onto admissible data.
    pub fn apply_adjoint(&self, w: &VelocityField) -> Result<Vec<f64>> {
        let r = self.restriction.apply_adjoint(w)?;
        let (mut f, _) = self.global.solve_adjoint(&r, &self.opts)?;
        self.project(&mut f);
        Ok(f)
    }

    fn zero_holes(&self, u: &mut VelocityField) {
        for (comp, mask) in u.comps.iter_mut().zip(&self.hole_faces) {
            for (v, &m) in comp.iter_mut().zip(mask) {
                if m {
                    *v = 0.0;
                }
            }
        }
    }

    /// Global solve followed by zeroing every hole face.
    pub fn naive(&self, f: &[f64]) -> Result<(VelocityField, usize)> {
        let (mut u, it) = self.global_solve(f)?;
        self.zero_holes(&mut u);
        Ok((u, it))
    }

    /// `(B_ε f, naive f)` from one global solve.
    pub fn apply_with_control(&self, f: &[f64]) -> Result<(VelocityField, VelocityField, ApplyStats)> {
        let (mut u, it) = self.global_solve(f)?;
        let (out, mut st) = self.restriction.apply(&u)?;
        st.global_iterations = it;
        self.zero_holes(&mut u);
        Ok((out, u, st))
    }

    pub fn naive_adjoint(&self, w: &VelocityField) -> Result<Vec<f64>> {
        let mut z = w.clone();
        self.zero_holes(&mut z);
        let (mut f, _) = self.global.solve_adjoint(&z, &self.opts)?;
        self.project(&mut f);
        Ok(f)
    }

    /// Dense minimal-norm solve on the fluid cells, for small grids.
    pub fn dense_oracle(&self, f: &[f64]) -> Result<VelocityField> {
        let s = DivSolver::new(&self.scene.grid, &self.fluid)?;
        Ok(s.solve_dense(&self.extend(f))?)
    }
}

/// `B_ε f` on a scene.
pub fn bogovskii_eps(f: &[f64], scene: &Scene) -> Result<VelocityField> {
    Ok(BogovskiiOperator::new(scene.clone())?.apply(f)?.0)
}

/// Points and marks of a cluster scene in frame units, independent of `ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneLayout {
    pub dim: Dim,
    /// Box capacity `N`.
    pub n: usize,
    pub points: Vec<Point>,
    pub marks: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutSpec {
    pub dim: Dim,
    pub n: usize,
    pub boxes: usize,
    pub points_per_box: usize,
    pub mark_lo: f64,
    pub mark_hi: f64,
}

impl Default for LayoutSpec {
    fn default() -> Self {
        LayoutSpec { dim: Dim::TWO, n: 12, boxes: 1, points_per_box: 2, mark_lo: 0.13, mark_hi: 0.2 }
    }
}

/// Hole radius in frame units: `ε^(α−1−δ) r` with `δ = (α−d)/d`.
pub fn frame_radius(eps: f64, alpha: f64, dim: Dim, mark: f64) -> f64 {
    let delta = crate::clusterer::delta_of_alpha(alpha, dim);
    eps.powf(alpha - 1.0 - delta) * mark
}

/// Draws points in nearby grid cubes (groups four cubes apart) until the
/// resulting boxes contain their hole annuli at `eps_ref` with room for a
/// two-cell skin, and annuli are pairwise disjoint.
pub fn random_layout(spec: &LayoutSpec, eps_ref: f64, alpha: f64, seed: u64) -> Result<SceneLayout> {
    let d = spec.dim.get();
    let geom = ClusterGeometry::new(spec.dim, 1.0, spec.n)?;
    let l = geom.cell();
    let mut rng = substream(seed, TAG_AUX, 0x5ce0e);
    const ATTEMPTS: usize = 10_000;
    for _ in 0..ATTEMPTS {
        let mut points = Vec::new();
        let mut marks = Vec::new();
        for b in 0..spec.boxes {
            for _ in 0..spec.points_per_box {
                let mut p = [0.0; 3];
                for a in 0..d {
                    let base = if a == 0 { 4 * b } else { 0 } as f64;
                    let off = rng.random_range(0..2) as f64;
                    p[a] = (base + off + rng.random::<f64>()) * l;
                }
                points.push(p);
                marks.push(rng.random_range(spec.mark_lo..=spec.mark_hi));
            }
        }
        let layout = SceneLayout { dim: spec.dim, n: spec.n, points, marks };
        if layout_is_admissible(&layout, eps_ref, alpha)? {
            return Ok(layout);
        }
    }
    Err(BogovskiiError::Layout(ATTEMPTS))
}

fn layout_is_admissible(layout: &SceneLayout, eps: f64, alpha: f64) -> Result<bool> {
    let geom = ClusterGeometry::new(layout.dim, 1.0, layout.n)?;
    let boxes = match build_boxes_ordered(&layout.points, &geom, None) {
        Ok(b) => b,
        Err(ClusterError::EpsilonTooLarge { .. }) => return Ok(false),
        Err(e) => return Err(e.into()),
    };
    let layer = geom.layer();
    let radii: Vec<f64> = layout.marks.iter().map(|&r| frame_radius(eps, alpha, layout.dim, r)).collect();
    for b in &boxes {
        let mut inner = b.outer;
        for a in 0..layout.dim.get() {
            inner.lo[a] += layer;
            inner.hi[a] -= layer;
        }
        for &k in &b.members {
            // Annulus plus skin inside I^in.
            let reach = 2.0 * radii[k] + 0.25 * layer;
            if inner.linf_to_boundary(&layout.points[k]) <= reach || !inner.contains_open(&layout.points[k]) {
                return Ok(false);
            }
        }
    }
    for i in 0..layout.points.len() {
        for j in 0..i {
            if dist(layout.dim, &layout.points[i], &layout.points[j]) <= 2.0 * (radii[i] + radii[j]) + 0.5 * layer {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Grid spacing `layer/m` with `m ≥ 3` and at least `cells_per_radius` cells
/// across the smallest hole radius.
pub fn scene_spacing(layer: f64, min_radius: f64, cells_per_radius: f64) -> f64 {
    let m = (cells_per_radius * layer / min_radius - 1e-9).ceil().max(3.0);
    layer / m
}

/// Builds the rasterized scene of `layout` at `eps`.
pub fn build_scene(layout: &SceneLayout, eps: f64, alpha: f64, cells_per_radius: f64) -> Result<Scene> {
    let geom = ClusterGeometry::new(layout.dim, 1.0, layout.n)?;
    let cboxes = build_boxes_ordered(&layout.points, &geom, None)?;
    let boxes: Vec<AxisBox> = cboxes.iter().map(|b| b.outer).collect();
    let mut holes = Vec::new();
    for (bi, b) in cboxes.iter().enumerate() {
        for &k in &b.members {
            holes.push(Hole { center: layout.points[k], radius: frame_radius(eps, alpha, layout.dim, layout.marks[k]), owner: bi });
        }
    }
    let layer = geom.layer();
    let min_r = holes.iter().map(|h| h.radius).fold(f64::INFINITY, f64::min);
    let h = scene_spacing(layer, min_r, cells_per_radius);
    let mut domain = boxes[0];
    for b in &boxes[1..] {
        domain = crate::geometry::bounding_box(&domain, b);
    }
    // Box edges sit on multiples of the layer width, so `h` tiles the padded domain.
    let domain = inflate(&domain, geom.margin());
    let grid = rasterize(&domain, h, &boxes, &holes)?;
    Ok(Scene { grid, boxes, holes, layer })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub eps_ladder: Vec<f64>,
    pub alpha: f64,
    pub q: f64,
    pub probes: usize,
    pub power_steps: usize,
    pub cells_per_radius: f64,
    pub layout: LayoutSpec,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            eps_ladder: vec![0.2, 0.14, 0.1, 0.07],
            alpha: 4.0,
            q: 2.0,
            probes: 32,
            power_steps: 8,
            cells_per_radius: 3.0,
            layout: LayoutSpec::default(),
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eps: f64,
    pub q: f64,
    pub ratio: f64,
    pub normalized_ratio: f64,
    pub probes: usize,
    /// Mean global solver iterations per application.
    pub solver_iters: f64,
    pub cells: usize,
    pub holes: usize,
    pub max_drift: f64,
    pub b_ratio: f64,
    pub beta_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub naive: Vec<SweepRow>,
    pub layout: SceneLayout,
}

impl SweepResult {
    /// `max/min` of the normalized column.
    pub fn variation(&self) -> f64 {
        spread(&self.rows)
    }

    pub fn naive_variation(&self) -> f64 {
        spread(&self.naive)
    }

    /// Whether the naive column increases strictly as `ε` decreases.
    pub fn naive_grows(&self) -> bool {
        self.naive.windows(2).all(|w| w[1].normalized_ratio > w[0].normalized_ratio)
    }
}

fn spread(rows: &[SweepRow]) -> f64 {
    let v = rows.iter().map(|r| r.normalized_ratio);
    v.clone().fold(0.0, f64::max) / v.fold(f64::INFINITY, f64::min)
}

/// `ratio / (1 + ε^(2/q − 1))`.
pub fn normalize_ratio(ratio: f64, eps: f64, q: f64) -> f64 {
    ratio / (1.0 + eps.powf(2.0 / q - 1.0))
}

/// Estimates `sup ‖∇B_ε f‖_q / ‖f‖_q` from random probes and a power
/// iteration of `B_εᵀ G B_ε`, with the naive control treated the same way.
pub fn operator_norm_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    if cfg.eps_ladder.is_empty() || cfg.eps_ladder.windows(2).any(|w| w[1] >= w[0]) {
        return Err(BogovskiiError::Sweep("ladder must be non-empty and strictly decreasing".into()));
    }
    if !(cfg.q > 1.0) || cfg.probes == 0 {
        return Err(BogovskiiError::Sweep("need q > 1 and at least one probe".into()));
    }
    let layout = random_layout(&cfg.layout, cfg.eps_ladder[0], cfg.alpha, cfg.seed)?;
    let mut rows = Vec::new();
    let mut naive = Vec::new();
    for (k, &eps) in cfg.eps_ladder.iter().enumerate() {
        let scene = build_scene(&layout, eps, cfg.alpha, cfg.cells_per_radius)?;
        let op = BogovskiiOperator::new(scene)?;
        let g = op.grid().clone();
        let mut rng = substream(cfg.seed, TAG_AUX, 1 + k as u64);
        let probes: Vec<Vec<f64>> = (0..cfg.probes)
            .map(|_| {
                let mut f: Vec<f64> = (0..g.cells()).map(|_| rng.random_range(-1.0..1.0)).collect();
                op.project(&mut f);
                f
            })
            .collect();
        let ratio = |u: &VelocityField, f: &[f64]| grad_norm(&g, u, cfg.q) / scalar_norm(&g, f, op.fluid_mask(), cfg.q);
        let (mut best, mut best_naive) = (0.0f64, 0.0f64);
        let mut iters = 0usize;
        let mut apps = 0usize;
        let mut agg = ApplyStats::default();
        for f in &probes {
            let (u, v, st) = op.apply_with_control(f)?;
            best = best.max(ratio(&u, f));
            iters += st.global_iterations;
            apps += 1;
            agg.max_drift = agg.max_drift.max(st.max_drift);
            agg.b_ratio = agg.b_ratio.max(st.b_ratio);
            agg.beta_ratio = agg.beta_ratio.max(st.beta_ratio);
            best_naive = best_naive.max(ratio(&v, f));
        }
        let mut f = probes[0].clone();
        let mut fn_ = probes[0].clone();
        for _ in 0..cfg.power_steps {
            let (u, st) = op.apply(&f)?;
            best = best.max(ratio(&u, &f));
            iters += st.global_iterations;
            apps += 1;
            f = op.apply_adjoint(&energy_apply(&g, &u))?;
            normalize(&mut f);
            let (v, _) = op.naive(&fn_)?;
            best_naive = best_naive.max(ratio(&v, &fn_));
            fn_ = op.naive_adjoint(&energy_apply(&g, &v))?;
            normalize(&mut fn_);
        }
        let (u, st) = op.apply(&f)?;
        best = best.max(ratio(&u, &f));
        iters += st.global_iterations;
        apps += 1;
        let (v, _) = op.naive(&fn_)?;
        best_naive = best_naive.max(ratio(&v, &fn_));
        let base = SweepRow {
            eps,
            q: cfg.q,
            ratio: best,
            normalized_ratio: normalize_ratio(best, eps, cfg.q),
            probes: cfg.probes,
            solver_iters: iters as f64 / apps as f64,
            cells: g.cells(),
            holes: op.scene.holes.len(),
            max_drift: agg.max_drift,
            b_ratio: agg.b_ratio,
            beta_ratio: agg.beta_ratio,
        };
        naive.push(SweepRow { ratio: best_naive, normalized_ratio: normalize_ratio(best_naive, eps, cfg.q), ..base.clone() });
        rows.push(base);
    }
    Ok(SweepResult { rows, naive, layout })
}

fn normalize(f: &mut [f64]) {
    let n = f.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n > 0.0 {
        f.iter_mut().for_each(|v| *v /= n);
    }
}

/// `eps,q,ratio,normalized_ratio,probes,solver_iters`.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("eps,q,ratio,normalized_ratio,probes,solver_iters\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{},{}", r.eps, r.q, r.ratio, r.normalized_ratio, r.probes, r.solver_iters);
    }
    s
}

/// Residuals of `u = B_ε f` against its defining properties.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    /// `‖div u − f‖₂ / ‖f‖₂` over fluid cells.
    pub divergence_residual: f64,
    /// Number of nonzero faces touching a hole or exterior cell.
    pub trace_violations: usize,
}

pub fn verify(g: &MaskedGrid, u: &VelocityField, f: &[f64]) -> Verification {
    let div = divergence(g, u);
    let (mut num, mut den) = (0.0, 0.0);
    for c in 0..g.cells() {
        if g.is_fluid(c) {
            num += (div[c] - f[c]).powi(2);
            den += f[c] * f[c];
        }
    }
    let mut trace_violations = 0;
    for a in 0..g.dim.get() {
        for face in 0..g.faces(a) {
            let (lo, hi) = g.face_cells(a, face);
            let blocked = [lo, hi].iter().any(|c| c.is_none_or(|c| !g.is_fluid(c)));
            if blocked && u.comps[a][face] != 0.0 {
                trace_violations += 1;
            }
        }
    }
    Verification { divergence_residual: if den > 0.0 { (num / den).sqrt() } else { num.sqrt() }, trace_violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::face_dot;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    /// 16×16 grid on the unit square, box `[h, 15h]²`, layer `3h`, one hole.
    fn small_scene() -> Scene {
        let h = 1.0 / 16.0;
        let domain = AxisBox::cube(Dim::TWO, 0.0, 1.0).unwrap();
        let boxes = vec![AxisBox::cube(Dim::TWO, h, 15.0 * h).unwrap()];
        let holes = vec![Hole { center: [0.5, 0.5, 0.0], radius: 1.6 * h, owner: 0 }];
        let grid = rasterize(&domain, h, &boxes, &holes).unwrap();
        Scene { grid, boxes, holes, layer: 3.0 * h }
    }

    fn random_data(op: &BogovskiiOperator, seed: u64) -> Vec<f64> {
        let mut rng = substream(seed, TAG_AUX, 77);
        let mut f: Vec<f64> = (0..op.grid().cells()).map(|_| rng.random_range(-1.0..1.0)).collect();
        op.project(&mut f);
        f
    }

    #[test]
    fn no_holes_gives_all_fluid() {
        let domain = AxisBox::cube(Dim::TWO, 0.0, 1.0).unwrap();
        let g = rasterize(&domain, 0.125, &[], &[]).unwrap();
        assert!(g.class.iter().all(|c| *c == CellClass::Fluid));
    }

    #[test]
    fn hole_area_matches_disc() {
        let h = 0.01;
        let domain = AxisBox::cube(Dim::TWO, 0.0, 1.0).unwrap();
        let boxes = vec![AxisBox::cube(Dim::TWO, 0.1, 0.9).unwrap()];
        let holes = vec![Hole { center: [0.503, 0.497, 0.0], radius: 10.0 * h, owner: 0 }];
        let g = rasterize(&domain, h, &boxes, &holes).unwrap();
        let count = g.class.iter().filter(|c| **c == CellClass::Hole).count() as f64;
        let area = std::f64::consts::PI * 100.0;
        assert!((count - area).abs() < 0.1 * area, "{count}");
    }

    #[test]
    fn unresolved_hole_and_foreign_hole_are_rejected() {
        let domain = AxisBox::cube(Dim::TWO, 0.0, 1.0).unwrap();
        let boxes = vec![AxisBox::cube(Dim::TWO, 0.25, 0.75).unwrap()];
        let small = vec![Hole { center: [0.5; 3], radius: 0.1, owner: 0 }];
        assert!(matches!(rasterize(&domain, 0.125, &boxes, &small), Err(BogovskiiError::UnresolvableHoles { .. })));
        let outside = vec![Hole { center: [0.1, 0.1, 0.0], radius: 0.05, owner: 0 }];
        assert!(matches!(rasterize(&domain, 0.01, &boxes, &outside), Err(BogovskiiError::Scene(_))));
    }

    #[test]
    fn cutoff_values_and_gradients() {
        let s = small_scene();
        let c = build_cutoffs(&s).unwrap();
        let g = &s.grid;
        let chi = c.chi[0].dense(g);
        for a in 0..2 {
            for f in 0..g.faces(a) {
                let x = g.face_center(a, f);
                let v = chi.comps[a][f];
                assert!((0.0..=1.0).contains(&v));
                if s.boxes[0].linf_to_boundary(&x) >= s.layer && s.boxes[0].contains_open(&x) {
                    assert_eq!(v, 1.0);
                }
                if !s.boxes[0].contains_open(&x) {
                    assert_eq!(v, 0.0);
                }
            }
        }
        assert_relative_eq!(c.chi_grad[0] * s.layer, 1.0, max_relative = 1e-9);
        assert!(c.zeta_grad[0] * s.holes[0].radius <= 2.0);
    }

    #[test]
    fn thin_layer_is_rejected() {
        let mut s = small_scene();
        s.layer = 2.0 * s.grid.h;
        assert!(matches!(build_cutoffs(&s), Err(BogovskiiError::UnresolvableLayer { .. })));
    }

    #[test]
    fn layer_mean_examples() {
        let s = small_scene();
        let g = &s.grid;
        let cells = layer_cells(&s, 0);
        let mut u = VelocityField::zeros(g);
        u.comps[0].iter_mut().for_each(|v| *v = 2.5);
        u.comps[1].iter_mut().for_each(|v| *v = -1.0);
        let m = layer_mean(g, &u, &cells);
        assert_relative_eq!(m[0], 2.5);
        assert_relative_eq!(m[1], -1.0);
        for a in 0..2 {
            for f in 0..g.faces(a) {
                u.comps[a][f] = g.face_center(a, f)[a];
            }
        }
        let m = layer_mean(g, &u, &cells);
        assert_relative_eq!(m[0], 0.5, epsilon = 1e-12);
        assert_relative_eq!(m[1], 0.5, epsilon = 1e-12);
        for a in 0..2 {
            for f in 0..g.faces(a) {
                let k = g.face_coords(a, f);
                u.comps[a][f] = if (k[0] + k[1]) % 2 == 0 { 1.0 } else { -1.0 };
            }
        }
        let m = layer_mean(g, &u, &cells);
        assert!(m[0].abs() < 1e-14 && m[1].abs() < 1e-14);
    }

    #[test]
    fn restriction_without_boxes_is_identity() {
        let domain = AxisBox::cube(Dim::TWO, 0.0, 1.0).unwrap();
        let grid = rasterize(&domain, 0.125, &[], &[]).unwrap();
        let scene = Scene { grid, boxes: vec![], holes: vec![], layer: 0.5 };
        let r = Restriction::new(&scene).unwrap();
        let mut u = VelocityField::zeros(&scene.grid);
        u.comps[0][10] = 3.0;
        u.comps[1][7] = -2.0;
        assert_eq!(r.apply(&u).unwrap().0, u);
    }

    #[test]
    fn restriction_zeroes_hole_faces_for_any_field() {
        let s = small_scene();
        let r = Restriction::new(&s).unwrap();
        let g = &s.grid;
        let op = BogovskiiOperator::new(s.clone()).unwrap();
        let f = random_data(&op, 4);
        let (u, _) = op.global_solve(&f).unwrap();
        let (out, _) = r.apply(&u).unwrap();
        for a in 0..2 {
            for face in 0..g.faces(a) {
                let (lo, hi) = g.face_cells(a, face);
                if [lo, hi].iter().flatten().any(|&c| g.class[c] == CellClass::Hole) {
                    assert_eq!(out.comps[a][face].to_bits(), 0f64.to_bits());
                }
            }
        }
    }

    #[test]
    fn small_scene_matches_dense_oracle() {
        let op = BogovskiiOperator::new(small_scene()).unwrap();
        let g = op.grid().clone();
        for seed in 0..3 {
            let f = random_data(&op, seed);
            let (u, st) = op.apply(&f).unwrap();
            let v = verify(&g, &u, &f);
            assert!(v.divergence_residual < 1e-7, "{v:?}");
            assert_eq!(v.trace_violations, 0);
            assert!(st.max_drift < 1e-10);
            let w = op.dense_oracle(&f).unwrap();
            let (du, dw) = (divergence(&g, &u), divergence(&g, &w));
            for c in 0..g.cells() {
                if g.is_fluid(c) {
                    assert!((du[c] - dw[c]).abs() <= 1e-10 * (1.0 + dw[c].abs()));
                }
            }
            let factor = grad_norm(&g, &u, 2.0) / grad_norm(&g, &w, 2.0);
            assert!((1.0 - 1e-9..50.0).contains(&factor), "{factor}");
        }
    }

    #[test]
    fn zero_data_gives_zero() {
        let op = BogovskiiOperator::new(small_scene()).unwrap();
        let (u, _) = op.apply(&vec![0.0; op.grid().cells()]).unwrap();
        assert_eq!(u.max_abs(), 0.0);
    }

    #[test]
    fn adjoints_are_transposes() {
        let op = BogovskiiOperator::new(small_scene()).unwrap();
        let g = op.grid().clone();
        let f = random_data(&op, 11);
        let mut rng = substream(12, TAG_AUX, 1);
        let mut w = VelocityField::zeros(&g);
        for comp in &mut w.comps {
            comp.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
        }
        let (u, _) = op.apply(&f).unwrap();
        let wt = op.apply_adjoint(&w).unwrap();
        let lhs = face_dot(&w, &u);
        let rhs: f64 = f.iter().zip(&wt).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-8 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
        let (v, _) = op.naive(&f).unwrap();
        let wn = op.naive_adjoint(&w).unwrap();
        let lhs = face_dot(&w, &v);
        let rhs: f64 = f.iter().zip(&wn).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-8 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
    }

    #[test]
    fn cluster_scene_end_to_end() {
        let spec = LayoutSpec { boxes: 2, points_per_box: 2, mark_lo: 0.05, mark_hi: 0.15, ..Default::default() };
        let layout = random_layout(&spec, 0.25, 4.0, 9).unwrap();
        let scene = build_scene(&layout, 0.25, 4.0, 2.0).unwrap();
        assert_eq!(scene.holes.len(), 4);
        let op = BogovskiiOperator::new(scene).unwrap();
        let c = op.restriction().cutoffs();
        for &gchi in &c.chi_grad {
            // ‖∇χ‖·s ∈ [8N, 32N] with layer = s/(16N).
            assert!((0.5..=2.0).contains(&(gchi * op.scene.layer)));
        }
        let f = random_data(&op, 1);
        let (u, st) = op.apply(&f).unwrap();
        let v = verify(op.grid(), &u, &f);
        assert!(v.divergence_residual < 1e-7 && v.trace_violations == 0, "{v:?}");
        assert!(st.max_drift < 1e-10);
    }

    #[test]
    fn zeta_gradient_scales_with_hole_radius() {
        let spec = LayoutSpec { boxes: 1, points_per_box: 1, ..Default::default() };
        let layout = random_layout(&spec, 0.2, 4.0, 3).unwrap();
        let mut scaled = Vec::new();
        for eps in [0.2, 0.14, 0.1] {
            let scene = build_scene(&layout, eps, 4.0, 3.0).unwrap();
            let c = build_cutoffs(&scene).unwrap();
            let eps_alpha = frame_radius(eps, 4.0, Dim::TWO, 1.0);
            scaled.push(c.zeta_grad[0] * eps_alpha);
            assert_relative_eq!(c.chi_grad[0] * scene.layer, 1.0, max_relative = 1e-9);
        }
        let (lo, hi) = scaled.iter().fold((f64::INFINITY, 0.0f64), |(l, h), v| (l.min(*v), h.max(*v)));
        assert!(hi / lo < 1.5, "{scaled:?}");
    }

    #[test]
    fn normalization_for_q_two_is_constant() {
        for eps in [0.2, 0.07] {
            assert_eq!(normalize_ratio(4.0, eps, 2.0), 2.0);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]
        #[test]
        fn operator_is_linear(seed in any::<u64>(), a in -2.0..2.0f64, b in -2.0..2.0f64) {
            let op = BogovskiiOperator::new(small_scene()).unwrap();
            let f1 = random_data(&op, seed);
            let f2 = random_data(&op, seed ^ 0xabc);
            let comb: Vec<f64> = f1.iter().zip(&f2).map(|(x, y)| a * x + b * y).collect();
            let (u1, _) = op.apply(&f1).unwrap();
            let (u2, _) = op.apply(&f2).unwrap();
            let (u3, _) = op.apply(&comb).unwrap();
            let scale = 1.0 + u3.max_abs();
            for k in 0..2 {
                for i in 0..u3.comps[k].len() {
                    let lin = a * u1.comps[k][i] + b * u2.comps[k][i];
                    prop_assert!((lin - u3.comps[k][i]).abs() < 1e-8 * scale);
                }
            }
        }
    }
}
