//! Fixtures shared by the kernel benchmarks.

use perfdom::geometry::{AxisBox, Dim, StarDomain};
use perfdom::sampler::{build_perforation, sample_marked_ppp, scaled_window, MarkDist, PerforatedDomain, ProcessParams};

/// Perforation of `[-r, r]^d` at `eps` with uniform(0, 1) marks.
pub fn perforation(dim: Dim, half: f64, lambda: f64, eps: f64, alpha: f64, seed: u64) -> PerforatedDomain {
    let dom = StarDomain::Box { aabb: AxisBox::cube(dim, -half, half).expect("valid cube") };
    let pp = ProcessParams { intensity: lambda, marks: MarkDist::Uniform { a: 0.0, b: 1.0 }, seed };
    let smp = sample_marked_ppp(&pp, &scaled_window(&dom, eps)).expect("sample");
    build_perforation(&smp, &dom, eps, alpha).expect("perforation")
}

/// Mean-zero cell data with a fixed pseudo-random pattern.
pub fn mean_zero_data(cells: usize) -> Vec<f64> {
    let mut f: Vec<f64> = (0..cells).map(|c| ((c * 7919) % 101) as f64 - 50.0).collect();
    let m = f.iter().sum::<f64>() / cells as f64;
    f.iter_mut().for_each(|v| *v -= m);
    f
}
