use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use perfdom::bogovskii::{build_scene, random_layout, BogovskiiOperator, LayoutSpec};
use perfdom::clusterer::{build_cluster_boxes, ClusterParams};
use perfdom::cutoff::sparse_gap;
use perfdom::geometry::{AxisBox, Dim};
use perfdom::grid::MaskedGrid;
use perfdom::john::{construct_john_path, two_ball_scene};
use perfdom::sampler::{sample_marked_ppp, MarkDist, ProcessParams};
use perfdom::solver::{remove_mean, DivSolver, SolveOptions};
use perfdom::stochastic::poisson_tail_bound;
use perfdom_bench::{mean_zero_data, perforation};
use std::hint::black_box;

fn poisson(c: &mut Criterion) {
    c.bench_function("poisson_tail_grid_100x20", |b| {
        b.iter(|| {
            let mut s = 0.0;
            for i in 0..100 {
                let x = 0.01 * 6000f64.powf(i as f64 / 99.0);
                for n in 1..=20 {
                    s += poisson_tail_bound(black_box(x), n).0;
                }
            }
            s
        })
    });
}

fn sampling(c: &mut Criterion) {
    let window = AxisBox::cube(Dim::THREE, -5.0, 5.0).unwrap();
    let pp = ProcessParams { intensity: 50.0, marks: MarkDist::Uniform { a: 0.0, b: 1.0 }, seed: 1 };
    c.bench_function("sample_ppp_3d_50k", |b| b.iter(|| sample_marked_ppp(black_box(&pp), &window).unwrap().len()));
}

fn clustering(c: &mut Criterion) {
    let perf = perforation(Dim::THREE, 0.25, 50.0, 0.05, 4.0, 7);
    let centers = perf.centers();
    let params = ClusterParams::new(Dim::THREE, 0.05, 4.0, 1.5).unwrap();
    c.bench_function("cluster_boxes_3d_eps0.05", |b| b.iter(|| build_cluster_boxes(black_box(&centers), &params).unwrap().len()));
}

fn john(c: &mut Criterion) {
    let cb = two_ball_scene(Dim::THREE, 0.1, 4.0, 4.0 / 3.0, 40).unwrap();
    let x = [0.1 * cb.half[0], -0.2 * cb.half[1], 0.05 * cb.half[2]];
    c.bench_function("john_path_interior", |b| b.iter(|| construct_john_path(black_box(&x), &cb).unwrap().witness_constant));
}

fn solver(c: &mut Criterion) {
    let mut group = c.benchmark_group("div_solver");
    group.sample_size(10);
    for n in [64usize, 128] {
        let g = MaskedGrid::new(Dim::TWO, [0.0; 3], 1.0 / n as f64, [n, n, 1]).unwrap();
        let region = vec![true; g.cells()];
        let s = DivSolver::new(&g, &region).unwrap();
        let mut f = mean_zero_data(g.cells());
        remove_mean(&mut f, &region);
        group.bench_with_input(BenchmarkId::new("solve", n), &f, |b, f| b.iter(|| s.solve(f, &SolveOptions::default()).unwrap().1.iterations));
    }
    group.finish();
}

fn bogovskii(c: &mut Criterion) {
    let layout = random_layout(&LayoutSpec::default(), 0.2, 4.0, 1).unwrap();
    let op = BogovskiiOperator::new(build_scene(&layout, 0.2, 4.0, 3.0).unwrap()).unwrap();
    let mut f = mean_zero_data(op.grid().cells());
    op.project(&mut f);
    let mut group = c.benchmark_group("bogovskii");
    group.sample_size(10);
    group.bench_function("apply_eps0.2", |b| b.iter(|| op.apply(black_box(&f)).unwrap().1.global_iterations));
    group.finish();
}

fn cutoff(c: &mut Criterion) {
    let perf = perforation(Dim::THREE, 2.0, 0.02, 0.2, 4.0, 1);
    let h = 0.2f64.powi(4) / 3.0;
    let mut group = c.benchmark_group("cutoff");
    group.sample_size(10);
    group.bench_function("sparse_gap_eps0.2", |b| b.iter(|| sparse_gap(black_box(&perf), h, 2.0).unwrap().gap));
    group.finish();
}

criterion_group!(benches, poisson, sampling, clustering, john, solver, bogovskii, cutoff);
criterion_main!(benches);
