use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use ipsr_bench::oriented_sphere;
use ipsr_core::fixtures::Shape;
use ipsr_core::isosurface::{marching_cubes, mean_sample_value};
use ipsr_core::orient::{link_faces, quickhull3, update_normals, visibility_init};
use ipsr_core::pipeline::run_ipsr;
use ipsr_core::poisson::{solve_screened_from, SolverParams};
use ipsr_core::spatial::{KdTree, DEFAULT_LEAF_SIZE};
use ipsr_core::{Init, IpsrConfig};

fn spatial(c: &mut Criterion) {
    let s = oriented_sphere(20_000, 7);
    c.bench_function("kdtree_build_7", |b| b.iter(|| KdTree::build(black_box(s.positions()), DEFAULT_LEAF_SIZE)));
    let tree = KdTree::build(s.positions(), DEFAULT_LEAF_SIZE).unwrap();
    let queries = Shape::UNIT_SPHERE.sample(1000, 9);
    c.bench_function("knn10_x1000", |b| {
        b.iter(|| queries.iter().map(|&q| tree.knn(q, 10).len()).sum::<usize>())
    });
    let pts = Shape::UNIT_SPHERE.sample(5000, 2);
    c.bench_function("quickhull_5k", |b| b.iter(|| quickhull3(black_box(&pts)).unwrap().len()));
}

fn stages(c: &mut Criterion) {
    let mut g = c.benchmark_group("depth6");
    g.sample_size(10);
    let s = oriented_sphere(20_000, 6);
    let params = SolverParams::default();
    g.bench_function("solve", |b| b.iter(|| solve_screened_from(&s, 64, &params, None).unwrap()));
    let (field, _) = solve_screened_from(&s, 64, &params, None).unwrap();
    let iso = mean_sample_value(&field, &s);
    g.bench_function("marching_cubes", |b| b.iter(|| marching_cubes(&field, iso)));
    let mesh = marching_cubes(&field, iso);
    let tree = KdTree::build(s.positions(), DEFAULT_LEAF_SIZE).unwrap();
    g.bench_function("link_and_update", |b| {
        b.iter(|| update_normals(&s, &mesh, &link_faces(&mesh, &tree, 10)))
    });
    g.bench_function("visibility_init", |b| b.iter(|| visibility_init(&s, 3.0).unseen));
    let points = Shape::UNIT_SPHERE.sample(4000, 1);
    g.bench_function("run_ipsr_sphere_4k", |b| {
        b.iter_batched(
            || IpsrConfig { depth: 6, init: Init::Random { seed: 1 }, ..Default::default() },
            |cfg| run_ipsr(&points, &cfg).unwrap().reports.len(),
            BatchSize::SmallInput,
        )
    });
    g.finish();
}

criterion_group!(benches, spatial, stages);
criterion_main!(benches);
