use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use rdspread_bench::{disc_mask, front_field};
use rdspread_core::frontspeed::min_speed;
use rdspread_core::geometry::{distance_transform, hausdorff};
use rdspread_core::reaction::ReactionTerm;
use rdspread_core::solver::Solver;

fn solver_steps(c: &mut Criterion) {
    let mut group = c.benchmark_group("solver");
    for n in [256usize, 1024] {
        let f = front_field(n);
        let dt = f.grid.cfl_bound(0.9);
        group.throughput(Throughput::Elements((n * n * 10) as u64));
        group.bench_with_input(BenchmarkId::new("ten_steps", n), &f, |b, f| {
            let mut s = Solver::new(f.clone(), ReactionTerm::logistic(), dt).unwrap();
            b.iter(|| s.advance(10).unwrap());
        });
    }
    group.finish();
}

fn geometry(c: &mut Criterion) {
    let m = disc_mask(512);
    c.bench_function("distance_transform_512", |b| b.iter(|| distance_transform(black_box(&m))));
    let mut shifted = m.clone();
    for j in 0..m.ny {
        for i in 0..m.nx {
            shifted.set(i, j, i >= 5 && m.get(i - 5, j));
        }
    }
    c.bench_function("hausdorff_512", |b| b.iter(|| hausdorff(black_box(&m), black_box(&shifted), None).unwrap()));
}

fn front_speed(c: &mut Criterion) {
    let f = ReactionTerm::bistable(0.25).unwrap();
    c.bench_function("min_speed_bistable", |b| b.iter(|| min_speed(black_box(&f)).unwrap()));
}

criterion_group!(benches, solver_steps, geometry, front_speed);
criterion_main!(benches);
