use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use linksdf_bench::{link_net, random_points, single_link_sdf, tube_oracle};
use std::hint::black_box;

fn composite_batch(c: &mut Criterion) {
    let sdf = single_link_sdf(link_net());
    let q = [0.3];
    let mut group = c.benchmark_group("composite_query");
    for n in [1usize, 10, 100, 1_000, 10_000] {
        let pts = random_points(n, 0.6, n as u64);
        group.throughput(Throughput::Elements(n as u64));
        group.bench_with_input(BenchmarkId::from_parameter(n), &pts, |b, pts| {
            b.iter(|| sdf.composite_min_distance(black_box(&q), black_box(pts)).unwrap())
        });
    }
    group.finish();
}

fn raw_network(c: &mut Criterion) {
    let net = link_net();
    let pts = random_points(10_000, 0.6, 1);
    c.bench_function("network_forward_10000", |b| b.iter(|| net.forward(black_box(&pts), false)));
    c.bench_function("network_forward_grad_10000", |b| b.iter(|| net.forward(black_box(&pts), true)));
}

fn exact_oracle(c: &mut Criterion) {
    let oracle = tube_oracle();
    let pts = random_points(1_000, 0.6, 2);
    c.bench_function("mesh_oracle_1000", |b| b.iter(|| oracle.query_batch(black_box(&pts))));
}

criterion_group!(benches, composite_batch, raw_network, exact_oracle);
criterion_main!(benches);
