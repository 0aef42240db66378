//! Multi-seed throughput: the rayon-backed `run_many` against the sequential
//! fallback on the circle landscape. With the `parallel` feature disabled the
//! two paths coincide, which this harness makes visible as equal timings.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use proxescape::parallel::{run_many, run_many_sequential};
use proxescape::problems::make_circle_abs;
use proxescape::StationarityMode;

fn bench_multi_seed(c: &mut Criterion) {
    let p = make_circle_abs(2);
    let params = p
        .schedule()
        .expect("recommended schedule is valid")
        .with_overrides(None, None, None, None, Some(300))
        .expect("override is valid");
    let op = p.step_operator(params.eta, 1e-10).expect("operator");
    let seeds: Vec<u64> = (0..8).collect();
    let mode = StationarityMode::GradientMapping;

    let mut group = c.benchmark_group("multi_seed_circle");
    group.sample_size(10);
    group.bench_with_input(BenchmarkId::new("run_many", seeds.len()), &seeds, |b, s| {
        b.iter(|| run_many(&op, &p.recommended.start, &params, s, mode))
    });
    group.bench_with_input(
        BenchmarkId::new("run_many_sequential", seeds.len()),
        &seeds,
        |b, s| b.iter(|| run_many_sequential(&op, &p.recommended.start, &params, s, mode)),
    );
    group.finish();
}

criterion_group!(benches, bench_multi_seed);
criterion_main!(benches);
