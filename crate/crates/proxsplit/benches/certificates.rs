//! Benchmarks the key-inequality certificate scan: the rayon data-parallel
//! reduction (feature `parallel`, on by default) against the sequential
//! fallback, over a range of trace lengths.
//!
//! Run `cargo bench` for the parallel build and
//! `cargo bench --no-default-features` for the sequential-only build.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use proxsplit::certificates::{key_inequality_worst_seq, sample_probes};
use proxsplit::gallery;
use proxsplit::solver::{run, RunConfig, RunTrace, StepsizeRule};
use proxsplit::Point;

fn make_trace(iters: usize) -> (gallery::ProblemInstance, RunTrace) {
    let p = gallery::lad_l1_desk(20, 10, 0.3, 42).unwrap();
    let trace = run(
        p.f.as_ref(),
        p.g.as_ref(),
        &RunConfig {
            x0: Point::from(vec![1.0; p.dim]),
            rule: StepsizeRule::Exogenous { scale: 1.0, rate: 0.75 },
            max_iters: iters,
            stop_tol: 0.0,
            record_every: 1,
        },
    )
    .unwrap();
    (p, trace)
}

fn bench_key_inequality(c: &mut Criterion) {
    let mut group = c.benchmark_group("key_inequality_worst");
    for iters in [500usize, 2000, 8000] {
        let (p, trace) = make_trace(iters);
        let probes = sample_probes(p.g.as_ref(), p.dim, 100, 13).unwrap();
        let values: Vec<f64> = probes.iter().map(|x| p.objective(x).unwrap()).collect();

        group.bench_with_input(BenchmarkId::new("sequential", iters), &iters, |b, _| {
            b.iter(|| key_inequality_worst_seq(&trace, &probes, &values).unwrap())
        });

        #[cfg(feature = "parallel")]
        group.bench_with_input(BenchmarkId::new("parallel", iters), &iters, |b, _| {
            b.iter(|| {
                proxsplit::certificates::key_inequality_worst_par(&trace, &probes, &values)
                    .unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench_key_inequality);
criterion_main!(benches);
