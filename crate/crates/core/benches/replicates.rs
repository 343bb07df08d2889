use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use logit_kalman::data::{generate, StreamSpec};
use logit_kalman::lab::{expected_regret, run_replicate, run_trace, TraceOptions};
use logit_kalman::learners::LearnerSpec;
use logit_kalman::parallel::{map_indexed, map_indexed_sequential};

const EKF: LearnerSpec = LearnerSpec::Ekf { p1: 1.0 };

fn replicate_regret(spec: &StreamSpec, r: usize) -> f64 {
    let t = run_replicate(&EKF, spec, r, TraceOptions::default()).unwrap();
    expected_regret(&t, spec.theta_true.as_deref().unwrap()).unwrap()
}

// 32 EKF replicates on the standard stream, sequential vs the rayon pool
fn replicates(c: &mut Criterion) {
    let spec = StreamSpec::wellspecified(2000, vec![1.0, 0.0, 0.0, 0.0, 0.0], 0);
    let mut g = c.benchmark_group("ekf_replicates");
    g.sample_size(10);
    g.bench_function("sequential", |b| {
        b.iter(|| map_indexed_sequential(32, |r| replicate_regret(black_box(&spec), r)))
    });
    g.bench_function("parallel", |b| b.iter(|| map_indexed(32, |r| replicate_regret(black_box(&spec), r))));
    g.finish();
}

fn learners(c: &mut Criterion) {
    let mut g = c.benchmark_group("learner_run");
    g.sample_size(10);
    for n in [250, 1000] {
        let stream = generate(&StreamSpec::wellspecified(n, vec![1.0, 0.0, 0.0], 1)).unwrap();
        for spec in [EKF, LearnerSpec::Sos { p1: 1.0 }] {
            g.bench_with_input(BenchmarkId::new(spec.name(), n), &stream, |b, s| {
                b.iter(|| run_trace(&spec, s).unwrap())
            });
        }
    }
    g.finish();
}

criterion_group!(benches, replicates, learners);
criterion_main!(benches);
