use std::hint::black_box;

use bads::gp::{GpHyperparams, GpModel};
use bads::mesh::MeshState;
use bads::points::PointSet;
use bads::search::{propose_candidates, score_candidates_sequential, SearchState};
use bads::{optimize, Options, ProblemSpec};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn model(dim: usize, n: usize) -> GpModel {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let inputs: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect();
    let values = inputs.iter().map(|x| x.iter().map(|v| (v - 0.4) * (v - 0.4)).sum()).collect();
    let hp = GpHyperparams {
        log_length_scales: vec![0.3f64.ln(); dim],
        log_signal_sd: 0.0,
        log_noise_sd: 1e-3f64.ln(),
        constant_mean: 0.5,
    };
    GpModel::condition(inputs, values, vec![0.0; n], hp).unwrap()
}

fn candidates(dim: usize) -> Vec<Vec<f64>> {
    let space = ProblemSpec::new(|_: &[f64]| 0.0, vec![0.0; dim], vec![-1.0; dim], vec![1.0; dim])
        .validate()
        .unwrap()
        .space()
        .clone();
    propose_candidates(
        &vec![0.5; dim],
        &MeshState::new(0.25, 1.0),
        &SearchState::default(),
        &space,
        &PointSet::new(),
        &mut ChaCha8Rng::seed_from_u64(2),
    )
}

fn scoring(c: &mut Criterion) {
    let mut group = c.benchmark_group("lcb_scoring");
    for (dim, n) in [(2, 70), (10, 150)] {
        let m = model(dim, n);
        let cands = candidates(dim);
        let id = format!("d{dim}_n{n}");
        group.bench_with_input(BenchmarkId::new("sequential", &id), &cands, |b, cands| {
            b.iter(|| score_candidates_sequential(&m, black_box(cands), 2.0))
        });
        #[cfg(feature = "parallel")]
        group.bench_with_input(BenchmarkId::new("parallel", &id), &cands, |b, cands| {
            b.iter(|| bads::search::score_candidates_parallel(&m, black_box(cands), 2.0))
        });
    }
    group.finish();
}

fn full_run(c: &mut Criterion) {
    let rosenbrock = |x: &[f64]| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2);
    c.bench_function("optimize_rosenbrock_300", |b| {
        b.iter(|| {
            let mut p = ProblemSpec::new(rosenbrock, vec![-1.0, 2.0], vec![-5.0; 2], vec![5.0; 2]).validate().unwrap();
            optimize(&mut p, &Options::default().with_seed(0).with_max_evaluations(300)).unwrap()
        })
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = scoring, full_run
}
criterion_main!(benches);
