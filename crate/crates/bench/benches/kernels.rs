use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mgnn::exp::{ErMultiplexSpec, ExperimentConfig, Task};
use mgnn::mlgraph::{is_superdiffusive, supra_laplacian, symmetric_eigenvalues};
use mgnn::nn::{input_features, FeatureMode, GraphClassifier, SupraGraph};
use mgnn::tensor::GradStore;
use mgnn::{ParamStore, Tape};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn spectral(c: &mut Criterion) {
    let mut group = c.benchmark_group("spectral");
    for n in [25, 50, 100] {
        let net = ErMultiplexSpec { n_nodes: n, p: vec![0.1, 0.3], coupling: 1.0, seed: 7 }.generate().unwrap();
        let lap = supra_laplacian(&net).unwrap();
        group.bench_with_input(BenchmarkId::new("eigenvalues", 2 * n), &lap, |b, lap| {
            b.iter(|| symmetric_eigenvalues(black_box(lap.data()), lap.dim()).unwrap())
        });
    }
    let net = ErMultiplexSpec::two_layer(0.1, 0.3, 1.0, 7).generate().unwrap();
    group.bench_function("superdiffusion_label_n50", |b| b.iter(|| is_superdiffusive(black_box(&net)).unwrap()));
    group.finish();
}

fn supra_gat(c: &mut Criterion) {
    let mut group = c.benchmark_group("graph_clf_step");
    let cfg = ExperimentConfig::defaults(Task::GraphClf);
    for p in [0.05, 0.3] {
        let net = ErMultiplexSpec::two_layer(p, p, 1.0, 3).generate().unwrap();
        let graph = SupraGraph::new(&net);
        let x = input_features(&net, FeatureMode::Degree);
        let mut store = ParamStore::new();
        let model = GraphClassifier::new(&mut store, cfg.model(x.cols(), 2), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let ids: std::rc::Rc<[usize]> = vec![0; graph.n_rows()].into();
        group.bench_with_input(BenchmarkId::new("forward_backward", p), &p, |b, _| {
            b.iter(|| {
                let mut tape = Tape::new();
                let xv = tape.constant(x.clone());
                let y = model.forward(&mut tape, &store, &graph, &ids, 1, xv, None).unwrap();
                let loss = tape.mse_loss(y, &[1.0]).unwrap();
                let mut grads = GradStore::zeros_like(&store);
                tape.backward_into(loss, &mut grads).unwrap();
                grads
            })
        });
    }
    group.finish();
}

criterion_group!(benches, spectral, supra_gat);
criterion_main!(benches);
