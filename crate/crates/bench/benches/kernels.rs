//! Hot-path timings: masked propagation, the training step, a single
//! explained node, AUC scoring, stationary distribution, and spectral
//! entropy. Sample sizes are trimmed because several kernels run in the
//! tens of milliseconds on desk hardware.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ndarray::Array2;
use rand::Rng;

use dgx_core::datagen::{ba_shapes, random_digraph};
use dgx_core::eval::explanation_auc;
use dgx_core::explain::{gnn_explainer, topk_edges, Explanation, ExplainerConfig, ExplainerKind};
use dgx_core::graph::EdgeSet;
use dgx_core::nn::{design_matrix, loss_and_grads, GcnModel, ModelConfig};
use dgx_core::preprocess::{
    entropy_gap, pagerank_transition, prepare, stationary_distribution, Pipeline,
};
use dgx_core::rng::stream;

fn synthetic_explanation(n_edges: usize, seed: u64) -> Explanation {
    let mut rng = stream(seed, "bench-scores");
    Explanation {
        v: 0,
        candidates: (0..n_edges).collect(),
        // Coarse quantization forces tie handling into the timing.
        importance: (0..n_edges).map(|_| (rng.gen::<f64>() * 8.0).floor() / 8.0).collect(),
        feature_importance: None,
        explainer: ExplainerKind::Gnn,
        config_hash: "bench".into(),
        seed,
    }
}

fn bench_apply_masked(c: &mut Criterion) {
    let ds = ba_shapes(0);
    let mut group = c.benchmark_group("apply_masked");
    group.sample_size(20);
    for pipeline in [Pipeline::Symm, Pipeline::LapNorm] {
        let prep = prepare(&ds.graph, pipeline, 0.1).unwrap();
        let mult = vec![0.5; prep.graph.edge_count()];
        let h = Array2::<f64>::ones((prep.graph.n(), 20));
        group.bench_function(pipeline.name(), |b| {
            b.iter(|| prep.matrix.apply_masked(std::hint::black_box(&mult), &h.view()))
        });
    }
    group.finish();
}

fn bench_training_step(c: &mut Criterion) {
    let ds = ba_shapes(0);
    let prep = prepare(&ds.graph, Pipeline::LapNorm, 0.1).unwrap();
    let x = design_matrix(&prep.graph);
    let model = GcnModel::init(
        ModelConfig {
            input_dim: x.ncols(),
            hidden: 20,
            layers: 3,
            num_classes: ds.num_classes,
        },
        0,
    );
    let nodes: Vec<usize> = (0..ds.graph.n()).filter(|&v| ds.split.train[v]).collect();
    let mut group = c.benchmark_group("training_step");
    group.sample_size(20);
    group.bench_function("loss_and_grads", |b| {
        b.iter(|| {
            loss_and_grads(&model, &prep.matrix, &x.view(), ds.graph.labels(), &nodes, None)
                .unwrap()
        })
    });
    group.finish();
}

fn bench_explain_node(c: &mut Criterion) {
    let ds = ba_shapes(0);
    let prep = prepare(&ds.graph, Pipeline::LapNorm, 0.1).unwrap();
    let x = design_matrix(&prep.graph);
    let model = GcnModel::init(
        ModelConfig {
            input_dim: x.ncols(),
            hidden: 20,
            layers: 3,
            num_classes: ds.num_classes,
        },
        0,
    );
    // A motif node: the interesting case, with a non-trivial candidate set.
    let first_gt = *ds.graph.ground_truth().unwrap().iter().next().unwrap();
    let v = ds.graph.edges()[first_gt].0;
    let mut cfg = ExplainerConfig::gnn_defaults();
    cfg.epochs = 10;
    let mut group = c.benchmark_group("explain_node");
    group.sample_size(10);
    group.bench_function("gnn_10_epochs", |b| {
        b.iter(|| gnn_explainer(&model, &prep, v, &cfg, "bench").unwrap())
    });
    group.finish();
}

fn bench_auc(c: &mut Criterion) {
    let n_edges = 4000;
    let expl = synthetic_explanation(n_edges, 7);
    let mut rng = stream(7, "bench-auc-labels");
    let mut gt = EdgeSet::new();
    for e in 0..n_edges {
        if rng.gen::<f64>() < 0.1 {
            gt.insert(e);
        }
    }
    c.bench_function("explanation_auc_4000_edges", |b| {
        b.iter(|| explanation_auc(std::hint::black_box(&expl), &gt, None, false))
    });
}

fn bench_stationary_distribution(c: &mut Criterion) {
    let ds = ba_shapes(0);
    let p = pagerank_transition(&ds.graph, 0.1).unwrap();
    let mut group = c.benchmark_group("stationary_distribution");
    group.sample_size(20);
    group.bench_function("ba_shapes", |b| {
        b.iter(|| stationary_distribution(std::hint::black_box(&p), 0.1).unwrap())
    });
    group.finish();
}

fn bench_entropy(c: &mut Criterion) {
    let mut group = c.benchmark_group("entropy_gap");
    group.sample_size(10);
    for n in [50usize, 150] {
        let g = random_digraph(n, 0.2, 3);
        group.bench_with_input(BenchmarkId::from_parameter(n), &g, |b, g| {
            b.iter(|| entropy_gap(std::hint::black_box(g), 0.1).unwrap())
        });
    }
    group.finish();
}

fn bench_topk(c: &mut Criterion) {
    let ds = ba_shapes(0);
    let expl = synthetic_explanation(ds.graph.edge_count(), 9);
    c.bench_function("topk_edges", |b| {
        b.iter(|| topk_edges(std::hint::black_box(&expl), 12))
    });
}

criterion_group!(
    benches,
    bench_apply_masked,
    bench_training_step,
    bench_explain_node,
    bench_auc,
    bench_stationary_distribution,
    bench_entropy,
    bench_topk
);
criterion_main!(benches);
