use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rdbgnn::encode::DatabaseEncoders;
use rdbgnn::graph::database_to_graph;
use rdbgnn::models::{GraphBatch, Model, ModelConfig, NodeInputs, Variant};
use rdbgnn::rdb::remove_target_column;
use rdbgnn::rng;
use rdbgnn::sampler::{batch_sample, Datapoint, SampleOptions};
use rdbgnn::synth::{generate, Signal, SynthSpec, Template};
use rdbgnn::tensor::{Tape, Tensor};

fn matmul(c: &mut Criterion) {
    let a = Tensor::new(vec![256, 64], (0..256 * 64).map(|i| (i % 17) as f64 / 17.0).collect());
    let w = Tensor::new(vec![64, 64], (0..64 * 64).map(|i| (i % 13) as f64 / 13.0 - 0.5).collect());
    c.bench_function("matmul_256x64x64_backward", |b| {
        b.iter(|| {
            let mut t = Tape::new();
            let (x, y) = (t.constant(a.clone()), t.param(w.clone()));
            let z = t.matmul(x, y).unwrap();
            let s = t.sum(z);
            t.backward(s).unwrap();
            black_box(t.grad(y))
        })
    });
}

fn model_step(c: &mut Criterion) {
    let db = generate(&SynthSpec::new(Template::ParentChild, Signal::ChildAggregate, 64, 1)).unwrap();
    let masked = remove_target_column(&db).unwrap();
    let graph = database_to_graph(&db);
    let rows: Vec<usize> = (0..64).collect();
    let datapoints = batch_sample(&graph, 0, &rows, masked.labels(), &SampleOptions::default()).unwrap();
    let all: Vec<Vec<usize>> = db.tables().iter().map(|t| (0..t.len()).collect()).collect();
    let encoders = DatabaseEncoders::fit(&masked, &all, Some((0, masked.target().column)));
    let features = encoders.encode_all(&masked).unwrap();
    let refs: Vec<&Datapoint> = datapoints.iter().collect();
    let mut group = c.benchmark_group("train_step_64");
    for v in [Variant::Gcn, Variant::Gin, Variant::Ergat] {
        let model = Model::new(ModelConfig::new(v), NodeInputs::from_encoders(&encoders), graph.schema().clone(), 1);
        let batch = GraphBatch::new(&refs, &features, model.schema());
        let labels = batch.class_labels();
        group.bench_function(v.name(), |b| {
            b.iter(|| {
                let mut tape = Tape::new();
                let bind = model.params.bind(&mut tape);
                let logits = model.forward(&mut tape, &bind, &batch, true, &mut rng::stream(0, 0)).unwrap();
                let loss = tape.cross_entropy(logits, &labels).unwrap();
                tape.backward(loss).unwrap();
                black_box(bind.grads(&tape))
            })
        });
    }
    group.finish();
}

criterion_group!(benches, matmul, model_step);
criterion_main!(benches);
