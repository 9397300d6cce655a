//! Brute-force reference implementations and fixtures shared by the
//! integration tests and the acceptance suite.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rdbgnn::encode::{DatabaseEncoders, EncodedTable};
use rdbgnn::graph::{database_to_graph, EdgeType, GraphSchema, NodeId};
use rdbgnn::models::{GraphBatch, Model, ModelConfig, NodeInputs, Variant};
use rdbgnn::rdb::{remove_target_column, CellValue, ColumnKind, ColumnSpec, Database, Table};
use rdbgnn::rng;
use rdbgnn::sampler::{batch_sample, Datapoint, SampleOptions};
use rdbgnn::synth::{generate, random_database, Signal, SynthSpec, Template};
use rdbgnn::tensor::{gradcheck, Tape, Tensor, Var, GRADCHECK_STEP};

/// Forward edge as (referencing row, referenced row, (table, fk column)).
pub type FkEdge = (NodeId, NodeId, (usize, usize));

/// Primary-key lookup built from raw cell strings, independent of the loader's resolution.
fn key_lookup(db: &Database) -> Vec<(usize, usize, usize, HashMap<String, usize>)> {
    let mut out = Vec::new();
    for (t, table) in db.tables().iter().enumerate() {
        for (c, col) in table.columns.iter().enumerate() {
            let ColumnKind::ForeignKey(r) = &col.kind else { continue };
            let rt = db.table_index(&r.table).unwrap();
            let rc = db.table(rt).column_index(&r.column).unwrap();
            let map = db
                .table(rt)
                .rows
                .iter()
                .enumerate()
                .filter_map(|(i, row)| match &row[rc] {
                    CellValue::Key(k) => Some((k.clone(), i)),
                    _ => None,
                })
                .collect();
            out.push((t, c, rt, map));
        }
    }
    out
}

/// Every forward FK edge of the database.
pub fn all_fk_edges(db: &Database) -> Vec<FkEdge> {
    let mut edges = Vec::new();
    for (t, c, rt, map) in key_lookup(db) {
        for (r, row) in db.table(t).rows.iter().enumerate() {
            if let CellValue::Key(k) = &row[c] {
                if let Some(&p) = map.get(k) {
                    edges.push((NodeId::new(t, r), NodeId::new(rt, p), (t, c)));
                }
            }
        }
    }
    edges.sort();
    edges
}

/// Fixpoint selection: absorb referencing rows until stable, then referenced rows until stable.
pub fn closure_oracle(db: &Database, target: NodeId) -> BTreeSet<NodeId> {
    let edges = all_fk_edges(db);
    let mut set = BTreeSet::from([target]);
    loop {
        let before = set.len();
        for (src, dst, _) in &edges {
            if set.contains(dst) {
                set.insert(*src);
            }
        }
        if set.len() == before {
            break;
        }
    }
    loop {
        let before = set.len();
        for (src, dst, _) in &edges {
            if set.contains(src) {
                set.insert(*dst);
            }
        }
        if set.len() == before {
            break;
        }
    }
    set
}

pub fn induced_edges(db: &Database, set: &BTreeSet<NodeId>) -> Vec<FkEdge> {
    all_fk_edges(db).into_iter().filter(|(s, d, _)| set.contains(s) && set.contains(d)).collect()
}

pub fn datapoint_fk_edges(dp: &Datapoint) -> Vec<FkEdge> {
    let mut e: Vec<FkEdge> = dp
        .forward_edges()
        .map(|e| match e.edge_type {
            EdgeType::Forward { table, column } => (dp.nodes[e.src], dp.nodes[e.dst], (table, column)),
            _ => unreachable!(),
        })
        .collect();
    e.sort();
    e
}

/// O(P·N) AUROC: the share of positive/negative pairs ranked correctly, ties counting one half.
pub fn pairwise_auroc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut total = 0.0;
    let mut pairs = 0usize;
    for (i, &l1) in labels.iter().enumerate() {
        if l1 != 1 {
            continue;
        }
        for (j, &l0) in labels.iter().enumerate() {
            if l0 != 0 {
                continue;
            }
            pairs += 1;
            if scores[i] > scores[j] {
                total += 1.0;
            } else if scores[i] == scores[j] {
                total += 0.5;
            }
        }
    }
    total / pairs as f64
}

/// Per parent row: number of child rows pointing at it and the sum of their non-null `value` cells.
pub fn group_by(db: &Database, child: usize, fk_column: usize, value: usize) -> Vec<(usize, Option<f64>)> {
    let ColumnKind::ForeignKey(r) = &db.table(child).columns[fk_column].kind else { panic!("not a foreign key") };
    let parent = db.table_index(&r.table).unwrap();
    let pk = db.table(parent).column_index(&r.column).unwrap();
    let mut out = vec![(0, None); db.table(parent).len()];
    for (p, prow) in db.table(parent).rows.iter().enumerate() {
        let CellValue::Key(key) = &prow[pk] else { continue };
        for crow in &db.table(child).rows {
            if crow[fk_column] == CellValue::Key(key.clone()) {
                out[p].0 += 1;
                if let CellValue::Scalar(x) = crow[value] {
                    out[p].1 = Some(out[p].1.unwrap_or(0.0) + x);
                }
            }
        }
    }
    out
}

/// Patient (2 rows) and Visit (3 rows, every visit pointing at a patient).
pub fn patient_visit(null_fk: bool) -> Database {
    let mut patient = Table::new(
        "Patient",
        vec![ColumnSpec::new("id", ColumnKind::PrimaryKey), ColumnSpec::new("age", ColumnKind::Scalar), ColumnSpec::target("label")],
    );
    patient.rows = vec![
        vec![CellValue::Key("p1".into()), CellValue::Scalar(40.0), CellValue::Categorical("1".into())],
        vec![CellValue::Key("p2".into()), CellValue::Scalar(55.0), CellValue::Categorical("0".into())],
    ];
    let mut visit = Table::new(
        "Visit",
        vec![
            ColumnSpec::new("id", ColumnKind::PrimaryKey),
            ColumnSpec::foreign_key("patient_id", "Patient", "id"),
            ColumnSpec::new("cost", ColumnKind::Scalar),
        ],
    );
    let third = if null_fk { CellValue::Null } else { CellValue::Key("p2".into()) };
    visit.rows = vec![
        vec![CellValue::Key("v1".into()), CellValue::Key("p1".into()), CellValue::Scalar(10.0)],
        vec![CellValue::Key("v2".into()), CellValue::Key("p1".into()), CellValue::Scalar(30.0)],
        vec![CellValue::Key("v3".into()), third, CellValue::Scalar(5.0)],
    ];
    Database::new(vec![patient, visit], true).unwrap()
}

/// Sampled, encoded datapoints ready for model evaluation.
pub struct ModelFixture {
    pub db: Database,
    pub schema: GraphSchema,
    pub datapoints: Vec<Datapoint>,
    pub features: Vec<EncodedTable>,
    pub inputs: Vec<NodeInputs>,
}

impl ModelFixture {
    /// Alternates random schemas (self references, null keys) with the synthetic templates.
    pub fn new(seed: u64) -> ModelFixture {
        let db = match seed % 4 {
            0 => generate(&SynthSpec::new(Template::ThreeLevel, Signal::GrandchildAggregate, 6, seed).with_noise(0.1)).unwrap(),
            1 => generate(&SynthSpec::new(Template::ParentChild, Signal::ChildAggregate, 8, seed)).unwrap(),
            _ => random_database(seed, 4, 12),
        };
        Self::from_database(db)
    }

    pub fn from_database(db: Database) -> ModelFixture {
        let masked = remove_target_column(&db).unwrap();
        let target = masked.target();
        let graph = database_to_graph(&db);
        let rows: Vec<usize> = (0..db.table(target.table).len()).collect();
        let datapoints = batch_sample(&graph, target.table, &rows, masked.labels(), &SampleOptions::default()).unwrap();
        let all: Vec<Vec<usize>> = db.tables().iter().map(|t| (0..t.len()).collect()).collect();
        let encoders = DatabaseEncoders::fit(&masked, &all, Some((target.table, target.column)));
        let features = encoders.encode_all(&masked).unwrap();
        let inputs = NodeInputs::from_encoders(&encoders);
        let schema = graph.schema().clone();
        drop(masked);
        ModelFixture { db, schema, datapoints, features, inputs }
    }

    pub fn model(&self, variant: Variant, hidden: usize, seed: u64) -> Model {
        Model::new(ModelConfig::new(variant).with_hidden(hidden), self.inputs.clone(), self.schema.clone(), seed)
    }

    pub fn logits(&self, model: &Model, datapoints: &[&Datapoint]) -> Tensor {
        model.logits(&GraphBatch::new(datapoints, &self.features, &self.schema)).unwrap()
    }
}

pub fn max_abs_diff(a: &Tensor, b: &Tensor) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub const OPS: [&str; 22] = [
    "matmul", "add", "add_row", "mul", "mul_col", "scale", "concat_cols", "concat_rows", "slice_cols", "gather_rows",
    "embedding_lookup", "relu", "leaky_relu", "elu", "sigmoid", "tanh", "log_softmax", "segment_sum", "segment_mean",
    "segment_softmax", "cross_entropy", "mean",
];

/// Entries in ±[0.05, 1.5] so that no probe crosses the kink at zero.
pub fn tensor(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Tensor {
    let data = (0..r * c)
        .map(|_| {
            let x: f64 = rng.random_range(0.05..1.5);
            if rng.random::<bool>() { x } else { -x }
        })
        .collect();
    Tensor::new(vec![r, c], data)
}

/// Segment ids covering every segment at least once.
fn segments(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    (0..n).map(|i| if i < k { i } else { rng.random_range(0..k) }).collect()
}

/// Reduces an op's output with fixed random weights so every output entry matters.
fn weighted(tape: &mut Tape, out: Var, w: &Tensor) -> rdbgnn::tensor::Result<Var> {
    let wv = tape.constant(w.clone());
    let p = tape.mul(out, wv)?;
    Ok(tape.sum(p))
}

/// Gradcheck error of one tape op on random kink-free inputs.
pub fn op_gradcheck(op: &str, seed: u64) -> f64 {
    let mut rng = rng::stream(seed, 99);
    let (n, m, k) = (rng.random_range(2..6), rng.random_range(1..5), rng.random_range(1..4));
    let a = tensor(&mut rng, n, m);
    let ids = segments(&mut rng, n, k.min(n));
    let idx: Vec<usize> = (0..rng.random_range(1..7)).map(|_| rng.random_range(0..n)).collect();
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..m.max(2))).collect();
    let start = rng.random_range(0..m);
    let len = rng.random_range(1..=m - start);
    let (inputs, out_shape): (Vec<Tensor>, (usize, usize)) = match op {
        "matmul" => (vec![a.clone(), tensor(&mut rng, m, k)], (n, k)),
        "add" | "mul" => (vec![a.clone(), tensor(&mut rng, n, m)], (n, m)),
        "add_row" => (vec![a.clone(), tensor(&mut rng, 1, m)], (n, m)),
        "mul_col" => (vec![a.clone(), tensor(&mut rng, n, 1)], (n, m)),
        "concat_cols" => (vec![a.clone(), tensor(&mut rng, n, k)], (n, m + k)),
        "concat_rows" => (vec![a.clone(), tensor(&mut rng, k, m)], (n + k, m)),
        "slice_cols" => (vec![a.clone()], (n, len)),
        "gather_rows" | "embedding_lookup" => (vec![a.clone()], (idx.len(), m)),
        "segment_sum" | "segment_mean" => (vec![a.clone()], (k.min(n), m)),
        "cross_entropy" => (vec![tensor(&mut rng, n, m.max(2))], (1, 1)),
        "mean" => (vec![a.clone()], (1, 1)),
        _ => (vec![a.clone()], (n, m)),
    };
    let w = tensor(&mut rng, out_shape.0, out_shape.1);
    let segs = k.min(n);
    let f = |t: &mut Tape, v: &[Var]| {
        let out = match op {
            "matmul" => t.matmul(v[0], v[1])?,
            "add" => t.add(v[0], v[1])?,
            "add_row" => t.add_row(v[0], v[1])?,
            "mul" => t.mul(v[0], v[1])?,
            "mul_col" => t.mul_col(v[0], v[1])?,
            "scale" => t.scale(v[0], -1.7),
            "concat_cols" => t.concat_cols(&[v[0], v[1]])?,
            "concat_rows" => t.concat_rows(&[v[0], v[1]])?,
            "slice_cols" => t.slice_cols(v[0], start, len)?,
            "gather_rows" => t.gather_rows(v[0], &idx)?,
            "embedding_lookup" => t.embedding_lookup(v[0], &idx)?,
            "relu" => t.relu(v[0]),
            "leaky_relu" => t.leaky_relu(v[0], 0.2),
            "elu" => t.elu(v[0]),
            "sigmoid" => t.sigmoid(v[0]),
            "tanh" => t.tanh(v[0]),
            "log_softmax" => t.log_softmax(v[0]),
            "segment_sum" => t.segment_sum(v[0], &ids, segs)?,
            "segment_mean" => t.segment_mean(v[0], &ids, segs)?,
            "segment_softmax" => t.segment_softmax(v[0], &ids, segs)?,
            "cross_entropy" => t.cross_entropy(v[0], &labels)?,
            "mean" => t.mean(v[0]),
            other => panic!("unknown op {other}"),
        };
        weighted(t, out, &w)
    };
    gradcheck(f, &inputs, GRADCHECK_STEP).unwrap()
}
