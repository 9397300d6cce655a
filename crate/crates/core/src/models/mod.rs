//! Message-passing models over sampled subgraphs.
//!
//! Homogeneous variants (GCN, GIN, GAT) share one set of layer weights across
//! all edge and node types. ER variants key message weights on edge type and
//! update weights on node type; tying them recovers the homogeneous model.

mod batch;

pub use batch::{GraphBatch, TypeBlock};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::encode::{embedding_dim, DatabaseEncoders};
use crate::graph::{EdgeType, GraphSchema};
use crate::rng;
use crate::tensor::{Binding, ParamId, ParamStore, Result, Tape, Tensor, TensorError, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Gcn,
    Gin,
    Gat,
    Ergcn,
    Ergin,
    Ergat,
    Poolmlp,
}

impl Variant {
    pub const ALL: [Variant; 7] =
        [Variant::Gcn, Variant::Gin, Variant::Gat, Variant::Ergcn, Variant::Ergin, Variant::Ergat, Variant::Poolmlp];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Gcn => "gcn",
            Variant::Gin => "gin",
            Variant::Gat => "gat",
            Variant::Ergcn => "ergcn",
            Variant::Ergin => "ergin",
            Variant::Ergat => "ergat",
            Variant::Poolmlp => "poolmlp",
        }
    }

    pub fn parse(s: &str) -> Option<Variant> {
        Variant::ALL.into_iter().find(|v| v.name() == s)
    }

    pub fn is_er(self) -> bool {
        matches!(self, Variant::Ergcn | Variant::Ergin | Variant::Ergat)
    }

    /// The homogeneous counterpart of an ER variant.
    pub fn homogeneous(self) -> Variant {
        match self {
            Variant::Ergcn => Variant::Gcn,
            Variant::Ergin => Variant::Gin,
            Variant::Ergat => Variant::Gat,
            v => v,
        }
    }

    pub fn default_rounds(self) -> usize {
        match self {
            Variant::Gcn | Variant::Ergcn => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: Variant,
    pub hidden: usize,
    pub rounds: usize,
    pub dropout: f64,
    pub heads: usize,
    pub gin_eps: f64,
    pub train_eps: bool,
    pub classes: usize,
}

impl ModelConfig {
    pub fn new(variant: Variant) -> ModelConfig {
        ModelConfig {
            variant,
            hidden: 32,
            rounds: variant.default_rounds(),
            dropout: 0.5,
            heads: 1,
            gin_eps: 0.0,
            train_eps: false,
            classes: 2,
        }
    }

    pub fn with_hidden(mut self, hidden: usize) -> ModelConfig {
        self.hidden = hidden;
        self
    }

    pub fn with_dropout(mut self, p: f64) -> ModelConfig {
        self.dropout = p;
        self
    }
}

/// Input widths of one node type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeInputs {
    pub name: String,
    pub dense_width: usize,
    /// Embedding-table rows per categorical column (vocabulary plus reserved index).
    pub categorical: Vec<usize>,
}

impl NodeInputs {
    pub fn from_encoders(encoders: &DatabaseEncoders) -> Vec<NodeInputs> {
        encoders
            .tables
            .iter()
            .map(|t| NodeInputs {
                name: t.table.clone(),
                dense_width: t.dense_width(),
                categorical: t.categorical().map(|(_, c)| c.num_indices()).collect(),
            })
            .collect()
    }

    /// Dense width plus every embedding width.
    pub fn concat_width(&self) -> usize {
        self.dense_width + self.categorical.iter().map(|&n| embedding_dim(n - 1)).sum::<usize>()
    }
}

#[derive(Debug, Clone)]
enum Initializer {
    Mlp { embeddings: Vec<Option<ParamId>>, w1: ParamId, b1: ParamId, w2: ParamId, b2: ParamId },
    Constant(ParamId),
}

#[derive(Debug, Clone)]
enum Eps {
    Fixed(f64),
    Trainable(ParamId),
}

#[derive(Debug, Clone)]
enum Layer {
    Gcn { w: Vec<ParamId>, b: Vec<ParamId> },
    Gin { w1: Vec<ParamId>, b1: Vec<ParamId>, w2: Vec<ParamId>, b2: Vec<ParamId>, eps: Eps },
    Gat { w: Vec<ParamId>, a_src: Vec<Vec<ParamId>>, a_dst: Vec<Vec<ParamId>>, b: Vec<ParamId> },
}

#[derive(Debug, Clone)]
enum Head {
    Readout { gate_w: ParamId, gate_b: ParamId, proj_w: ParamId, proj_b: ParamId, out_w: ParamId, out_b: ParamId },
    Pool { w1: ParamId, b1: ParamId, w2: ParamId, b2: ParamId },
}

#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ParamStore,
    inputs: Vec<NodeInputs>,
    schema: GraphSchema,
    init: Vec<Initializer>,
    layers: Vec<Layer>,
    head: Head,
}

fn linear(store: &mut ParamStore, name: &str, fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> (ParamId, ParamId) {
    (store.add_xavier(format!("{name}.w"), fan_in, fan_out, rng), store.add_zeros(format!("{name}.b"), 1, fan_out))
}

/// Edge groups that share message parameters.
struct EdgeGroup {
    key: usize,
    edges: Vec<usize>,
}

impl Model {
    pub fn new(config: ModelConfig, inputs: Vec<NodeInputs>, schema: GraphSchema, seed: u64) -> Model {
        assert!(config.hidden > 0, "hidden width must be positive");
        assert!(config.hidden.is_multiple_of(config.heads.max(1)), "hidden width must divide into heads");
        let mut rng = rng::stream(seed, rng::streams::INIT);
        let mut p = ParamStore::new();
        let d = config.hidden;

        let init = inputs
            .iter()
            .map(|t| {
                let width = t.concat_width();
                if width == 0 {
                    return Initializer::Constant(p.add_embedding(format!("init.{}.const", t.name), 1, d, &mut rng));
                }
                let embeddings = t
                    .categorical
                    .iter()
                    .enumerate()
                    .map(|(c, &rows)| {
                        let dim = embedding_dim(rows - 1);
                        (dim > 0).then(|| p.add_embedding(format!("init.{}.emb{c}", t.name), rows, dim, &mut rng))
                    })
                    .collect();
                let (w1, b1) = linear(&mut p, &format!("init.{}.l1", t.name), width, 4 * width, &mut rng);
                let (w2, b2) = linear(&mut p, &format!("init.{}.l2", t.name), 4 * width, d, &mut rng);
                Initializer::Mlp { embeddings, w1, b1, w2, b2 }
            })
            .collect();

        let edge_keys: Vec<String> = if config.variant.is_er() {
            schema.edge_types().iter().map(|&et| format!("[{}]", schema.edge_type_name(et))).collect()
        } else {
            vec![String::new()]
        };
        let node_keys: Vec<String> = if config.variant.is_er() {
            schema.node_types.iter().map(|n| format!("[{n}]")).collect()
        } else {
            vec![String::new()]
        };
        let rounds = if config.variant == Variant::Poolmlp { 0 } else { config.rounds };
        let heads = config.heads.max(1);
        let dh = d / heads;
        let mut layers = Vec::with_capacity(rounds);
        for r in 0..rounds {
            let pre = format!("layer{r}");
            let per = |p: &mut ParamStore, keys: &[String], name: &str, rows: usize, cols: usize, rng: &mut rand_chacha::ChaCha8Rng| -> Vec<ParamId> {
                keys.iter()
                    .map(|k| {
                        let full = format!("{pre}.{name}{k}");
                        if name.starts_with('b') {
                            p.add_zeros(full, rows, cols)
                        } else {
                            p.add_xavier(full, rows, cols, rng)
                        }
                    })
                    .collect()
            };
            let layer = match config.variant.homogeneous() {
                Variant::Gcn => Layer::Gcn {
                    w: per(&mut p, &edge_keys, "w", d, d, &mut rng),
                    b: per(&mut p, &node_keys, "b", 1, d, &mut rng),
                },
                Variant::Gin => {
                    let w1 = per(&mut p, &edge_keys, "w1", d, d, &mut rng);
                    let b1 = per(&mut p, &node_keys, "b1", 1, d, &mut rng);
                    let w2 = per(&mut p, &node_keys, "w2", d, d, &mut rng);
                    let b2 = per(&mut p, &node_keys, "b2", 1, d, &mut rng);
                    let eps = if config.train_eps {
                        Eps::Trainable(p.add(format!("{pre}.eps"), Tensor::scalar(config.gin_eps)))
                    } else {
                        Eps::Fixed(config.gin_eps)
                    };
                    Layer::Gin { w1, b1, w2, b2, eps }
                }
                Variant::Gat => {
                    let w = per(&mut p, &edge_keys, "w", d, d, &mut rng);
                    let mut a_src = vec![Vec::new(); edge_keys.len()];
                    let mut a_dst = vec![Vec::new(); edge_keys.len()];
                    for h in 0..heads {
                        for (k, ids) in per(&mut p, &edge_keys, &format!("att_src{h}"), dh, 1, &mut rng).into_iter().enumerate() {
                            a_src[k].push(ids);
                        }
                        for (k, ids) in per(&mut p, &edge_keys, &format!("att_dst{h}"), dh, 1, &mut rng).into_iter().enumerate() {
                            a_dst[k].push(ids);
                        }
                    }
                    Layer::Gat { w, a_src, a_dst, b: per(&mut p, &node_keys, "b", 1, d, &mut rng) }
                }
                _ => unreachable!("pool model has no layers"),
            };
            layers.push(layer);
        }

        let head = if config.variant == Variant::Poolmlp {
            let (w1, b1) = linear(&mut p, "pool.l1", d, d, &mut rng);
            let (w2, b2) = linear(&mut p, "pool.l2", d, config.classes, &mut rng);
            Head::Pool { w1, b1, w2, b2 }
        } else {
            let (gate_w, gate_b) = linear(&mut p, "readout.gate", d, d, &mut rng);
            let (proj_w, proj_b) = linear(&mut p, "readout.proj", d, d, &mut rng);
            let (out_w, out_b) = linear(&mut p, "readout.out", d, config.classes, &mut rng);
            Head::Readout { gate_w, gate_b, proj_w, proj_b, out_w, out_b }
        };

        Model { config, params: p, inputs, schema, init, layers, head }
    }

    pub fn inputs(&self) -> &[NodeInputs] {
        &self.inputs
    }

    pub fn schema(&self) -> &GraphSchema {
        &self.schema
    }

    /// Replaces parameters with a loaded set; names and shapes must match.
    pub fn load_params(&mut self, params: ParamStore) -> std::result::Result<(), String> {
        if params.len() != self.params.len() {
            return Err(format!("expected {} tensors, found {}", self.params.len(), params.len()));
        }
        for ((n1, t1), (n2, t2)) in self.params.iter().zip(params.iter()) {
            if n1 != n2 || t1.shape() != t2.shape() {
                return Err(format!("parameter {n1}{:?} does not match {n2}{:?}", t1.shape(), t2.shape()));
            }
        }
        self.params = params;
        Ok(())
    }

    /// Copies every parameter from `other`, mapping per-type names `x[type]` to `x`.
    pub fn tie_from(&mut self, other: &Model) -> std::result::Result<(), String> {
        let ids: Vec<ParamId> = self.params.ids().collect();
        for id in ids {
            let name = self.params.name(id);
            let base = name.split('[').next().unwrap_or(name);
            let src = other.params.find(base).ok_or_else(|| format!("no parameter {base}"))?;
            let value = other.params.get(src).clone();
            if value.shape() != self.params.get(id).shape() {
                return Err(format!("shape mismatch for {name}"));
            }
            *self.params.get_mut(id) = value;
        }
        Ok(())
    }

    /// Class logits `[num_graphs, classes]`.
    pub fn forward(&self, tape: &mut Tape, bind: &Binding, batch: &GraphBatch, train: bool, rng: &mut impl Rng) -> Result<Var> {
        let mut h = self.init_hidden(tape, bind, batch)?;
        for layer in &self.layers {
            h = match layer {
                Layer::Gcn { w, b } => self.gcn(tape, bind, batch, h, w, b)?,
                Layer::Gin { w1, b1, w2, b2, eps } => self.gin(tape, bind, batch, h, (w1, b1, w2, b2), eps)?,
                Layer::Gat { w, a_src, a_dst, b } => self.gat(tape, bind, batch, h, w, a_src, a_dst, b)?,
            };
            h = tape.dropout(h, self.config.dropout, train, rng);
        }
        self.head_logits(tape, bind, batch, h, train, rng)
    }

    fn head_logits(&self, tape: &mut Tape, bind: &Binding, batch: &GraphBatch, h: Var, train: bool, rng: &mut impl Rng) -> Result<Var> {
        match &self.head {
            Head::Readout { gate_w, gate_b, proj_w, proj_b, out_w, out_b } => {
                let g = tape.matmul(h, bind[*gate_w])?;
                let g = tape.add_row(g, bind[*gate_b])?;
                let g = tape.sigmoid(g);
                let p = tape.matmul(h, bind[*proj_w])?;
                let p = tape.add_row(p, bind[*proj_b])?;
                let gp = tape.mul(g, p)?;
                let r = tape.segment_sum(gp, &batch.graph_of, batch.num_graphs)?;
                let logits = tape.matmul(r, bind[*out_w])?;
                tape.add_row(logits, bind[*out_b])
            }
            Head::Pool { w1, b1, w2, b2 } => {
                let m = tape.segment_mean(h, &batch.graph_of, batch.num_graphs)?;
                let x = tape.matmul(m, bind[*w1])?;
                let x = tape.add_row(x, bind[*b1])?;
                let x = tape.relu(x);
                let x = tape.dropout(x, self.config.dropout, train, rng);
                let x = tape.matmul(x, bind[*w2])?;
                tape.add_row(x, bind[*b2])
            }
        }
    }

    /// Evaluation-mode class probabilities of the positive class.
    pub fn predict(&self, batch: &GraphBatch) -> Result<Vec<f64>> {
        let logits = self.logits(batch)?;
        Ok((0..logits.rows()).map(|r| positive_probability(logits.row(r))).collect())
    }

    pub fn logits(&self, batch: &GraphBatch) -> Result<Tensor> {
        let mut tape = Tape::new();
        let bind = self.params.bind(&mut tape);
        let mut rng = rng::stream(0, rng::streams::DROPOUT);
        let out = self.forward(&mut tape, &bind, batch, false, &mut rng)?;
        Ok(tape.value(out).clone())
    }

    /// Initial hidden states `[num_nodes, hidden]`.
    pub fn init_hidden(&self, tape: &mut Tape, bind: &Binding, batch: &GraphBatch) -> Result<Var> {
        let mut parts = Vec::with_capacity(batch.blocks.len());
        for block in &batch.blocks {
            let n = block.positions.len();
            let spec = &self.inputs[block.node_type];
            let out = match &self.init[block.node_type] {
                Initializer::Constant(c) => tape.gather_rows(bind[*c], &vec![0; n])?,
                Initializer::Mlp { embeddings, w1, b1, w2, b2 } => {
                    if block.dense.cols() != spec.dense_width || block.categorical.len() != spec.categorical.len() {
                        return Err(TensorError::Shape {
                            op: "init_hidden",
                            left: vec![spec.dense_width, spec.categorical.len()],
                            right: vec![block.dense.cols(), block.categorical.len()],
                        });
                    }
                    let mut cols = Vec::with_capacity(1 + embeddings.len());
                    if spec.dense_width > 0 {
                        cols.push(tape.constant(block.dense.clone()));
                    }
                    for (emb, idx) in embeddings.iter().zip(&block.categorical) {
                        if let Some(e) = emb {
                            cols.push(tape.embedding_lookup(bind[*e], idx)?);
                        }
                    }
                    let x = if cols.len() == 1 { cols[0] } else { tape.concat_cols(&cols)? };
                    let x = tape.matmul(x, bind[*w1])?;
                    let x = tape.add_row(x, bind[*b1])?;
                    let x = tape.relu(x);
                    let x = tape.matmul(x, bind[*w2])?;
                    tape.add_row(x, bind[*b2])?
                }
            };
            parts.push(out);
        }
        let stacked = if parts.len() == 1 { parts[0] } else { tape.concat_rows(&parts)? };
        if parts.len() == 1 {
            return Ok(stacked);
        }
        tape.gather_rows(stacked, &batch.block_row)
    }

    fn edge_groups(&self, batch: &GraphBatch, skip_self: bool) -> Vec<EdgeGroup> {
        let self_loop = |t: usize| t >= 2 * self.schema.fks.len();
        let keep = |k: &usize| !(skip_self && self_loop(batch.edges[*k].2));
        if !self.config.variant.is_er() {
            return vec![EdgeGroup { key: 0, edges: (0..batch.edges.len()).filter(keep).collect() }];
        }
        let mut groups: Vec<EdgeGroup> =
            (0..self.schema.num_edge_types()).map(|key| EdgeGroup { key, edges: Vec::new() }).collect();
        for k in (0..batch.edges.len()).filter(keep) {
            groups[batch.edges[k].2].edges.push(k);
        }
        groups.retain(|g| !g.edges.is_empty());
        groups
    }

    /// `x W_k + b_k` with `k` the node-type key of each row.
    fn node_linear(&self, tape: &mut Tape, bind: &Binding, batch: &GraphBatch, x: Var, w: &[ParamId], b: Option<&[ParamId]>) -> Result<Var> {
        let apply = |tape: &mut Tape, x: Var, k: usize| -> Result<Var> {
            let y = tape.matmul(x, bind[w[k]])?;
            match b {
                Some(b) => tape.add_row(y, bind[b[k]]),
                None => Ok(y),
            }
        };
        if !self.config.variant.is_er() {
            return apply(tape, x, 0);
        }
        let mut parts = Vec::with_capacity(batch.blocks.len());
        for block in &batch.blocks {
            let xb = tape.gather_rows(x, &block.positions)?;
            parts.push(apply(tape, xb, block.node_type)?);
        }
        let stacked = tape.concat_rows(&parts)?;
        tape.gather_rows(stacked, &batch.block_row)
    }

    /// Adds the node-type bias of each row.
    fn node_bias(&self, tape: &mut Tape, bind: &Binding, batch: &GraphBatch, x: Var, b: &[ParamId]) -> Result<Var> {
        if !self.config.variant.is_er() {
            return tape.add_row(x, bind[b[0]]);
        }
        let rows: Vec<Var> = b.iter().map(|&id| bind[id]).collect();
        let table = tape.concat_rows(&rows)?;
        let per_node = tape.gather_rows(table, &batch.node_type)?;
        tape.add(x, per_node)
    }

    fn gcn(&self, tape: &mut Tape, bind: &Binding, batch: &GraphBatch, h: Var, w: &[ParamId], b: &[ParamId]) -> Result<Var> {
        let mut acc: Option<Var> = None;
        for g in self.edge_groups(batch, false) {
            let src: Vec<usize> = g.edges.iter().map(|&k| batch.edges[k].0).collect();
            let dst: Vec<usize> = g.edges.iter().map(|&k| batch.edges[k].1).collect();
            let norm: Vec<f64> = g.edges.iter().map(|&k| batch.gcn_norm(k)).collect();
            let x = tape.gather_rows(h, &src)?;
            let m = tape.matmul(x, bind[w[g.key]])?;
            let c = tape.constant(Tensor::column(&norm));
            let m = tape.mul_col(m, c)?;
            let s = tape.segment_sum(m, &dst, batch.num_nodes)?;
            acc = Some(match acc {
                Some(a) => tape.add(a, s)?,
                None => s,
            });
        }
        let z = match acc {
            Some(a) => a,
            None => tape.constant(Tensor::zeros(batch.num_nodes, self.config.hidden)),
        };
        let z = self.node_bias(tape, bind, batch, z, b)?;
        Ok(tape.relu(z))
    }

    fn gin(
        &self,
        tape: &mut Tape,
        bind: &Binding,
        batch: &GraphBatch,
        h: Var,
        (w1, b1, w2, b2): (&[ParamId], &[ParamId], &[ParamId], &[ParamId]),
        eps: &Eps,
    ) -> Result<Var> {
        let n = batch.num_nodes;
        // Self term; ER variants use the self-loop edge type's weight for each node type.
        let self_w: Vec<ParamId> = if self.config.variant.is_er() {
            (0..self.schema.node_types.len())
                .map(|t| w1[self.schema.edge_type_index(EdgeType::SelfLoop { table: t }).expect("self loop type")])
                .collect()
        } else {
            vec![w1[0]]
        };
        let mut z = self.node_linear(tape, bind, batch, h, &self_w, None)?;
        z = match eps {
            Eps::Fixed(e) => tape.scale(z, 1.0 + e),
            Eps::Trainable(id) => {
                let one = tape.constant(Tensor::scalar(1.0));
                let f = tape.add(one, bind[*id])?;
                let f = tape.gather_rows(f, &vec![0; n])?;
                tape.mul_col(z, f)?
            }
        };
        for g in self.edge_groups(batch, true) {
            let src: Vec<usize> = g.edges.iter().map(|&k| batch.edges[k].0).collect();
            let dst: Vec<usize> = g.edges.iter().map(|&k| batch.edges[k].1).collect();
            let x = tape.gather_rows(h, &src)?;
            let agg = tape.segment_sum(x, &dst, n)?;
            let m = tape.matmul(agg, bind[w1[g.key]])?;
            z = tape.add(z, m)?;
        }
        let z = self.node_bias(tape, bind, batch, z, b1)?;
        let z = tape.relu(z);
        let z = self.node_linear(tape, bind, batch, z, w2, Some(b2))?;
        Ok(tape.relu(z))
    }

    #[allow(clippy::too_many_arguments)]
    fn gat(
        &self,
        tape: &mut Tape,
        bind: &Binding,
        batch: &GraphBatch,
        h: Var,
        w: &[ParamId],
        a_src: &[Vec<ParamId>],
        a_dst: &[Vec<ParamId>],
        b: &[ParamId],
    ) -> Result<Var> {
        let n = batch.num_nodes;
        let heads = self.config.heads.max(1);
        let dh = self.config.hidden / heads;
        let mut messages = Vec::new();
        let mut logits: Vec<Vec<Var>> = vec![Vec::new(); heads];
        let mut dst_all = Vec::new();
        for g in self.edge_groups(batch, false) {
            let src: Vec<usize> = g.edges.iter().map(|&k| batch.edges[k].0).collect();
            let dst: Vec<usize> = g.edges.iter().map(|&k| batch.edges[k].1).collect();
            let xs = tape.gather_rows(h, &src)?;
            let zs = tape.matmul(xs, bind[w[g.key]])?;
            let xd = tape.gather_rows(h, &dst)?;
            let zd = tape.matmul(xd, bind[w[g.key]])?;
            for (j, lj) in logits.iter_mut().enumerate() {
                let (s, d) = if heads == 1 { (zs, zd) } else { (tape.slice_cols(zs, j * dh, dh)?, tape.slice_cols(zd, j * dh, dh)?) };
                let es = tape.matmul(s, bind[a_src[g.key][j]])?;
                let ed = tape.matmul(d, bind[a_dst[g.key][j]])?;
                lj.push(tape.add(es, ed)?);
            }
            messages.push(zs);
            dst_all.extend(dst);
        }
        if messages.is_empty() {
            let z = tape.constant(Tensor::zeros(n, self.config.hidden));
            let z = self.node_bias(tape, bind, batch, z, b)?;
            return Ok(tape.elu(z));
        }
        // Softmax segments over destinations that receive at least one edge.
        let mut compact = vec![usize::MAX; n];
        let mut next = 0;
        let seg: Vec<usize> = dst_all
            .iter()
            .map(|&d| {
                if compact[d] == usize::MAX {
                    compact[d] = next;
                    next += 1;
                }
                compact[d]
            })
            .collect();
        let m = if messages.len() == 1 { messages[0] } else { tape.concat_rows(&messages)? };
        let mut outs = Vec::with_capacity(heads);
        for (j, lj) in logits.iter().enumerate() {
            let e = if lj.len() == 1 { lj[0] } else { tape.concat_rows(lj)? };
            let e = tape.leaky_relu(e, 0.2);
            let alpha = tape.segment_softmax(e, &seg, next)?;
            let mj = if heads == 1 { m } else { tape.slice_cols(m, j * dh, dh)? };
            let weighted = tape.mul_col(mj, alpha)?;
            outs.push(tape.segment_sum(weighted, &dst_all, n)?);
        }
        let z = if outs.len() == 1 { outs[0] } else { tape.concat_cols(&outs)? };
        let z = self.node_bias(tape, bind, batch, z, b)?;
        Ok(tape.elu(z))
    }
}

/// Softmax probability of class 1 from a two-logit row.
pub fn positive_probability(logits: &[f64]) -> f64 {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = logits.iter().map(|x| (x - m).exp()).sum();
    (logits[1] - m).exp() / z
}
