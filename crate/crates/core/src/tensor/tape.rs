use rand::Rng;

use super::{matmul_into, Result, Tensor, TensorError};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    MulCol(Var, Var),
    Scale(Var, f64),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols(Var, usize),
    GatherRows(Var, Vec<usize>),
    Relu(Var),
    LeakyRelu(Var, f64),
    Elu(Var),
    Sigmoid(Var),
    Tanh(Var),
    LogSoftmax(Var),
    Dropout(Var, Vec<f64>),
    SegmentSum(Var, Vec<usize>),
    SegmentMean(Var, Vec<usize>, Vec<usize>),
    SegmentSoftmax(Var, Vec<usize>),
    CrossEntropy(Var, Vec<usize>),
    Sum(Var),
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Records operations in execution order; [`Tape::backward`] walks them in reverse.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Tensor>>,
}

fn shape_err(op: &'static str, a: &Tensor, b: &Tensor) -> TensorError {
    TensorError::Shape { op, left: a.shape().to_vec(), right: b.shape().to_vec() }
}

fn check_segments(op: &'static str, ids: &[usize], rows: usize, num_segments: usize) -> Result<Vec<usize>> {
    if ids.len() != rows {
        return Err(TensorError::Shape { op, left: vec![rows], right: vec![ids.len()] });
    }
    let mut counts = vec![0usize; num_segments];
    for &s in ids {
        if s >= num_segments {
            return Err(TensorError::Index { op, index: s, len: num_segments });
        }
        counts[s] += 1;
    }
    Ok(counts)
}

impl Tape {
    pub fn new() -> Tape {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op, requires_grad });
        self.grads.push(None);
        Var(self.nodes.len() - 1)
    }

    fn derived(&mut self, value: Tensor, op: Op, inputs: &[Var]) -> Var {
        let rg = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.push(value, op, rg)
    }

    /// A trainable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A leaf without gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Accumulated gradient; zeros when `v` was never reached.
    pub fn grad(&self, v: Var) -> Tensor {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => {
                let t = &self.nodes[v.0].value;
                Tensor::new(t.shape().to_vec(), vec![0.0; t.len()])
            }
        }
    }

    /// Smallest |input| to any recorded ReLU or leaky ReLU; infinity when there are none.
    pub fn kink_margin(&self) -> f64 {
        self.nodes
            .iter()
            .filter_map(|n| match n.op {
                Op::Relu(a) | Op::LeakyRelu(a, _) => Some(a),
                _ => None,
            })
            .flat_map(|a| self.nodes[a.0].value.data().iter().map(|x| x.abs()))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn zero_grads(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = None);
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.cols() != tb.rows() {
            return Err(shape_err("matmul", ta, tb));
        }
        let (n, k, m) = (ta.rows(), ta.cols(), tb.cols());
        let mut out = Tensor::zeros(n, m);
        matmul_into(ta.data(), tb.data(), out.data_mut(), n, k, m);
        Ok(self.derived(out, Op::MatMul(a, b), &[a, b]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err("add", ta, tb));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x + y).collect();
        let out = Tensor::new(ta.shape().to_vec(), data);
        Ok(self.derived(out, Op::Add(a, b), &[a, b]))
    }

    /// `a[n,c] + bias[1,c]` broadcast over rows.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(bias));
        if tb.rows() != 1 || tb.cols() != ta.cols() {
            return Err(shape_err("add_row", ta, tb));
        }
        let c = ta.cols();
        let mut out = ta.clone();
        for (i, x) in out.data_mut().iter_mut().enumerate() {
            *x += tb.data()[i % c];
        }
        Ok(self.derived(out, Op::AddRow(a, bias), &[a, bias]))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err("mul", ta, tb));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x * y).collect();
        let out = Tensor::new(ta.shape().to_vec(), data);
        Ok(self.derived(out, Op::Mul(a, b), &[a, b]))
    }

    /// `a[n,c] * s[n,1]`, scaling each row by a per-row factor.
    pub fn mul_col(&mut self, a: Var, s: Var) -> Result<Var> {
        let (ta, ts) = (self.value(a), self.value(s));
        if ts.cols() != 1 || ts.rows() != ta.rows() {
            return Err(shape_err("mul_col", ta, ts));
        }
        let c = ta.cols();
        let mut out = ta.clone();
        for (i, x) in out.data_mut().iter_mut().enumerate() {
            *x *= ts.data()[i / c.max(1)];
        }
        Ok(self.derived(out, Op::MulCol(a, s), &[a, s]))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let out = self.value(a).map(|x| k * x);
        self.derived(out, Op::Scale(a, k), &[a])
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = self.value(parts[0]).rows();
        for p in parts {
            if self.value(*p).rows() != rows {
                return Err(shape_err("concat_cols", self.value(parts[0]), self.value(*p)));
            }
        }
        let cols: usize = parts.iter().map(|p| self.value(*p).cols()).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for p in parts {
                data.extend_from_slice(self.value(*p).row(r));
            }
        }
        Ok(self.derived(Tensor::new(vec![rows, cols], data), Op::ConcatCols(parts.to_vec()), parts))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let cols = self.value(parts[0]).cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for p in parts {
            let t = self.value(*p);
            if t.cols() != cols {
                return Err(shape_err("concat_rows", self.value(parts[0]), t));
            }
            rows += t.rows();
            data.extend_from_slice(t.data());
        }
        Ok(self.derived(Tensor::new(vec![rows, cols], data), Op::ConcatRows(parts.to_vec()), parts))
    }

    /// Columns `start..start+len`.
    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let t = self.value(a);
        if start + len > t.cols() {
            return Err(TensorError::Index { op: "slice_cols", index: start + len, len: t.cols() });
        }
        let mut data = Vec::with_capacity(t.rows() * len);
        for r in 0..t.rows() {
            data.extend_from_slice(&t.row(r)[start..start + len]);
        }
        let out = Tensor::new(vec![t.rows(), len], data);
        Ok(self.derived(out, Op::SliceCols(a, start), &[a]))
    }

    /// Rows of `a` at `indices`; also serves as embedding lookup.
    pub fn gather_rows(&mut self, a: Var, indices: &[usize]) -> Result<Var> {
        let t = self.value(a);
        let c = t.cols();
        let mut data = Vec::with_capacity(indices.len() * c);
        for &i in indices {
            if i >= t.rows() {
                return Err(TensorError::Index { op: "gather_rows", index: i, len: t.rows() });
            }
            data.extend_from_slice(t.row(i));
        }
        let out = Tensor::new(vec![indices.len(), c], data);
        Ok(self.derived(out, Op::GatherRows(a, indices.to_vec()), &[a]))
    }

    pub fn embedding_lookup(&mut self, table: Var, indices: &[usize]) -> Result<Var> {
        self.gather_rows(table, indices)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x.max(0.0));
        self.derived(out, Op::Relu(a), &[a])
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let out = self.value(a).map(|x| if x > 0.0 { x } else { slope * x });
        self.derived(out, Op::LeakyRelu(a, slope), &[a])
    }

    pub fn elu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| if x > 0.0 { x } else { x.exp_m1() });
        self.derived(out, Op::Elu(a), &[a])
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(sigmoid);
        self.derived(out, Op::Sigmoid(a), &[a])
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::tanh);
        self.derived(out, Op::Tanh(a), &[a])
    }

    /// Row-wise log-softmax.
    pub fn log_softmax(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let mut out = t.clone();
        let c = t.cols();
        for row in out.data_mut().chunks_mut(c.max(1)) {
            let lse = log_sum_exp(row);
            row.iter_mut().for_each(|x| *x -= lse);
        }
        self.derived(out, Op::LogSoftmax(a), &[a])
    }

    /// Inverted dropout. Identity (the same handle) when not training or `p == 0`.
    pub fn dropout(&mut self, a: Var, p: f64, train: bool, rng: &mut impl Rng) -> Var {
        if !train || p <= 0.0 {
            return a;
        }
        let keep = 1.0 - p;
        let t = self.value(a);
        let mask: Vec<f64> = (0..t.len()).map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 }).collect();
        let data = t.data().iter().zip(&mask).map(|(x, m)| x * m).collect();
        let out = Tensor::new(t.shape().to_vec(), data);
        self.derived(out, Op::Dropout(a, mask), &[a])
    }

    /// Sums rows sharing a segment id. Empty segments yield zero rows.
    pub fn segment_sum(&mut self, a: Var, ids: &[usize], num_segments: usize) -> Result<Var> {
        let t = self.value(a);
        check_segments("segment_sum", ids, t.rows(), num_segments)?;
        let c = t.cols();
        let mut out = Tensor::zeros(num_segments, c);
        for (r, &s) in ids.iter().enumerate() {
            for (o, x) in out.data_mut()[s * c..(s + 1) * c].iter_mut().zip(t.row(r)) {
                *o += x;
            }
        }
        Ok(self.derived(out, Op::SegmentSum(a, ids.to_vec()), &[a]))
    }

    pub fn segment_mean(&mut self, a: Var, ids: &[usize], num_segments: usize) -> Result<Var> {
        let t = self.value(a);
        let counts = check_segments("segment_mean", ids, t.rows(), num_segments)?;
        if let Some(s) = counts.iter().position(|&n| n == 0) {
            return Err(TensorError::EmptySegment { op: "segment_mean", segment: s });
        }
        let c = t.cols();
        let mut out = Tensor::zeros(num_segments, c);
        for (r, &s) in ids.iter().enumerate() {
            let inv = 1.0 / counts[s] as f64;
            for (o, x) in out.data_mut()[s * c..(s + 1) * c].iter_mut().zip(t.row(r)) {
                *o += x * inv;
            }
        }
        Ok(self.derived(out, Op::SegmentMean(a, ids.to_vec(), counts), &[a]))
    }

    /// Softmax over the rows of each segment, independently per column.
    pub fn segment_softmax(&mut self, a: Var, ids: &[usize], num_segments: usize) -> Result<Var> {
        let t = self.value(a);
        let counts = check_segments("segment_softmax", ids, t.rows(), num_segments)?;
        if let Some(s) = counts.iter().position(|&n| n == 0) {
            return Err(TensorError::EmptySegment { op: "segment_softmax", segment: s });
        }
        let c = t.cols();
        let mut max = vec![f64::NEG_INFINITY; num_segments * c];
        for (r, &s) in ids.iter().enumerate() {
            for (m, &x) in max[s * c..(s + 1) * c].iter_mut().zip(t.row(r)) {
                *m = m.max(x);
            }
        }
        let mut out = t.clone();
        let mut denom = vec![0.0; num_segments * c];
        for (r, &s) in ids.iter().enumerate() {
            for j in 0..c {
                let e = (out.data()[r * c + j] - max[s * c + j]).exp();
                out.data_mut()[r * c + j] = e;
                denom[s * c + j] += e;
            }
        }
        for (r, &s) in ids.iter().enumerate() {
            for j in 0..c {
                out.data_mut()[r * c + j] /= denom[s * c + j];
            }
        }
        Ok(self.derived(out, Op::SegmentSoftmax(a, ids.to_vec()), &[a]))
    }

    /// Mean negative log-likelihood of `labels` under row-wise softmax of `logits`.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let t = self.value(logits);
        if labels.len() != t.rows() {
            return Err(TensorError::Shape { op: "cross_entropy", left: t.shape().to_vec(), right: vec![labels.len()] });
        }
        let mut total = 0.0;
        for (r, &y) in labels.iter().enumerate() {
            let row = t.row(r);
            if y >= row.len() {
                return Err(TensorError::Index { op: "cross_entropy", index: y, len: row.len() });
            }
            total += log_sum_exp(row) - row[y];
        }
        let out = Tensor::scalar(total / labels.len().max(1) as f64);
        Ok(self.derived(out, Op::CrossEntropy(logits, labels.to_vec()), &[logits]))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let out = Tensor::scalar(self.value(a).data().iter().sum());
        self.derived(out, Op::Sum(a), &[a])
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.value(a).len().max(1) as f64;
        let s = self.sum(a);
        self.scale(s, 1.0 / n)
    }

    /// Accumulates d`loss`/d`v` into every gradient-requiring node.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let shape = self.value(loss).shape().to_vec();
        if self.value(loss).len() != 1 {
            return Err(TensorError::NotScalar(shape));
        }
        let mut adj: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        adj[loss.0] = Some(Tensor::new(shape, vec![1.0]));
        for i in (0..=loss.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            if !self.nodes[i].requires_grad {
                continue;
            }
            self.propagate(i, &g, &mut adj);
            match &mut self.grads[i] {
                Some(acc) => acc.add_assign(&g),
                slot => *slot = Some(g),
            }
        }
        Ok(())
    }

    fn propagate(&self, i: usize, g: &Tensor, adj: &mut [Option<Tensor>]) {
        let node = &self.nodes[i];
        let y = &node.value;
        let value = |v: Var| &self.nodes[v.0].value;
        let wants = |v: Var| self.nodes[v.0].requires_grad;
        let mut send = |v: Var, t: Tensor| match &mut adj[v.0] {
            Some(acc) => acc.add_assign(&t),
            slot => *slot = Some(t),
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (value(*a), value(*b));
                let (n, k, m) = (ta.rows(), ta.cols(), tb.cols());
                if wants(*a) {
                    // dA = G · Bᵀ
                    let mut da = Tensor::zeros(n, k);
                    for r in 0..n {
                        let gr = &g.data()[r * m..(r + 1) * m];
                        for p in 0..k {
                            let br = &tb.data()[p * m..(p + 1) * m];
                            da.data_mut()[r * k + p] = gr.iter().zip(br).map(|(x, y)| x * y).sum();
                        }
                    }
                    send(*a, da);
                }
                if wants(*b) {
                    // dB = Aᵀ · G
                    let mut db = Tensor::zeros(k, m);
                    for r in 0..n {
                        let gr = &g.data()[r * m..(r + 1) * m];
                        for p in 0..k {
                            let x = ta.data()[r * k + p];
                            if x == 0.0 {
                                continue;
                            }
                            for (o, gy) in db.data_mut()[p * m..(p + 1) * m].iter_mut().zip(gr) {
                                *o += x * gy;
                            }
                        }
                    }
                    send(*b, db);
                }
            }
            Op::Add(a, b) => {
                if wants(*a) {
                    send(*a, g.clone());
                }
                if wants(*b) {
                    send(*b, g.clone());
                }
            }
            Op::AddRow(a, b) => {
                if wants(*a) {
                    send(*a, g.clone());
                }
                if wants(*b) {
                    let c = g.cols();
                    let mut db = Tensor::zeros(1, c);
                    for (j, x) in g.data().iter().enumerate() {
                        db.data_mut()[j % c] += x;
                    }
                    send(*b, db);
                }
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (value(*a), value(*b));
                if wants(*a) {
                    let d = g.data().iter().zip(tb.data()).map(|(x, y)| x * y).collect();
                    send(*a, Tensor::new(g.shape().to_vec(), d));
                }
                if wants(*b) {
                    let d = g.data().iter().zip(ta.data()).map(|(x, y)| x * y).collect();
                    send(*b, Tensor::new(g.shape().to_vec(), d));
                }
            }
            Op::MulCol(a, s) => {
                let (ta, ts) = (value(*a), value(*s));
                let c = ta.cols().max(1);
                if wants(*a) {
                    let d = g.data().iter().enumerate().map(|(j, x)| x * ts.data()[j / c]).collect();
                    send(*a, Tensor::new(g.shape().to_vec(), d));
                }
                if wants(*s) {
                    let mut ds = Tensor::zeros(ts.rows(), 1);
                    for (j, (x, y)) in g.data().iter().zip(ta.data()).enumerate() {
                        ds.data_mut()[j / c] += x * y;
                    }
                    send(*s, ds);
                }
            }
            Op::Scale(a, k) => send(*a, g.map(|x| k * x)),
            Op::ConcatCols(parts) => {
                let total = g.cols();
                let mut off = 0;
                for p in parts {
                    let w = value(*p).cols();
                    if wants(*p) {
                        let mut d = Vec::with_capacity(g.rows() * w);
                        for r in 0..g.rows() {
                            d.extend_from_slice(&g.data()[r * total + off..r * total + off + w]);
                        }
                        send(*p, Tensor::new(vec![g.rows(), w], d));
                    }
                    off += w;
                }
            }
            Op::ConcatRows(parts) => {
                let c = g.cols();
                let mut off = 0;
                for p in parts {
                    let n = value(*p).rows();
                    if wants(*p) {
                        send(*p, Tensor::new(vec![n, c], g.data()[off * c..(off + n) * c].to_vec()));
                    }
                    off += n;
                }
            }
            Op::SliceCols(a, start) => {
                let ta = value(*a);
                let (w, c) = (g.cols(), ta.cols());
                let mut d = Tensor::zeros(ta.rows(), c);
                for r in 0..ta.rows() {
                    d.data_mut()[r * c + start..r * c + start + w].copy_from_slice(g.row(r));
                }
                send(*a, d);
            }
            Op::GatherRows(a, idx) => {
                let ta = value(*a);
                let c = ta.cols();
                let mut d = Tensor::zeros(ta.rows(), c);
                for (r, &i) in idx.iter().enumerate() {
                    for (o, x) in d.data_mut()[i * c..(i + 1) * c].iter_mut().zip(g.row(r)) {
                        *o += x;
                    }
                }
                send(*a, d);
            }
            Op::Relu(a) => {
                let d = g.data().iter().zip(value(*a).data()).map(|(x, &v)| if v > 0.0 { *x } else { 0.0 }).collect();
                send(*a, Tensor::new(g.shape().to_vec(), d));
            }
            Op::LeakyRelu(a, slope) => {
                let d = g.data().iter().zip(value(*a).data()).map(|(x, &v)| if v > 0.0 { *x } else { slope * x }).collect();
                send(*a, Tensor::new(g.shape().to_vec(), d));
            }
            Op::Elu(a) => {
                let d = g
                    .data()
                    .iter()
                    .zip(value(*a).data())
                    .zip(y.data())
                    .map(|((x, &v), &o)| if v > 0.0 { *x } else { x * (o + 1.0) })
                    .collect();
                send(*a, Tensor::new(g.shape().to_vec(), d));
            }
            Op::Sigmoid(a) => {
                let d = g.data().iter().zip(y.data()).map(|(x, s)| x * s * (1.0 - s)).collect();
                send(*a, Tensor::new(g.shape().to_vec(), d));
            }
            Op::Tanh(a) => {
                let d = g.data().iter().zip(y.data()).map(|(x, t)| x * (1.0 - t * t)).collect();
                send(*a, Tensor::new(g.shape().to_vec(), d));
            }
            Op::LogSoftmax(a) => {
                let c = g.cols().max(1);
                let mut d = g.clone();
                for (dr, yr) in d.data_mut().chunks_mut(c).zip(y.data().chunks(c)) {
                    let s: f64 = dr.iter().sum();
                    for (x, ly) in dr.iter_mut().zip(yr) {
                        *x -= ly.exp() * s;
                    }
                }
                send(*a, d);
            }
            Op::Dropout(a, mask) => {
                let d = g.data().iter().zip(mask).map(|(x, m)| x * m).collect();
                send(*a, Tensor::new(g.shape().to_vec(), d));
            }
            Op::SegmentSum(a, ids) => {
                let c = g.cols();
                let mut d = Vec::with_capacity(ids.len() * c);
                for &s in ids {
                    d.extend_from_slice(g.row(s));
                }
                send(*a, Tensor::new(vec![ids.len(), c], d));
            }
            Op::SegmentMean(a, ids, counts) => {
                let c = g.cols();
                let mut d = Vec::with_capacity(ids.len() * c);
                for &s in ids {
                    let inv = 1.0 / counts[s] as f64;
                    d.extend(g.row(s).iter().map(|x| x * inv));
                }
                send(*a, Tensor::new(vec![ids.len(), c], d));
            }
            Op::SegmentSoftmax(a, ids) => {
                let c = g.cols();
                let segs = ids.iter().max().map_or(0, |m| m + 1);
                let mut dot = vec![0.0; segs * c];
                for (r, &s) in ids.iter().enumerate() {
                    for j in 0..c {
                        dot[s * c + j] += y.data()[r * c + j] * g.data()[r * c + j];
                    }
                }
                let mut d = g.clone();
                for (r, &s) in ids.iter().enumerate() {
                    for j in 0..c {
                        let k = r * c + j;
                        d.data_mut()[k] = y.data()[k] * (g.data()[k] - dot[s * c + j]);
                    }
                }
                send(*a, d);
            }
            Op::CrossEntropy(a, labels) => {
                let ta = value(*a);
                let scale = g.item() / labels.len().max(1) as f64;
                let mut d = ta.clone();
                let c = ta.cols();
                for (r, &lab) in labels.iter().enumerate() {
                    let row = &mut d.data_mut()[r * c..(r + 1) * c];
                    let lse = log_sum_exp(row);
                    for (j, x) in row.iter_mut().enumerate() {
                        *x = ((*x - lse).exp() - f64::from(j == lab)) * scale;
                    }
                }
                send(*a, d);
            }
            Op::Sum(a) => {
                let t = value(*a);
                send(*a, Tensor::new(t.shape().to_vec(), vec![g.item(); t.len()]));
            }
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn log_sum_exp(row: &[f64]) -> f64 {
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + row.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}
