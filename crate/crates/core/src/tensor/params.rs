use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

use super::{Tape, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

/// Named trainable tensors in registration order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Tensor>,
}

impl ParamStore {
    pub fn new() -> ParamStore {
        ParamStore::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        let name = name.into();
        debug_assert!(!self.names.contains(&name), "duplicate parameter {name}");
        self.names.push(name);
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    /// Uniform Glorot initialization of a `[fan_in, fan_out]` weight.
    pub fn add_xavier(&mut self, name: impl Into<String>, fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> ParamId {
        let a = (6.0 / (fan_in + fan_out).max(1) as f64).sqrt();
        let dist = Uniform::new_inclusive(-a, a).expect("finite bound");
        let data = (0..fan_in * fan_out).map(|_| dist.sample(rng)).collect();
        self.add(name, Tensor::new(vec![fan_in, fan_out], data))
    }

    pub fn add_zeros(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> ParamId {
        self.add(name, Tensor::zeros(rows, cols))
    }

    /// Embedding table with entries drawn from N(0, 1/√dim).
    pub fn add_embedding(&mut self, name: impl Into<String>, rows: usize, dim: usize, rng: &mut impl Rng) -> ParamId {
        let dist = Normal::new(0.0, 1.0 / (dim.max(1) as f64).sqrt()).expect("positive sd");
        let data = (0..rows * dim).map(|_| dist.sample(rng)).collect();
        self.add(name, Tensor::new(vec![rows, dim], data))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.values[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.values)
    }

    pub fn values(&self) -> &[Tensor] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Tensor] {
        &mut self.values
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(Tensor::len).sum()
    }

    /// Records every parameter as a trainable leaf.
    pub fn bind(&self, tape: &mut Tape) -> Binding {
        Binding(self.values.iter().map(|v| tape.param(v.clone())).collect())
    }
}

/// The tape handles of a bound [`ParamStore`].
#[derive(Debug, Clone)]
pub struct Binding(Vec<Var>);

impl Binding {
    /// Handles in parameter order, e.g. the leaves a gradient check created.
    pub fn from_vars(vars: Vec<Var>) -> Binding {
        Binding(vars)
    }

    pub fn var(&self, id: ParamId) -> Var {
        self.0[id.0]
    }

    pub fn grads(&self, tape: &Tape) -> Vec<Tensor> {
        self.0.iter().map(|&v| tape.grad(v)).collect()
    }
}

impl std::ops::Index<ParamId> for Binding {
    type Output = Var;

    fn index(&self, id: ParamId) -> &Var {
        &self.0[id.0]
    }
}
