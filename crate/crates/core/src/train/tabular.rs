use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::fit::Learner;
use crate::models::positive_probability;
use crate::rng;
use crate::tensor::{self, Binding, ParamId, ParamStore, Tape, Tensor, Var};

pub const MLP_DROPOUT: f64 = 0.3;
pub const BASELINE_WEIGHT_DECAY: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TabularKind {
    /// One linear layer to class logits.
    LogReg,
    /// Hidden widths 4x then 2x the input width.
    Mlp,
}

#[derive(Debug, Clone)]
pub struct TabularModel {
    pub kind: TabularKind,
    pub params: ParamStore,
    layers: Vec<(ParamId, ParamId)>,
}

impl TabularModel {
    pub fn new(kind: TabularKind, input_width: usize, seed: u64) -> TabularModel {
        let mut rng = rng::stream(seed, rng::streams::INIT);
        let mut params = ParamStore::new();
        let widths = match kind {
            TabularKind::LogReg => vec![input_width, 2],
            TabularKind::Mlp => vec![input_width, 4 * input_width, 2 * input_width, 2],
        };
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let wid = params.add_xavier(format!("l{i}.w"), w[0], w[1], &mut rng);
                (wid, params.add_zeros(format!("l{i}.b"), 1, w[1]))
            })
            .collect();
        TabularModel { kind, params, layers }
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1].iter().map(|(w, _)| self.params.get(*w).cols()).collect()
    }

    pub fn forward(&self, tape: &mut Tape, bind: &Binding, x: Var, train: bool, rng: &mut ChaCha8Rng) -> tensor::Result<Var> {
        let mut h = x;
        for (i, (w, b)) in self.layers.iter().enumerate() {
            h = tape.matmul(h, bind[*w])?;
            h = tape.add_row(h, bind[*b])?;
            if i + 1 < self.layers.len() {
                h = tape.relu(h);
                h = tape.dropout(h, MLP_DROPOUT, train, rng);
            }
        }
        Ok(h)
    }
}

/// Rows of a feature matrix as training examples.
pub struct TabularLearner<'a> {
    pub model: TabularModel,
    features: &'a Tensor,
    labels: &'a [u8],
}

impl<'a> TabularLearner<'a> {
    pub fn new(model: TabularModel, features: &'a Tensor, labels: &'a [u8]) -> Self {
        TabularLearner { model, features, labels }
    }

    fn rows(&self, examples: &[usize]) -> Tensor {
        let c = self.features.cols();
        let mut data = Vec::with_capacity(examples.len() * c);
        for &i in examples {
            data.extend_from_slice(self.features.row(i));
        }
        Tensor::new(vec![examples.len(), c], data)
    }
}

impl Learner for TabularLearner<'_> {
    fn params(&self) -> &ParamStore {
        &self.model.params
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.model.params
    }

    fn batch_loss(&self, tape: &mut Tape, bind: &Binding, examples: &[usize], train: bool, rng: &mut ChaCha8Rng) -> tensor::Result<Var> {
        let x = tape.constant(self.rows(examples));
        let logits = self.model.forward(tape, bind, x, train, rng)?;
        let y: Vec<usize> = examples.iter().map(|&i| self.labels[i] as usize).collect();
        tape.cross_entropy(logits, &y)
    }

    fn scores(&self, examples: &[usize]) -> tensor::Result<Vec<f64>> {
        let mut tape = Tape::new();
        let bind = self.model.params.bind(&mut tape);
        let x = tape.constant(self.rows(examples));
        let logits = self.model.forward(&mut tape, &bind, x, false, &mut rng::stream(0, 0))?;
        let t = tape.value(logits);
        Ok((0..t.rows()).map(|r| positive_probability(t.row(r))).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mlp_widths() {
        assert_eq!(TabularModel::new(TabularKind::Mlp, 10, 0).hidden_widths(), vec![40, 20]);
        assert!(TabularModel::new(TabularKind::LogReg, 10, 0).hidden_widths().is_empty());
    }
}
