use rand_chacha::ChaCha8Rng;

use super::fit::Learner;
use crate::encode::EncodedTable;
use crate::models::{GraphBatch, Model};
use crate::sampler::Datapoint;
use crate::tensor::{self, Binding, ParamStore, Tape, Var};

/// Datapoints per evaluation batch.
pub const EVAL_BATCH: usize = 256;

/// A graph model over a fixed set of sampled datapoints and encoded tables.
pub struct GnnLearner<'a> {
    pub model: Model,
    datapoints: &'a [Datapoint],
    features: &'a [EncodedTable],
}

impl<'a> GnnLearner<'a> {
    pub fn new(model: Model, datapoints: &'a [Datapoint], features: &'a [EncodedTable]) -> Self {
        GnnLearner { model, datapoints, features }
    }

    pub fn batch(&self, examples: &[usize]) -> GraphBatch {
        let dps: Vec<&Datapoint> = examples.iter().map(|&i| &self.datapoints[i]).collect();
        GraphBatch::new(&dps, self.features, self.model.schema())
    }
}

impl Learner for GnnLearner<'_> {
    fn params(&self) -> &ParamStore {
        &self.model.params
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.model.params
    }

    fn batch_loss(&self, tape: &mut Tape, bind: &Binding, examples: &[usize], train: bool, rng: &mut ChaCha8Rng) -> tensor::Result<Var> {
        let batch = self.batch(examples);
        let logits = self.model.forward(tape, bind, &batch, train, rng)?;
        tape.cross_entropy(logits, &batch.class_labels())
    }

    fn scores(&self, examples: &[usize]) -> tensor::Result<Vec<f64>> {
        let mut out = Vec::with_capacity(examples.len());
        for chunk in examples.chunks(EVAL_BATCH) {
            out.extend(self.model.predict(&self.batch(chunk))?);
        }
        Ok(out)
    }
}
