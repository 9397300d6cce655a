use log::{debug, info};
use rand::seq::{IndexedRandom, SliceRandom};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::auroc;
use crate::rng;
use crate::tensor::{self, AdamW, Binding, ParamStore, Tape, TensorError, Var};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub oversample: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { lr: 1e-3, weight_decay: 0.0, batch_size: 64, max_epochs: 100, patience: 5, oversample: false, seed: 0 }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("non-finite loss {loss} at epoch {epoch}, batch {batch} ({size} examples)")]
    NonFinite { epoch: usize, batch: usize, size: usize, loss: f64 },
    #[error("no training examples")]
    Empty,
    #[error("patience must be at least 1")]
    Patience,
}

/// Anything trainable by minibatch cross-entropy over indexed examples.
pub trait Learner {
    fn params(&self) -> &ParamStore;
    fn params_mut(&mut self) -> &mut ParamStore;
    /// Mean cross-entropy over `examples`.
    fn batch_loss(&self, tape: &mut Tape, bind: &Binding, examples: &[usize], train: bool, rng: &mut ChaCha8Rng) -> tensor::Result<Var>;
    /// Evaluation-mode probability of the positive class.
    fn scores(&self, examples: &[usize]) -> tensor::Result<Vec<f64>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_auroc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_auroc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Improved,
    Continue,
    Stop,
}

/// Stops once the metric has not improved for `patience` consecutive epochs.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    wait: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> EarlyStopping {
        EarlyStopping { patience, best: f64::NEG_INFINITY, best_epoch: 0, wait: 0 }
    }

    pub fn observe(&mut self, epoch: usize, metric: f64) -> Decision {
        if metric > self.best {
            self.best = metric;
            self.best_epoch = epoch;
            self.wait = 0;
            return Decision::Improved;
        }
        self.wait += 1;
        if self.wait >= self.patience {
            Decision::Stop
        } else {
            Decision::Continue
        }
    }

    pub fn best(&self) -> (usize, f64) {
        (self.best_epoch, self.best)
    }
}

/// One epoch's presentation order. Oversampling appends minority-class
/// duplicates drawn with replacement until both classes are equally frequent.
pub fn epoch_order(examples: &[usize], labels: &[u8], oversample: bool, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut order = examples.to_vec();
    if oversample {
        let (pos, neg): (Vec<usize>, Vec<usize>) = examples.iter().partition(|&&i| labels[i] == 1);
        let deficit = pos.len().abs_diff(neg.len());
        let minority = if pos.len() < neg.len() { pos } else { neg };
        let deficit = if minority.is_empty() { 0 } else { deficit };
        for _ in 0..deficit {
            order.push(*minority.choose(rng).expect("non-empty"));
        }
    }
    order.shuffle(rng);
    order
}

fn val_auroc(learner: &dyn Learner, val: &[usize], labels: &[u8]) -> tensor::Result<f64> {
    let scores = learner.scores(val)?;
    let y: Vec<u8> = val.iter().map(|&i| labels[i]).collect();
    Ok(auroc(&scores, &y).unwrap_or(0.5))
}

/// Minibatch AdamW with early stopping on validation AUROC. On return the
/// learner holds the parameters of the best validation epoch.
pub fn fit(learner: &mut dyn Learner, fit_ids: &[usize], val_ids: &[usize], labels: &[u8], config: &TrainConfig) -> Result<History, TrainError> {
    if fit_ids.is_empty() {
        return Err(TrainError::Empty);
    }
    if config.patience == 0 {
        return Err(TrainError::Patience);
    }
    let mut shuffle = rng::stream(config.seed, rng::streams::SHUFFLE);
    let mut dropout = rng::stream(config.seed, rng::streams::DROPOUT);
    let mut opt = AdamW::new(config.lr, config.weight_decay);
    let mut stopper = EarlyStopping::new(config.patience);
    let mut best = learner.params().clone();
    let mut epochs = Vec::new();

    for epoch in 1..=config.max_epochs {
        let order = epoch_order(fit_ids, labels, config.oversample, &mut shuffle);
        let mut total = 0.0;
        for (b, chunk) in order.chunks(config.batch_size.max(1)).enumerate() {
            let mut tape = Tape::new();
            let bind = learner.params().bind(&mut tape);
            let loss = learner.batch_loss(&mut tape, &bind, chunk, true, &mut dropout)?;
            let value = tape.value(loss).item();
            if !value.is_finite() {
                return Err(TrainError::NonFinite { epoch, batch: b, size: chunk.len(), loss: value });
            }
            total += value * chunk.len() as f64;
            tape.backward(loss)?;
            let grads = bind.grads(&tape);
            opt.step(learner.params_mut(), &grads);
        }
        let train_loss = total / order.len() as f64;
        let val = val_auroc(learner, val_ids, labels)?;
        debug!("epoch {epoch}: loss {train_loss:.5} val auroc {val:.4}");
        epochs.push(EpochRecord { epoch, train_loss, val_auroc: val });
        match stopper.observe(epoch, val) {
            Decision::Improved => best = learner.params().clone(),
            Decision::Continue => {}
            Decision::Stop => break,
        }
    }
    let (best_epoch, best_val_auroc) = stopper.best();
    info!("trained {} epochs; best epoch {best_epoch} val auroc {best_val_auroc:.4}", epochs.len());
    *learner.params_mut() = best;
    Ok(History { epochs, best_epoch, best_val_auroc })
}
