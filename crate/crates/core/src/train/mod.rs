//! Cross-validation, the training loop and evaluation metrics.

mod cv;
mod fit;
mod gnn;
mod metrics;
mod tabular;

pub use cv::{make_cv_plan, CvError, CvPlan, Fold, DEFAULT_FOLDS, MIN_IDS, VALIDATION_SHARE};
pub use fit::{epoch_order, fit, Decision, EarlyStopping, EpochRecord, History, Learner, TrainConfig, TrainError};
pub use gnn::{GnnLearner, EVAL_BATCH};
pub use metrics::{accuracy, auroc, relative_auroc, MetricError, Relative, Summary};
pub use tabular::{TabularKind, TabularLearner, TabularModel, BASELINE_WEIGHT_DECAY, MLP_DROPOUT};
