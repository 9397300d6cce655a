//! Cross-validated experiments: GNN variants and single-table baselines on
//! the same folds.

use std::fmt;
use std::path::Path;

use log::info;
use serde::{Deserialize, Serialize};

use crate::dfs::{self, DEFAULT_MAX_DEPTH};
use crate::encode::{DatabaseEncoders, EncodeError, TableEncoder};
use crate::graph::{database_to_graph, GraphSchema};
use crate::models::{GraphBatch, Model, ModelConfig, NodeInputs, Variant};
use crate::rdb::{remove_target_column, CellSource, Database, MaskedDatabase, RdbError, TargetRef};
use crate::rng;
use crate::sampler::{batch_sample, Datapoint, SampleError, SampleOptions};
use crate::synth::{generate, Signal, SynthSpec, Template};
use crate::tensor::{self, Binding, ParamStore, Tape, Tensor, TensorError, Var};
use crate::train::{
    accuracy, auroc, fit, make_cv_plan, relative_auroc, CvError, Fold, GnnLearner, History, Learner, MetricError, Relative,
    Summary, TabularKind, TabularLearner, TabularModel, TrainConfig, TrainError, BASELINE_WEIGHT_DECAY, DEFAULT_FOLDS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Gnn(Variant),
    LogReg,
    Mlp,
    /// Single-table features plus flattened aggregates through a logistic regression.
    DfsLogReg,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Gnn(v) => v.name(),
            ModelKind::LogReg => "logreg",
            ModelKind::Mlp => "mlp",
            ModelKind::DfsLogReg => "dfs-logreg",
        }
    }

    pub fn parse(s: &str) -> Option<ModelKind> {
        match s {
            "logreg" => Some(ModelKind::LogReg),
            "mlp" => Some(ModelKind::Mlp),
            "dfs-logreg" => Some(ModelKind::DfsLogReg),
            other => Variant::parse(other).map(ModelKind::Gnn),
        }
    }

    pub fn all() -> Vec<ModelKind> {
        let mut v: Vec<ModelKind> = Variant::ALL.iter().map(|&v| ModelKind::Gnn(v)).collect();
        v.extend([ModelKind::LogReg, ModelKind::Mlp, ModelKind::DfsLogReg]);
        v
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for ModelKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for ModelKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        ModelKind::parse(&s).ok_or_else(|| serde::de::Error::custom(format!("unknown model {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub hidden: usize,
    /// Message-passing rounds; the variant default when absent.
    pub rounds: Option<usize>,
    pub dropout: f64,
    /// 0 for graph models and 0.01 for baselines when absent.
    pub weight_decay: Option<f64>,
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub oversample: bool,
    pub folds: usize,
    pub seed: u64,
    pub edge_type_once: bool,
    pub reverse_edges: bool,
    pub dfs_depth: usize,
}

impl ExperimentConfig {
    pub fn new(model: ModelKind, seed: u64) -> ExperimentConfig {
        let train = TrainConfig::default();
        ExperimentConfig {
            model,
            hidden: 32,
            rounds: None,
            dropout: 0.5,
            weight_decay: None,
            lr: train.lr,
            batch_size: train.batch_size,
            max_epochs: train.max_epochs,
            patience: train.patience,
            oversample: false,
            folds: DEFAULT_FOLDS,
            seed,
            edge_type_once: false,
            reverse_edges: true,
            dfs_depth: DEFAULT_MAX_DEPTH,
        }
    }

    pub fn train_config(&self, fold: usize) -> TrainConfig {
        let weight_decay = self.weight_decay.unwrap_or(match self.model {
            ModelKind::Gnn(_) => 0.0,
            _ => BASELINE_WEIGHT_DECAY,
        });
        TrainConfig {
            lr: self.lr,
            weight_decay,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            patience: self.patience,
            oversample: self.oversample,
            seed: rng::derive(self.seed, rng::streams::fold(rng::streams::SHUFFLE, fold)),
        }
    }

    pub fn model_config(&self, variant: Variant) -> ModelConfig {
        let mut c = ModelConfig::new(variant).with_hidden(self.hidden).with_dropout(self.dropout);
        if let Some(r) = self.rounds {
            c.rounds = r;
        }
        c
    }

    pub fn sample_options(&self) -> SampleOptions {
        SampleOptions { edge_type_once: self.edge_type_once, reverse_edges: self.reverse_edges, ..SampleOptions::default() }
    }

    fn model_seed(&self, fold: usize) -> u64 {
        rng::derive(self.seed, rng::streams::fold(rng::streams::INIT, fold))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Rdb(#[from] RdbError),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Cv(#[from] CvError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Dfs(#[from] dfs::DfsError),
    #[error("fold {fold}: {source}")]
    Metric { fold: usize, source: MetricError },
    #[error("{0}")]
    Artifact(String),
    #[error("no gradcheck probe kept its ReLU inputs away from zero (last margin {margin:e})")]
    NoSmoothProbe { margin: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub test_auroc: f64,
    pub test_accuracy: f64,
    pub best_epoch: usize,
    pub best_val_auroc: f64,
    pub epochs: usize,
    pub history: History,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub model: ModelKind,
    pub num_targets: usize,
    pub config: ExperimentConfig,
    pub folds: Vec<FoldReport>,
    pub auroc: Summary,
    pub accuracy: Summary,
}

impl RunReport {
    pub fn test_aurocs(&self) -> Vec<f64> {
        self.folds.iter().map(|f| f.test_auroc).collect()
    }
}

/// What reloading a trained fold needs besides its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelDescription {
    Gnn { config: ModelConfig, inputs: Vec<NodeInputs>, schema: GraphSchema },
    Tabular { kind: TabularKind, input_width: usize, dfs_columns: Vec<String> },
}

#[derive(Debug, Clone)]
pub struct FoldArtifacts {
    pub params: ParamStore,
    pub description: ModelDescription,
    /// Fitted encoders serialized as JSON.
    pub encoders: String,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub artifacts: Vec<FoldArtifacts>,
}

/// Labeled target rows and their labels, in row order.
fn labeled_targets(masked: &MaskedDatabase) -> (Vec<usize>, Vec<u8>) {
    masked.labels().iter().enumerate().filter_map(|(r, l)| l.map(|l| (r, l))).unzip()
}

fn test_metrics(learner: &dyn Learner, fold_index: usize, fold: &Fold, labels: &[u8]) -> Result<(f64, f64), PipelineError> {
    let scores = learner.scores(&fold.test)?;
    let y: Vec<u8> = fold.test.iter().map(|&i| labels[i]).collect();
    let a = auroc(&scores, &y).map_err(|source| PipelineError::Metric { fold: fold_index, source })?;
    Ok((a, accuracy(&scores, &y, 0.5)))
}

/// Runs every fold of the configured experiment.
pub fn run_cv(db: &Database, config: &ExperimentConfig) -> Result<RunOutput, PipelineError> {
    let masked = remove_target_column(db)?;
    let target = masked.target();
    let (rows, labels) = labeled_targets(&masked);
    let plan = make_cv_plan(rows.len(), config.folds, config.seed)?;
    info!("{}: {} labeled targets, {} folds", config.model, rows.len(), plan.folds.len());

    let mut reports = Vec::new();
    let mut artifacts = Vec::new();
    match config.model {
        ModelKind::Gnn(variant) => {
            let graph = database_to_graph(db);
            let masked_labels: Vec<Option<u8>> = masked.labels().to_vec();
            let datapoints = batch_sample(&graph, target.table, &rows, &masked_labels, &config.sample_options())?;
            for (k, fold) in plan.folds.iter().enumerate() {
                let training_rows = rows_touched(db, &datapoints, &fold.fit);
                let encoders = DatabaseEncoders::fit(&masked, &training_rows, Some((target.table, target.column)));
                let features = encoders.encode_all(&masked)?;
                let model_config = config.model_config(variant);
                let inputs = NodeInputs::from_encoders(&encoders);
                let model = Model::new(model_config.clone(), inputs.clone(), graph.schema().clone(), config.model_seed(k));
                let mut learner = GnnLearner::new(model, &datapoints, &features);
                let history = fit(&mut learner, &fold.fit, &fold.val, &labels, &config.train_config(k))?;
                let (a, acc) = test_metrics(&learner, k, fold, &labels)?;
                info!("fold {k}: test auroc {a:.4} accuracy {acc:.2}");
                reports.push(fold_report(k, a, acc, history));
                artifacts.push(FoldArtifacts {
                    params: learner.model.params,
                    description: ModelDescription::Gnn { config: model_config, inputs, schema: graph.schema().clone() },
                    encoders: encoders.to_json(),
                });
            }
        }
        kind => {
            let tabular = if kind == ModelKind::Mlp { TabularKind::Mlp } else { TabularKind::LogReg };
            let dfs = if kind == ModelKind::DfsLogReg { Some(dfs_table(db, &masked, target, &rows, config.dfs_depth)?) } else { None };
            for (k, fold) in plan.folds.iter().enumerate() {
                let fit_rows: Vec<usize> = fold.fit.iter().map(|&i| rows[i]).collect();
                let single = TableEncoder::fit(&masked, target.table, &fit_rows, &[target.column]);
                let mut blocks = vec![one_hot_matrix(&single, &masked, target.table, &rows)?];
                let mut encoders = vec![single];
                let mut dfs_columns = Vec::new();
                if let Some(d) = &dfs {
                    let enc = TableEncoder::fit(d, 0, &fold.fit, &[]);
                    let all: Vec<usize> = (0..rows.len()).collect();
                    blocks.push(one_hot_matrix(&enc, d, 0, &all)?);
                    encoders.push(enc);
                    dfs_columns = d.table(0).columns.iter().map(|c| c.name.clone()).collect();
                }
                let features = hstack(&blocks);
                let width = features.cols();
                let model = TabularModel::new(tabular, width, config.model_seed(k));
                let mut learner = TabularLearner::new(model, &features, &labels);
                let history = fit(&mut learner, &fold.fit, &fold.val, &labels, &config.train_config(k))?;
                let (a, acc) = test_metrics(&learner, k, fold, &labels)?;
                info!("fold {k}: test auroc {a:.4} accuracy {acc:.2}");
                reports.push(fold_report(k, a, acc, history));
                artifacts.push(FoldArtifacts {
                    params: learner.model.params,
                    description: ModelDescription::Tabular { kind: tabular, input_width: width, dfs_columns },
                    encoders: serde_json::to_string_pretty(&encoders).expect("encoders serialize"),
                });
            }
        }
    }
    let aurocs: Vec<f64> = reports.iter().map(|f| f.test_auroc).collect();
    let accs: Vec<f64> = reports.iter().map(|f| f.test_accuracy).collect();
    let report = RunReport {
        model: config.model,
        num_targets: rows.len(),
        config: config.clone(),
        auroc: Summary::of(&aurocs),
        accuracy: Summary::of(&accs),
        folds: reports,
    };
    Ok(RunOutput { report, artifacts })
}

fn fold_report(fold: usize, test_auroc: f64, test_accuracy: f64, history: History) -> FoldReport {
    FoldReport {
        fold,
        test_auroc,
        test_accuracy,
        best_epoch: history.best_epoch,
        best_val_auroc: history.best_val_auroc,
        epochs: history.epochs.len(),
        history,
    }
}

/// Per table, the sorted rows appearing in any of the given datapoints.
fn rows_touched(db: &Database, datapoints: &[Datapoint], examples: &[usize]) -> Vec<Vec<usize>> {
    let mut seen: Vec<Vec<bool>> = db.tables().iter().map(|t| vec![false; t.len()]).collect();
    for &i in examples {
        for n in &datapoints[i].nodes {
            seen[n.table][n.row] = true;
        }
    }
    seen.iter().map(|s| s.iter().enumerate().filter(|(_, &b)| b).map(|(r, _)| r).collect()).collect()
}

/// Flattened aggregate features as a one-table database, one row per labeled target.
fn dfs_table(db: &Database, masked: &MaskedDatabase, target: TargetRef, rows: &[usize], depth: usize) -> Result<Database, PipelineError> {
    let specs = dfs::enumerate_aggs(db, target.table, depth, &[(target.table, target.column)]);
    let matrix = dfs::compute_features(masked, &specs, target.table, rows)?;
    info!("{} aggregate features at depth {depth}", specs.len());
    Ok(Database::new(vec![matrix.to_table("Features")], true)?)
}

fn one_hot_matrix(enc: &TableEncoder, source: &dyn CellSource, table: usize, rows: &[usize]) -> Result<Tensor, EncodeError> {
    let width = enc.one_hot_width();
    let mut data = Vec::with_capacity(rows.len() * width);
    for &r in rows {
        enc.encode_one_hot(source, table, r, &mut data)?;
    }
    Ok(Tensor::new(vec![rows.len(), width], data))
}

fn hstack(blocks: &[Tensor]) -> Tensor {
    let n = blocks[0].rows();
    let width: usize = blocks.iter().map(Tensor::cols).sum();
    let mut data = Vec::with_capacity(n * width);
    for r in 0..n {
        for b in blocks {
            data.extend_from_slice(b.row(r));
        }
    }
    Tensor::new(vec![n, width], data)
}

/// Largest relative gradient error of a freshly initialized `variant` on two
/// 5-node datapoints (one parent, four children each). Probes derived from
/// `seed` are tried in order until one keeps every ReLU input at least
/// [`KINK_MARGIN`] from zero.
pub fn gradcheck_model(variant: Variant, hidden: usize, seed: u64) -> Result<f64, PipelineError> {
    let mut last = f64::INFINITY;
    for probe in 0..MAX_PROBES {
        let probe_seed = rng::derive(seed, probe);
        let check = GradcheckProbe::new(variant, hidden, probe_seed)?;
        let margin = check.kink_margin()?;
        if margin >= KINK_MARGIN {
            return check.run();
        }
        last = margin;
    }
    Err(PipelineError::NoSmoothProbe { margin: last })
}

/// A probe whose ReLU inputs all sit closer than this to zero is skipped:
/// a finite-difference step would straddle the kink.
pub const KINK_MARGIN: f64 = 1e-4;
const MAX_PROBES: u64 = 64;

struct GradcheckProbe {
    model: Model,
    batch: GraphBatch,
    labels: Vec<usize>,
    seed: u64,
}

impl GradcheckProbe {
    fn new(variant: Variant, hidden: usize, seed: u64) -> Result<Self, PipelineError> {
        let mut spec = SynthSpec::new(Template::ParentChild, Signal::ChildAggregate, 2, seed);
        spec.children = (4, 4);
        let db = generate(&spec).expect("valid gradcheck spec");
        let masked = remove_target_column(&db)?;
        let target = masked.target();
        let graph = database_to_graph(&db);
        let datapoints = batch_sample(&graph, target.table, &[0, 1], masked.labels(), &SampleOptions::default())?;
        let all_rows: Vec<Vec<usize>> = db.tables().iter().map(|t| (0..t.len()).collect()).collect();
        let encoders = DatabaseEncoders::fit(&masked, &all_rows, Some((target.table, target.column)));
        let features = encoders.encode_all(&masked)?;
        let mut config = ModelConfig::new(variant).with_hidden(hidden);
        config.train_eps = true;
        let model = Model::new(config, NodeInputs::from_encoders(&encoders), graph.schema().clone(), seed);
        let refs: Vec<&Datapoint> = datapoints.iter().collect();
        let batch = GraphBatch::new(&refs, &features, model.schema());
        let labels = batch.class_labels();
        Ok(GradcheckProbe { model, batch, labels, seed })
    }

    fn loss(&self, tape: &mut Tape, vars: &[Var]) -> tensor::Result<Var> {
        let bind = Binding::from_vars(vars.to_vec());
        let logits = self.model.forward(tape, &bind, &self.batch, false, &mut rng::stream(self.seed, rng::streams::DROPOUT))?;
        tape.cross_entropy(logits, &self.labels)
    }

    fn kink_margin(&self) -> Result<f64, PipelineError> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = self.model.params.values().iter().map(|t| tape.param(t.clone())).collect();
        self.loss(&mut tape, &vars)?;
        Ok(tape.kink_margin())
    }

    fn run(&self) -> Result<f64, PipelineError> {
        Ok(tensor::gradcheck(|t, v| self.loss(t, v), self.model.params.values(), tensor::GRADCHECK_STEP)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativeRow {
    pub model: ModelKind,
    pub auroc: Summary,
    pub relative: Relative,
}

/// Rows of AUROC relative to `baseline`, the baseline itself first.
pub fn relative_table(baseline: &RunReport, others: &[RunReport]) -> Result<Vec<RelativeRow>, MetricError> {
    let base = baseline.test_aurocs();
    std::iter::once(baseline)
        .chain(others.iter().filter(|r| r.model != baseline.model))
        .map(|r| Ok(RelativeRow { model: r.model, auroc: r.auroc, relative: relative_auroc(&r.test_aurocs(), &base)? }))
        .collect()
}

pub fn format_relative_table(rows: &[RelativeRow]) -> String {
    let mut out = format!("{:<12} {:>17} {:>17}\n", "model", "auroc", "relative");
    for r in rows {
        out.push_str(&format!("{:<12} {:>17} {:>17}\n", r.model.name(), r.auroc.to_string(), r.relative.summary.to_string()));
    }
    out
}

pub const REPORT_FILE: &str = "report.json";
pub const MODEL_FILE: &str = "model.json";

/// Writes `report.json` plus, per fold, `fold{k}/params.ckpt`, `fold{k}/encoders.json` and `fold{k}/model.json`.
pub fn write_run(dir: &Path, output: &RunOutput) -> Result<(), PipelineError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(REPORT_FILE), to_json(&output.report))?;
    for (k, a) in output.artifacts.iter().enumerate() {
        let fold = dir.join(format!("fold{k}"));
        std::fs::create_dir_all(&fold)?;
        tensor::write_checkpoint(&fold.join("params.ckpt"), &a.params)?;
        std::fs::write(fold.join("encoders.json"), &a.encoders)?;
        std::fs::write(fold.join(MODEL_FILE), to_json(&a.description))?;
    }
    Ok(())
}

pub fn read_report(dir: &Path) -> Result<RunReport, PipelineError> {
    let text = std::fs::read_to_string(dir.join(REPORT_FILE))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Artifact(format!("{}: {e}", dir.join(REPORT_FILE).display())))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report types serialize")
}
