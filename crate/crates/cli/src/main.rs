mod manifest;

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;
use serde::Serialize;

use manifest::RunManifest;
use rdbgnn::dfs::{compute_features, enumerate_aggs, DEFAULT_MAX_DEPTH};
use rdbgnn::graph::{database_to_graph, graph_stats};
use rdbgnn::models::Variant;
use rdbgnn::pipeline::{self, ExperimentConfig, ModelKind};
use rdbgnn::rdb::{load_database, remove_target_column, validate_schema, write_database, Database};
use rdbgnn::sampler::{batch_sample, SampleOptions};
use rdbgnn::synth::{generate, Signal, SynthSpec, Template};

#[derive(Parser, Debug)]
#[command(name = "rdbgnn", version, about = "Graph neural networks for supervised learning on relational databases")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load a dataset directory and report tables, columns and key integrity.
    Validate {
        #[command(flatten)]
        data: DatasetArg,
        /// Keep rows whose foreign keys do not resolve.
        #[arg(long)]
        lenient: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Node, edge and degree statistics of the database graph.
    GraphStats {
        #[command(flatten)]
        data: DatasetArg,
        #[arg(long)]
        no_reverse_edges: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Extract datapoint subgraphs as JSON Lines.
    Sample {
        #[command(flatten)]
        data: DatasetArg,
        /// Target-table rows to sample; all labeled rows when omitted.
        #[arg(long = "row")]
        rows: Vec<usize>,
        #[command(flatten)]
        sampling: SamplingArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic dataset with a planted label rule.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "parent_child")]
        template: String,
        #[arg(long, default_value = "child_aggregate")]
        signal: String,
        #[arg(long, default_value_t = 2000)]
        targets: usize,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 1)]
        min_children: usize,
        #[arg(long, default_value_t = 6)]
        max_children: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Flatten foreign-key aggregates of the target table into a CSV.
    Dfs {
        #[command(flatten)]
        data: DatasetArg,
        #[arg(long, default_value_t = DEFAULT_MAX_DEPTH)]
        depth: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-validated training of one model.
    Train(TrainArgs),
    /// Compare finished runs against a baseline run.
    Eval {
        /// Run directories written by `train`.
        #[arg(long = "run", required = true)]
        runs: Vec<PathBuf>,
        /// Baseline run; defaults to the logreg run among `--run`.
        #[arg(long)]
        baseline: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare model gradients against finite differences.
    Gradcheck {
        /// A model variant, or `all`.
        #[arg(long, default_value = "all")]
        model: String,
        #[arg(long, default_value_t = 4)]
        hidden: usize,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Clone)]
struct DatasetArg {
    /// Dataset directory containing schema.json.
    #[arg(value_name = "DIR", required_unless_present = "dataset")]
    path: Option<PathBuf>,
    #[arg(long, value_name = "DIR", conflicts_with = "path")]
    dataset: Option<PathBuf>,
}

impl DatasetArg {
    fn dir(&self) -> PathBuf {
        self.dataset.clone().or_else(|| self.path.clone()).expect("clap requires one of them")
    }
}

#[derive(Args, Debug, Clone, Copy)]
struct SamplingArgs {
    #[arg(long)]
    edge_type_once: bool,
    #[arg(long)]
    no_reverse_edges: bool,
}

impl SamplingArgs {
    fn options(self) -> SampleOptions {
        SampleOptions { edge_type_once: self.edge_type_once, reverse_edges: !self.no_reverse_edges, ..SampleOptions::default() }
    }
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long, required_unless_present = "manifest")]
    dataset: Option<PathBuf>,
    /// gcn, gin, gat, ergcn, ergin, ergat, poolmlp, logreg, mlp or dfs-logreg.
    #[arg(long, default_value = "gcn")]
    model: String,
    #[arg(long, default_value_t = 32)]
    hidden: usize,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    dropout: f64,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long, default_value_t = 64)]
    batch: usize,
    #[arg(long, default_value_t = 5)]
    patience: usize,
    #[arg(long, default_value_t = 100)]
    max_epochs: usize,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_MAX_DEPTH)]
    dfs_depth: usize,
    #[command(flatten)]
    sampling: SamplingArgs,
    #[arg(long)]
    oversample: bool,
    #[arg(long, required_unless_present = "manifest")]
    out: Option<PathBuf>,
    /// Repeat the run recorded in this manifest; only `--out` may be overridden.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

impl TrainArgs {
    fn experiment(&self) -> Result<ExperimentConfig> {
        let model = ModelKind::parse(&self.model).with_context(|| format!("unknown model {:?}", self.model))?;
        let mut c = ExperimentConfig::new(model, self.seed);
        c.hidden = self.hidden;
        c.rounds = self.rounds;
        c.dropout = self.dropout;
        c.lr = self.lr;
        c.weight_decay = self.weight_decay;
        c.batch_size = self.batch;
        c.patience = self.patience;
        c.max_epochs = self.max_epochs;
        c.folds = self.folds;
        c.oversample = self.oversample;
        c.edge_type_once = self.sampling.edge_type_once;
        c.reverse_edges = !self.sampling.no_reverse_edges;
        c.dfs_depth = self.dfs_depth;
        Ok(c)
    }
}

/// Log lines go to stderr and, once an output directory is known, to `run.log` there.
struct Tee(Option<File>);

impl Write for Tee {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        io::stderr().write_all(buf)?;
        if let Some(f) = &mut self.0 {
            f.write_all(buf)?;
        }
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        if let Some(f) = &mut self.0 {
            f.flush()?;
        }
        io::stderr().flush()
    }
}

fn init_logging(out: Option<&Path>) -> Result<()> {
    let file = match out {
        Some(dir) => {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            Some(File::create(dir.join("run.log"))?)
        }
        None => None,
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Pipe(Box::new(Tee(file))))
        .init();
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}

/// Prints `report` and, with an output directory, stores it next to the manifest.
fn emit<T: Serialize>(report: &T, file: &str, out: Option<&Path>, manifest: &RunManifest) -> Result<()> {
    let text = to_json(report)?;
    println!("{text}");
    if let Some(dir) = out {
        std::fs::write(dir.join(file), &text)?;
        manifest.write(dir)?;
    }
    Ok(())
}

fn load(dir: &Path, strict: bool) -> Result<Database> {
    load_database(dir, strict).with_context(|| format!("loading dataset {}", dir.display()))
}

fn parse_enum<T: serde::de::DeserializeOwned>(what: &str, s: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).with_context(|| format!("unknown {what} {s:?}"))
}

fn manifest(subcommand: &str, dataset: Option<PathBuf>, seed: u64, out: Option<&Path>, config: serde_json::Value) -> RunManifest {
    RunManifest {
        subcommand: subcommand.to_string(),
        dataset,
        seed,
        out: out.map(Path::to_path_buf),
        config,
        argv: std::env::args().collect(),
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Validate { data, lenient, out } => {
            init_logging(out.as_deref())?;
            let dir = data.dir();
            let db = load(&dir, !lenient)?;
            let report = validate_schema(&db)?;
            info!("{} tables, {} dangling references", report.tables.len(), report.dangling);
            let m = manifest("validate", Some(dir), 0, out.as_deref(), serde_json::json!({ "lenient": lenient }));
            emit(&report, "validation.json", out.as_deref(), &m)?;
        }
        Command::GraphStats { data, no_reverse_edges, out } => {
            init_logging(out.as_deref())?;
            let dir = data.dir();
            let db = load(&dir, true)?;
            let mut g = database_to_graph(&db);
            if !no_reverse_edges {
                g = g.add_reverse_edges();
            }
            let stats = graph_stats(&g.add_self_loops());
            let m = manifest("graph-stats", Some(dir), 0, out.as_deref(), serde_json::json!({ "reverse_edges": !no_reverse_edges }));
            emit(&stats, "graph_stats.json", out.as_deref(), &m)?;
        }
        Command::Sample { data, rows, sampling, out } => {
            init_logging(out.as_deref())?;
            let dir = data.dir();
            let db = load(&dir, true)?;
            let masked = remove_target_column(&db)?;
            let target = masked.target();
            let rows = if rows.is_empty() {
                masked.labels().iter().enumerate().filter(|(_, l)| l.is_some()).map(|(r, _)| r).collect()
            } else {
                rows
            };
            let graph = database_to_graph(&db);
            let datapoints = batch_sample(&graph, target.table, &rows, masked.labels(), &sampling.options())?;
            let mut lines = String::new();
            for dp in &datapoints {
                lines.push_str(&serde_json::to_string(&dp.to_record(graph.schema()))?);
                lines.push('\n');
            }
            let sizes: Vec<usize> = datapoints.iter().map(|d| d.num_nodes()).collect();
            info!("{} datapoints, largest {} nodes", sizes.len(), sizes.iter().max().unwrap_or(&0));
            match &out {
                Some(dir_out) => {
                    std::fs::write(dir_out.join("datapoints.jsonl"), lines)?;
                    let config = serde_json::json!({
                        "rows": rows,
                        "edge_type_once": sampling.edge_type_once,
                        "reverse_edges": !sampling.no_reverse_edges,
                    });
                    manifest("sample", Some(dir), 0, Some(dir_out), config).write(dir_out)?;
                }
                None => print!("{lines}"),
            }
        }
        Command::Synth { out, template, signal, targets, noise, min_children, max_children, seed } => {
            init_logging(Some(&out))?;
            let template: Template = parse_enum("template", &template)?;
            let signal: Signal = parse_enum("signal", &signal)?;
            let mut spec = SynthSpec::new(template, signal, targets, seed).with_noise(noise);
            spec.children = (min_children, max_children);
            let db = generate(&spec)?;
            write_database(&db, &out)?;
            info!("wrote {} tables to {}", db.tables().len(), out.display());
            manifest("synth", None, seed, Some(&out), serde_json::to_value(&spec)?).write(&out)?;
        }
        Command::Dfs { data, depth, out } => {
            init_logging(Some(&out))?;
            let dir = data.dir();
            let db = load(&dir, true)?;
            let masked = remove_target_column(&db)?;
            let target = masked.target();
            let specs = enumerate_aggs(&db, target.table, depth, &[(target.table, target.column)]);
            let rows: Vec<usize> = (0..db.table(target.table).len()).collect();
            let matrix = compute_features(&masked, &specs, target.table, &rows)?;
            matrix.write_csv(File::create(out.join("features.csv"))?)?;
            info!("{} features for {} rows", specs.len(), rows.len());
            manifest("dfs", Some(dir), 0, Some(&out), serde_json::json!({ "depth": depth })).write(&out)?;
        }
        Command::Train(args) => {
            let (dataset, config, out) = match &args.manifest {
                Some(path) => {
                    let m = RunManifest::read(path)?;
                    if m.subcommand != "train" {
                        bail!("{} records a {} run, not train", path.display(), m.subcommand);
                    }
                    let config: ExperimentConfig = serde_json::from_value(m.config).context("manifest config")?;
                    let out = args.out.clone().or(m.out).context("no output directory")?;
                    (m.dataset.context("manifest has no dataset")?, config, out)
                }
                None => (args.dataset.clone().expect("clap"), args.experiment()?, args.out.clone().expect("clap")),
            };
            init_logging(Some(&out))?;
            let db = load(&dataset, true)?;
            let m = manifest("train", Some(dataset), config.seed, Some(&out), serde_json::to_value(&config)?);
            m.write(&out)?;
            let output = pipeline::run_cv(&db, &config)?;
            pipeline::write_run(&out, &output)?;
            let r = &output.report;
            info!("{}: test auroc {}  accuracy {}", r.model, r.auroc, r.accuracy);
            println!("{}", to_json(r)?);
        }
        Command::Eval { runs, baseline, out } => {
            init_logging(out.as_deref())?;
            let reports = runs.iter().map(|d| pipeline::read_report(d)).collect::<Result<Vec<_>, _>>()?;
            let base = match &baseline {
                Some(dir) => pipeline::read_report(dir)?,
                None => reports
                    .iter()
                    .find(|r| r.model == ModelKind::LogReg)
                    .cloned()
                    .context("no logreg run among --run; pass --baseline")?,
            };
            let table = pipeline::relative_table(&base, &reports)?;
            print!("{}", pipeline::format_relative_table(&table));
            if let Some(dir) = &out {
                std::fs::create_dir_all(dir)?;
                std::fs::write(dir.join("eval.json"), to_json(&table)?)?;
                let config = serde_json::json!({ "runs": runs, "baseline": baseline });
                manifest("eval", None, 0, Some(dir), config).write(dir)?;
            }
        }
        Command::Gradcheck { model, hidden, tolerance, seed, out } => {
            init_logging(out.as_deref())?;
            let variants = if model == "all" {
                Variant::ALL.to_vec()
            } else {
                vec![Variant::parse(&model).with_context(|| format!("unknown model variant {model:?}"))?]
            };
            let mut results = Vec::new();
            for v in variants {
                let err = pipeline::gradcheck_model(v, hidden, seed)?;
                let ok = err <= tolerance;
                println!("{:<8} max relative error {err:.3e} {}", v.name(), if ok { "ok" } else { "FAILED" });
                results.push(serde_json::json!({ "model": v.name(), "max_relative_error": err, "ok": ok }));
            }
            let failed = results.iter().any(|r| r["ok"] == false);
            if let Some(dir) = &out {
                std::fs::create_dir_all(dir)?;
                std::fs::write(dir.join("gradcheck.json"), to_json(&results)?)?;
                let config = serde_json::json!({ "model": model, "hidden": hidden, "tolerance": tolerance });
                manifest("gradcheck", None, seed, Some(dir), config).write(dir)?;
            }
            if failed {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
