//! One PASS/FAIL line per acceptance criterion. Exits nonzero if any fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use common::{max_abs_diff, ModelFixture};
use rand::seq::SliceRandom;
use rand::Rng;
use rdbgnn::dfs::{compute_features, enumerate_aggs, Agg, Hop};
use rdbgnn::encode::{datetime_layout, embedding_dim, encode_latlong, CategoricalEncoder, DateTimeEncoder};
use rdbgnn::graph::{database_to_graph, NodeId};
use rdbgnn::models::Variant;
use rdbgnn::pipeline::{gradcheck_model, run_cv, ExperimentConfig, ModelKind, RunReport};
use rdbgnn::rdb::CellValue;
use rdbgnn::rng;
use rdbgnn::sampler::{rdb_to_graph, SampleOptions};
use rdbgnn::synth::{generate, random_database, Signal, SynthSpec, Template};
use rdbgnn::train::{auroc, relative_auroc};

type Criterion = (&'static str, fn() -> Outcome, Duration);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

/// Fails the outcome when `elapsed` exceeds `limit`.
fn within(o: Outcome, elapsed: Duration, limit: Duration) -> Outcome {
    if elapsed <= limit {
        o
    } else {
        outcome(false, format!("{}; took {:.1}s, limit {}s", o.detail, elapsed.as_secs_f64(), limit.as_secs()))
    }
}

fn closure_oracle() -> Outcome {
    let (mut checked, mut wrong) = (0usize, 0usize);
    let opts = SampleOptions::default();
    for seed in 0..1000 {
        let db = random_database(seed, 6, 200);
        let g = database_to_graph(&db);
        for t in 0..db.tables().len() {
            for row in (0..db.table(t).len()).step_by(7) {
                let target = NodeId::new(t, row);
                let dp = rdb_to_graph(&g, target, &opts).unwrap();
                let got: std::collections::BTreeSet<NodeId> = dp.nodes.iter().copied().collect();
                let want = common::closure_oracle(&db, target);
                checked += 1;
                if got != want || common::datapoint_fk_edges(&dp) != common::induced_edges(&db, &want) {
                    wrong += 1;
                }
            }
        }
    }
    outcome(wrong == 0, format!("{checked} targets on 1000 databases, {wrong} mismatches"))
}

fn gradient_suite() -> Outcome {
    let mut worst_op = (0.0f64, "");
    for seed in 0..50 {
        for op in common::OPS {
            let e = common::op_gradcheck(op, seed);
            if e > worst_op.0 {
                worst_op = (e, op);
            }
        }
    }
    let mut worst_model = (0.0f64, Variant::Gcn);
    for v in Variant::ALL {
        match gradcheck_model(v, 4, 0) {
            Ok(e) if e > worst_model.0 => worst_model = (e, v),
            Ok(_) => {}
            Err(e) => return outcome(false, format!("{v:?}: {e}")),
        }
    }
    let pass = worst_op.0 <= 1e-4 && worst_model.0 <= 1e-4;
    outcome(
        pass,
        format!(
            "{} ops x 50 draws, worst {:.1e} ({}); 7 models, worst {:.1e} ({:?})",
            common::OPS.len(),
            worst_op.0,
            worst_op.1,
            worst_model.0,
            worst_model.1
        ),
    )
}

fn auroc_oracle() -> Outcome {
    let mut worst = 0.0f64;
    let mut rng = rng::stream(3, 0);
    for _ in 0..1000 {
        let n = rng.random_range(2..300);
        let grid = rng.random_range(2..30);
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..grid) as f64).collect();
        let mut labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        labels[0] = 0;
        labels[1] = 1;
        worst = worst.max((auroc(&scores, &labels).unwrap() - common::pairwise_auroc(&scores, &labels)).abs());
    }
    outcome(worst <= 1e-12, format!("1000 tied vectors, max diff {worst:.1e}"))
}

fn encoder_goldens() -> Outcome {
    let mut failures = Vec::new();
    if encode_latlong(0.0, 0.0) != [1.0, 0.0, 0.0, 0.0, 0.0] {
        failures.push(format!("latlong(0,0) = {:?}", encode_latlong(0.0, 0.0)));
    }
    if encode_latlong(90.0, 0.0) != [0.0, 0.0, 1.0, 1.0, 0.0] {
        failures.push(format!("latlong(90,0) = {:?}", encode_latlong(90.0, 0.0)));
    }
    let wednesday = NaiveDate::from_ymd_opt(2024, 1, 3).unwrap().and_hms_opt(12, 0, 0).unwrap();
    let enc = DateTimeEncoder::fit([wednesday]);
    let mut v = Vec::new();
    enc.encode_into(Some(&wednesday), &mut v);
    let cos = v[datetime_layout::CYCLIC];
    if cos != (2.0 * PI * 3.0 / 7.0).cos() || (cos + 0.900969).abs() > 1e-6 {
        failures.push(format!("wednesday cos = {cos}"));
    }
    let dims = [embedding_dim(5), embedding_dim(32), embedding_dim(1000)];
    if dims != [5, 32, 32] {
        failures.push(format!("embedding dims {dims:?}"));
    }
    let cat = CategoricalEncoder::fit(["a", "b", "c"]);
    for token in [Some("a"), Some("unseen"), None] {
        let mut out = Vec::new();
        cat.one_hot_into(token, &mut out);
        if out.iter().sum::<f64>() != 1.0 {
            failures.push(format!("one-hot {token:?} sums to {}", out.iter().sum::<f64>()));
        }
    }
    for (start, len) in datetime_layout::ONE_HOT_GROUPS {
        if v[start..start + len].iter().sum::<f64>() != 1.0 {
            failures.push(format!("datetime group at {start} does not sum to 1"));
        }
    }
    let detail = if failures.is_empty() { format!("latlong, weekday cos {cos:.6}, dims {dims:?}, one-hot sums") } else { failures.join("; ") };
    outcome(failures.is_empty(), detail)
}

/// Datapoints drawn from a rotating set of fixtures, `count` in total.
fn fixture_datapoints(count: usize) -> Vec<(ModelFixture, Vec<usize>)> {
    let mut out = Vec::new();
    let mut total = 0;
    let mut seed = 0;
    while total < count {
        let fx = ModelFixture::new(seed);
        let take: Vec<usize> = (0..fx.datapoints.len().min(count - total).min(5)).collect();
        total += take.len();
        out.push((fx, take));
        seed += 1;
    }
    out
}

fn er_reduction() -> Outcome {
    let mut worst = 0.0f64;
    let mut n = 0;
    for (k, (fx, idx)) in fixture_datapoints(100).iter().enumerate() {
        for er in [Variant::Ergcn, Variant::Ergin, Variant::Ergat] {
            let base = fx.model(er.homogeneous(), 16, k as u64);
            let mut tied = fx.model(er, 16, k as u64 + 1000);
            tied.tie_from(&base).unwrap();
            for &i in idx {
                let dp = &fx.datapoints[i];
                worst = worst.max(max_abs_diff(&fx.logits(&base, &[dp]), &fx.logits(&tied, &[dp])));
            }
        }
        n += idx.len();
    }
    outcome(worst <= 1e-12, format!("{n} datapoints x 3 variants, max diff {worst:.1e}"))
}

fn permutation_invariance() -> Outcome {
    let mut worst = 0.0f64;
    let fixtures: Vec<ModelFixture> = (0..20).map(ModelFixture::new).collect();
    let mut rng = rng::stream(6, 0);
    for v in Variant::ALL {
        let models: Vec<_> = fixtures.iter().enumerate().map(|(k, fx)| fx.model(v, 16, k as u64)).collect();
        for _ in 0..100 {
            let k = rng.random_range(0..fixtures.len());
            let fx = &fixtures[k];
            let dp = &fx.datapoints[rng.random_range(0..fx.datapoints.len())];
            let mut perm: Vec<usize> = (0..dp.num_nodes()).collect();
            perm.shuffle(&mut rng);
            let moved = dp.permuted(&perm);
            worst = worst.max(max_abs_diff(&fx.logits(&models[k], &[dp]), &fx.logits(&models[k], &[&moved])));
        }
    }
    outcome(worst <= 1e-9, format!("7 variants x 100 relabelings, max diff {worst:.1e}"))
}

fn run(db: &rdbgnn::rdb::Database, model: ModelKind, seed: u64) -> RunReport {
    let mut config = ExperimentConfig::new(model, seed);
    config.dfs_depth = 1;
    run_cv(db, &config).unwrap_or_else(|e| panic!("{model}: {e}")).report
}

fn relational_signal() -> Outcome {
    let db = generate(&SynthSpec::new(Template::ParentChild, Signal::ChildAggregate, 2000, 7).with_noise(0.05)).unwrap();
    let logreg = run(&db, ModelKind::LogReg, 7);
    let gcn = run(&db, ModelKind::Gnn(Variant::Gcn), 7);
    let gin = run(&db, ModelKind::Gnn(Variant::Gin), 7);
    let dfs = run(&db, ModelKind::DfsLogReg, 7);
    let rel = |r: &RunReport| relative_auroc(&r.test_aurocs(), &logreg.test_aurocs()).unwrap().summary.mean;
    let pass = (0.40..=0.62).contains(&logreg.auroc.mean)
        && gcn.auroc.mean >= 0.90
        && gin.auroc.mean >= 0.90
        && dfs.auroc.mean >= 0.90
        && rel(&gcn) >= 0.28
        && rel(&gin) >= 0.28;
    outcome(
        pass,
        format!(
            "logreg {}, gcn {} ({:+.3}), gin {} ({:+.3}), dfs+logreg {}",
            logreg.auroc,
            gcn.auroc,
            rel(&gcn),
            gin.auroc,
            rel(&gin),
            dfs.auroc
        ),
    )
}

fn negative_control() -> Outcome {
    let db = generate(&SynthSpec::new(Template::ParentChild, Signal::SingleTable, 2000, 8).with_noise(0.05)).unwrap();
    let logreg = run(&db, ModelKind::LogReg, 8);
    let mut parts = vec![format!("logreg {}", logreg.auroc)];
    let mut pass = true;
    for v in [Variant::Gcn, Variant::Gin] {
        let r = run(&db, ModelKind::Gnn(v), 8);
        let rel = relative_auroc(&r.test_aurocs(), &logreg.test_aurocs()).unwrap().summary.mean;
        pass &= (-0.05..=0.05).contains(&rel);
        parts.push(format!("{} {} ({rel:+.3})", v.name(), r.auroc));
    }
    outcome(pass, parts.join(", "))
}

fn rdbgnn(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_rdbgnn")).args(args).output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("rdbgnn {args:?} failed: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

/// Every file under `dir` except the log and the manifest, which name their own paths.
fn artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if !matches!(p.file_name().and_then(|n| n.to_str()), Some("run.log" | "manifest.json")) {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let p = |s: &str| tmp.path().join(s).display().to_string();
    let steps = || -> Result<(), String> {
        rdbgnn(&["synth", "--out", &p("data"), "--targets", "200", "--noise", "0.05", "--seed", "3"])?;
        rdbgnn(&["train", "--dataset", &p("data"), "--model", "gin", "--max-epochs", "4", "--seed", "5", "--out", &p("a")])?;
        rdbgnn(&["train", "--manifest", &p("a/manifest.json"), "--out", &p("b")])
    };
    if let Err(e) = steps() {
        return outcome(false, e);
    }
    let (a, b) = (artifacts(&tmp.path().join("a")), artifacts(&tmp.path().join("b")));
    let checkpoints = a.iter().filter(|(name, _)| name.ends_with(".ckpt")).count();
    let same = a == b && checkpoints == 5 && a.iter().any(|(n, _)| n == "report.json");
    outcome(same, format!("{} files compared ({checkpoints} checkpoints), identical: {}", a.len(), a == b))
}

fn dfs_oracle() -> Outcome {
    let (mut checked, mut wrong) = (0usize, 0usize);
    for seed in 0..100 {
        let db = random_database(seed, 5, 60);
        for t in 0..db.tables().len() {
            let specs = enumerate_aggs(&db, t, 1, &[]);
            let rows: Vec<usize> = (0..db.table(t).len()).collect();
            let m = compute_features(&db, &specs, t, &rows).unwrap();
            for (j, spec) in specs.iter().enumerate() {
                let [Hop::Reverse { table, column }] = spec.path[..] else { continue };
                let oracle = common::group_by(&db, table, column, db.table(table).column_index("x").unwrap());
                for (r, &(count, sum)) in oracle.iter().enumerate() {
                    let want = match spec.agg {
                        Agg::Count => CellValue::Scalar(count as f64),
                        Agg::Sum => sum.map_or(CellValue::Null, CellValue::Scalar),
                        _ => continue,
                    };
                    checked += 1;
                    wrong += usize::from(m.rows[r][j] != want);
                }
            }
        }
    }
    outcome(wrong == 0 && checked > 0, format!("{checked} SUM/COUNT cells on 100 databases, {wrong} mismatches"))
}

fn main() {
    let minute = Duration::from_secs(60);
    let criteria: [Criterion; 10] = [
        ("closure oracle", closure_oracle, minute),
        ("gradient suite", gradient_suite, 5 * minute),
        ("auroc oracle", auroc_oracle, Duration::from_secs(10)),
        ("encoder goldens", encoder_goldens, minute),
        ("er reduction", er_reduction, 5 * minute),
        ("permutation invariance", permutation_invariance, 5 * minute),
        ("relational signal", relational_signal, 10 * minute),
        ("negative control", negative_control, 10 * minute),
        ("determinism", determinism, 5 * minute),
        ("dfs oracle", dfs_oracle, minute),
    ];
    let mut failed = 0;
    for (i, (name, check, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        let elapsed = start.elapsed();
        let o = within(o, elapsed, *limit);
        failed += usize::from(!o.pass);
        println!(
            "criterion {:>2} {} {name}: {} [{:.1}s]",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            elapsed.as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
