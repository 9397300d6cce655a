mod common;

use std::collections::BTreeSet;
use std::time::Instant;

use proptest::prelude::*;
use rdbgnn::graph::{database_to_graph, NodeId};
use rdbgnn::rdb::{remove_target_column, CellValue, ColumnKind, ColumnSpec, Database, Table};
use rdbgnn::sampler::{batch_sample, rdb_to_graph, SampleOptions};
use rdbgnn::synth::{generate, random_database, Signal, SynthSpec, Template};

fn nodes(dp: &rdbgnn::sampler::Datapoint) -> BTreeSet<NodeId> {
    dp.nodes.iter().copied().collect()
}

#[test]
fn closure_matches_oracle_on_many_databases() {
    let opts = SampleOptions::default();
    for seed in 0..300 {
        let db = random_database(seed, 6, 200);
        let g = database_to_graph(&db);
        for t in 0..db.tables().len() {
            for row in (0..db.table(t).len()).step_by(17) {
                let target = NodeId::new(t, row);
                let dp = rdb_to_graph(&g, target, &opts).unwrap();
                let want = common::closure_oracle(&db, target);
                assert_eq!(nodes(&dp), want, "seed {seed} target {target:?}");
                assert_eq!(common::datapoint_fk_edges(&dp), common::induced_edges(&db, &want));
                assert_eq!(dp.target_node(), target);
            }
        }
    }
}

/// Appends a table with no foreign keys in either direction.
fn with_island(db: &Database) -> Database {
    let mut tables = db.tables().to_vec();
    let mut island = Table::new("Island", vec![ColumnSpec::new("id", ColumnKind::PrimaryKey), ColumnSpec::new("v", ColumnKind::Scalar)]);
    island.rows = (0..5).map(|i| vec![CellValue::Key(format!("i{i}")), CellValue::Scalar(i as f64)]).collect();
    tables.push(island);
    Database::new(tables, true).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn unreachable_table_changes_nothing(seed in any::<u64>()) {
        let db = random_database(seed, 5, 60);
        let bigger = with_island(&db);
        let (g1, g2) = (database_to_graph(&db), database_to_graph(&bigger));
        for row in 0..db.table(0).len() {
            let a = rdb_to_graph(&g1, NodeId::new(0, row), &SampleOptions::default()).unwrap();
            let b = rdb_to_graph(&g2, NodeId::new(0, row), &SampleOptions::default()).unwrap();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn batch_equals_individual(seed in any::<u64>()) {
        let db = random_database(seed, 5, 60);
        let m = remove_target_column(&db).unwrap();
        let g = database_to_graph(&db);
        let rows: Vec<usize> = (0..db.table(0).len()).rev().collect();
        let batch = batch_sample(&g, 0, &rows, m.labels(), &SampleOptions::default()).unwrap();
        for (dp, &row) in batch.iter().zip(&rows) {
            let mut single = rdb_to_graph(&g, NodeId::new(0, row), &SampleOptions::default()).unwrap();
            single.label = m.labels()[row];
            prop_assert_eq!(dp, &single);
        }
    }

    #[test]
    fn permutation_is_a_relabeling(seed in any::<u64>(), shift in 1usize..50) {
        let db = random_database(seed, 5, 60);
        let g = database_to_graph(&db);
        let dp = rdb_to_graph(&g, NodeId::new(0, 0), &SampleOptions::default()).unwrap();
        let n = dp.num_nodes();
        let perm: Vec<usize> = (0..n).map(|i| (i * 7 + shift) % n).collect();
        if perm.iter().collect::<BTreeSet<_>>().len() != n {
            return Ok(());
        }
        let p = dp.permuted(&perm);
        prop_assert_eq!(nodes(&p), nodes(&dp));
        prop_assert_eq!(p.target_node(), dp.target_node());
        prop_assert_eq!(common::datapoint_fk_edges(&p), common::datapoint_fk_edges(&dp));
        prop_assert_eq!(p.edges.len(), dp.edges.len());
    }

    #[test]
    fn target_label_is_masked_in_features(seed in 0u64..1000) {
        let fx = common::ModelFixture::new(seed);
        let m = remove_target_column(&fx.db).unwrap();
        let t = m.target();
        // Rebuild features with the label column flipped: node features must not move.
        let mut flipped = fx.db.tables().to_vec();
        for row in &mut flipped[t.table].rows {
            if let CellValue::Categorical(s) = &row[t.column] {
                row[t.column] = CellValue::Categorical(if s == "1" { "0".into() } else { "1".into() });
            }
        }
        let other = common::ModelFixture::from_database(Database::new(flipped, true).unwrap());
        prop_assert_eq!(&fx.features, &other.features);
    }
}

/// Median wall time of sampling every target of a parent/child database.
fn sample_time(n: usize) -> (f64, usize) {
    let db = generate(&SynthSpec::new(Template::ThreeLevel, Signal::SingleTable, n, 3)).unwrap();
    let g = database_to_graph(&db);
    let m = remove_target_column(&db).unwrap();
    let rows: Vec<usize> = (0..n).collect();
    let mut times = Vec::new();
    let mut size = 0;
    for _ in 0..5 {
        let start = Instant::now();
        let dps = batch_sample(&g, 0, &rows, m.labels(), &SampleOptions::default()).unwrap();
        times.push(start.elapsed().as_secs_f64());
        size = dps.iter().map(|d| d.num_nodes() + d.edges.len()).sum();
    }
    times.sort_by(f64::total_cmp);
    (times[2], size)
}

#[test]
fn sampling_time_is_linear_in_output_size() {
    let points: Vec<(f64, usize)> = [20, 200, 2000, 20000].iter().map(|&n| sample_time(n)).collect();
    // Least-squares slope through the origin.
    let slope = points.iter().map(|&(t, s)| t * s as f64).sum::<f64>() / points.iter().map(|&(_, s)| (s as f64).powi(2)).sum::<f64>();
    for &(t, s) in &points[1..] {
        let fit = slope * s as f64;
        assert!(t <= 2.0 * fit && t >= fit / 2.0, "time {t:.5}s for size {s}; linear fit {fit:.5}s; all {points:?}");
    }
}
