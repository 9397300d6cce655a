mod common;

use rdbgnn::dfs::{compute_features, enumerate_aggs, Agg, Hop};
use rdbgnn::rdb::{CellValue, ColumnKind, ColumnSpec, Database, Table};
use rdbgnn::synth::{generate, random_database, Signal, SynthSpec, Template};

#[test]
fn depth_one_count_and_sum_match_group_by() {
    let mut checked = 0;
    for seed in 0..100 {
        let db = random_database(seed, 5, 40);
        for t in 0..db.tables().len() {
            let specs = enumerate_aggs(&db, t, 1, &[]);
            let rows: Vec<usize> = (0..db.table(t).len()).collect();
            let m = compute_features(&db, &specs, t, &rows).unwrap();
            for (j, spec) in specs.iter().enumerate() {
                let [Hop::Reverse { table, column }] = spec.path[..] else { continue };
                let value = db.table(table).column_index("x").unwrap();
                let oracle = common::group_by(&db, table, column, value);
                for (r, &(count, sum)) in oracle.iter().enumerate() {
                    let got = &m.rows[r][j];
                    match spec.agg {
                        Agg::Count => assert_eq!(got, &CellValue::Scalar(count as f64), "seed {seed} {}", spec.name),
                        Agg::Sum => assert_eq!(got, &sum.map_or(CellValue::Null, CellValue::Scalar), "seed {seed} {}", spec.name),
                        _ => continue,
                    }
                    checked += 1;
                }
            }
        }
    }
    assert!(checked > 1000, "only {checked} cells compared");
}

fn with_island(db: &Database) -> Database {
    let mut tables = db.tables().to_vec();
    let mut island = Table::new("Island", vec![ColumnSpec::new("id", ColumnKind::PrimaryKey), ColumnSpec::new("v", ColumnKind::Scalar)]);
    island.rows = (0..4).map(|i| vec![CellValue::Key(format!("i{i}")), CellValue::Scalar(i as f64)]).collect();
    tables.push(island);
    Database::new(tables, true).unwrap()
}

#[test]
fn unrelated_table_adds_no_features() {
    for seed in 0..30 {
        let db = random_database(seed, 4, 30);
        let bigger = with_island(&db);
        let rows: Vec<usize> = (0..db.table(0).len()).collect();
        let a = enumerate_aggs(&db, 0, 2, &[]);
        let b = enumerate_aggs(&bigger, 0, 2, &[]);
        assert_eq!(a, b);
        assert_eq!(compute_features(&db, &a, 0, &rows).unwrap(), compute_features(&bigger, &b, 0, &rows).unwrap());
    }
}

#[test]
fn requested_row_order_is_kept() {
    let db = generate(&SynthSpec::new(Template::ThreeLevel, Signal::GrandchildAggregate, 30, 2)).unwrap();
    let specs = enumerate_aggs(&db, 0, 2, &[(0, 1)]);
    let forward: Vec<usize> = (0..30).collect();
    let backward: Vec<usize> = forward.iter().rev().copied().collect();
    let a = compute_features(&db, &specs, 0, &forward).unwrap();
    let b = compute_features(&db, &specs, 0, &backward).unwrap();
    for r in 0..30 {
        assert_eq!(a.rows[r], b.rows[29 - r]);
    }
}

#[test]
fn grandchild_aggregate_needs_depth_two() {
    let db = generate(&SynthSpec::new(Template::ThreeLevel, Signal::GrandchildAggregate, 30, 2)).unwrap();
    let name = "Child.parent_id~rev/Grandchild.child_id~rev__sum__amount";
    let shallow = enumerate_aggs(&db, 0, 1, &[(0, 1)]);
    assert!(shallow.iter().all(|s| s.name != name));
    let deep = enumerate_aggs(&db, 0, 2, &[(0, 1)]);
    let j = deep.iter().position(|s| s.name == name).expect("grandchild sum enumerated");
    let m = compute_features(&db, &deep, 0, &(0..30).collect::<Vec<_>>()).unwrap();
    let per_child = common::group_by(&db, 2, 1, 2);
    // Sum grandchild amounts per parent through the child table.
    let mut want = vec![0.0; 30];
    for (c, row) in db.table(1).rows.iter().enumerate() {
        let CellValue::Key(p) = &row[1] else { unreachable!() };
        let p: usize = p[1..].parse().unwrap();
        want[p] += per_child[c].1.unwrap_or(0.0);
    }
    for (r, w) in want.iter().enumerate() {
        assert_eq!(m.rows[r][j], CellValue::Scalar(*w));
    }
}
