//! Depth-limited feature synthesis over foreign-key paths.
//!
//! Paths start at the target table. A forward hop follows a foreign key to the
//! referenced row; a reverse hop collects every row referencing the current
//! one. Paths containing a reverse hop reach a multiset of rows and yield
//! COUNT plus SUM/MEAN/MAX/MIN of each scalar column. Purely forward paths
//! reach at most one row and copy its scalar and categorical values.

use std::io::Write;

use serde::Serialize;

use crate::rdb::{CellSource, CellValue, ColumnKind, ColumnSpec, Database, Table};

pub const DEFAULT_MAX_DEPTH: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Hop {
    /// From rows of `table` to the rows their `column` references.
    Forward { table: usize, column: usize },
    /// From referenced rows to the rows of `table` whose `column` points at them.
    Reverse { table: usize, column: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Agg {
    Count,
    Sum,
    Mean,
    Max,
    Min,
    Copy,
}

impl Agg {
    pub fn name(self) -> &'static str {
        match self {
            Agg::Count => "count",
            Agg::Sum => "sum",
            Agg::Mean => "mean",
            Agg::Max => "max",
            Agg::Min => "min",
            Agg::Copy => "copy",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AggSpec {
    pub path: Vec<Hop>,
    /// Source column in the path's end table; `None` for COUNT.
    pub column: Option<usize>,
    pub agg: Agg,
    /// `path__agg__column`
    pub name: String,
}

impl AggSpec {
    pub fn depth(&self) -> usize {
        self.path.len()
    }

    fn output_kind(&self, db: &Database) -> ColumnKind {
        match (self.agg, self.column) {
            (Agg::Copy, Some(c)) => db.table(end_table(db, self.path.last()).unwrap_or(0)).columns[c].kind.clone(),
            _ => ColumnKind::Scalar,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DfsError {
    #[error("feature {name}: expected a scalar cell, found {found:?}")]
    TypeMismatch { name: String, found: CellValue },
    #[error("row {row} out of range for table {table} with {len} rows")]
    Row { table: String, row: usize, len: usize },
}

fn end_table(db: &Database, hop: Option<&Hop>) -> Option<usize> {
    hop.map(|h| match *h {
        Hop::Forward { table, column } => db.foreign_key(table, column).expect("hop follows a foreign key").ref_table,
        Hop::Reverse { table, .. } => table,
    })
}

fn hop_name(db: &Database, hop: &Hop) -> String {
    match *hop {
        Hop::Forward { table, column } => db.column_name(table, column),
        Hop::Reverse { table, column } => format!("{}~rev", db.column_name(table, column)),
    }
}

fn reversed(h: Hop) -> Hop {
    match h {
        Hop::Forward { table, column } => Hop::Reverse { table, column },
        Hop::Reverse { table, column } => Hop::Forward { table, column },
    }
}

/// All paths of length `1..=max_depth` from `start`, without immediately undoing a hop.
fn paths(db: &Database, start: usize, max_depth: usize) -> Vec<Vec<Hop>> {
    let mut out = Vec::new();
    let mut frontier: Vec<(Vec<Hop>, usize)> = vec![(Vec::new(), start)];
    for _ in 0..max_depth {
        let mut next = Vec::new();
        for (path, at) in &frontier {
            for fk in db.foreign_keys() {
                let mut steps = Vec::new();
                if fk.table == *at {
                    steps.push((Hop::Forward { table: fk.table, column: fk.column }, fk.ref_table));
                }
                if fk.ref_table == *at {
                    steps.push((Hop::Reverse { table: fk.table, column: fk.column }, fk.table));
                }
                for (hop, to) in steps {
                    if path.last().is_some_and(|&last| last == reversed(hop)) {
                        continue;
                    }
                    let mut p = path.clone();
                    p.push(hop);
                    next.push((p, to));
                }
            }
        }
        out.extend(next.iter().map(|(p, _)| p.clone()));
        frontier = next;
    }
    out
}

/// Feature specs for rows of `target_table`; `skip` lists (table, column) pairs never used as sources.
pub fn enumerate_aggs(db: &Database, target_table: usize, max_depth: usize, skip: &[(usize, usize)]) -> Vec<AggSpec> {
    let mut specs = Vec::new();
    for path in paths(db, target_table, max_depth) {
        let end = end_table(db, path.last()).expect("non-empty path");
        let prefix = path.iter().map(|h| hop_name(db, h)).collect::<Vec<_>>().join("/");
        let multi = path.iter().any(|h| matches!(h, Hop::Reverse { .. }));
        let columns = db.table(end).columns.iter().enumerate().filter(|(c, _)| !skip.contains(&(end, *c)));
        if multi {
            specs.push(AggSpec { path: path.clone(), column: None, agg: Agg::Count, name: format!("{prefix}__count__rows") });
            for (c, col) in columns {
                if col.kind == ColumnKind::Scalar {
                    for agg in [Agg::Sum, Agg::Mean, Agg::Max, Agg::Min] {
                        let name = format!("{prefix}__{}__{}", agg.name(), col.name);
                        specs.push(AggSpec { path: path.clone(), column: Some(c), agg, name });
                    }
                }
            }
        } else {
            for (c, col) in columns {
                if matches!(col.kind, ColumnKind::Scalar | ColumnKind::Categorical) {
                    let name = format!("{prefix}__copy__{}", col.name);
                    specs.push(AggSpec { path: path.clone(), column: Some(c), agg: Agg::Copy, name });
                }
            }
        }
    }
    specs
}

/// Flat feature table, one row per requested target row.
#[derive(Debug, Clone, PartialEq)]
pub struct DfsMatrix {
    pub columns: Vec<ColumnSpec>,
    pub rows: Vec<Vec<CellValue>>,
}

impl DfsMatrix {
    pub fn to_table(&self, name: &str) -> Table {
        let mut t = Table::new(name, self.columns.clone());
        t.rows = self.rows.clone();
        t
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.columns.iter().map(|c| c.name.as_str()))?;
        for row in &self.rows {
            w.write_record(row.iter().map(CellValue::to_field))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Children of each referenced row, per foreign key.
fn reverse_index(db: &Database) -> Vec<Vec<Vec<usize>>> {
    db.foreign_keys()
        .iter()
        .map(|fk| {
            let mut children = vec![Vec::new(); db.table(fk.ref_table).len()];
            for (r, target) in fk.resolved.iter().enumerate() {
                if let Some(p) = target {
                    children[*p].push(r);
                }
            }
            children
        })
        .collect()
}

pub fn compute_features(source: &dyn CellSource, specs: &[AggSpec], target_table: usize, rows: &[usize]) -> Result<DfsMatrix, DfsError> {
    let db = source.database();
    let n = db.table(target_table).len();
    if let Some(&row) = rows.iter().find(|&&r| r >= n) {
        return Err(DfsError::Row { table: db.table(target_table).name.clone(), row, len: n });
    }
    let children = reverse_index(db);
    let fk_index = |table: usize, column: usize| {
        db.foreign_keys().iter().position(|f| f.table == table && f.column == column).expect("hop follows a foreign key")
    };
    let columns = specs.iter().map(|s| ColumnSpec::new(s.name.clone(), s.output_kind(db))).collect();
    let mut out = Vec::with_capacity(rows.len());
    for &row in rows {
        let mut cells = Vec::with_capacity(specs.len());
        let mut cached: Option<(&[Hop], Vec<usize>)> = None;
        for spec in specs {
            let reached = match &cached {
                Some((p, r)) if *p == spec.path.as_slice() => r.clone(),
                _ => {
                    let mut cur = vec![row];
                    for hop in &spec.path {
                        cur = match *hop {
                            Hop::Forward { table, column } => {
                                let fk = &db.foreign_keys()[fk_index(table, column)];
                                cur.iter().filter_map(|&r| fk.resolved[r]).collect()
                            }
                            Hop::Reverse { table, column } => {
                                let kids = &children[fk_index(table, column)];
                                cur.iter().flat_map(|&r| kids[r].iter().copied()).collect()
                            }
                        };
                    }
                    cached = Some((&spec.path, cur.clone()));
                    cur
                }
            };
            let end = end_table(db, spec.path.last()).expect("non-empty path");
            cells.push(aggregate(source, spec, end, &reached)?);
        }
        out.push(cells);
    }
    Ok(DfsMatrix { columns, rows: out })
}

fn aggregate(source: &dyn CellSource, spec: &AggSpec, table: usize, reached: &[usize]) -> Result<CellValue, DfsError> {
    if spec.agg == Agg::Count {
        return Ok(CellValue::Scalar(reached.len() as f64));
    }
    let column = spec.column.expect("non-count spec has a column");
    if spec.agg == Agg::Copy {
        return Ok(reached.first().map_or(CellValue::Null, |&r| source.cell(table, r, column).clone()));
    }
    let mut values = Vec::with_capacity(reached.len());
    for &r in reached {
        match source.cell(table, r, column) {
            CellValue::Scalar(x) => values.push(*x),
            CellValue::Null => {}
            other => return Err(DfsError::TypeMismatch { name: spec.name.clone(), found: other.clone() }),
        }
    }
    if values.is_empty() {
        return Ok(CellValue::Null);
    }
    let sum: f64 = values.iter().sum();
    Ok(CellValue::Scalar(match spec.agg {
        Agg::Sum => sum,
        Agg::Mean => sum / values.len() as f64,
        Agg::Max => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        Agg::Min => values.iter().copied().fold(f64::INFINITY, f64::min),
        Agg::Count | Agg::Copy => unreachable!(),
    }))
}
