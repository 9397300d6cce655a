//! Relational database model: typed tables, foreign keys and a target column.
//!
//! A [`Database`] is immutable once built. Every foreign-key cell is resolved
//! to a row index of the referenced table at construction time; in non-strict
//! mode dangling references are kept as unresolved (and reported) instead of
//! failing the load.

mod cell;
mod io;
mod mask;
mod schema;
mod validate;

use std::collections::{HashMap, HashSet};
use std::path::PathBuf;

pub use cell::{parse_datetime, CellValue};
pub use io::{load_database, write_database};
pub use mask::{remove_target_column, CellSource, LabelMap, MaskedDatabase};
pub use schema::{ColumnEntry, ColumnKind, ColumnRef, ColumnSpec, KindTag, SchemaFile, TableEntry};
pub use validate::{validate_schema, ColumnReport, FkReport, TableReport, ValidationReport};

#[derive(Debug, thiserror::Error)]
pub enum RdbError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: invalid schema: {source}")]
    SchemaJson { path: PathBuf, source: serde_json::Error },
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error("duplicate table name {0:?}")]
    DuplicateTable(String),
    #[error("duplicate column {table}.{column}")]
    DuplicateColumn { table: String, column: String },
    #[error("{table}.{column} references unknown column {target}")]
    UnknownReference { table: String, column: String, target: String },
    #[error("{table}.{column} references {target}, which is not a primary key")]
    ReferenceNotKey { table: String, column: String, target: String },
    #[error("{table}: declared column {column:?} missing from CSV header")]
    MissingColumn { table: String, column: String },
    #[error("{table}: undeclared column {column:?} in CSV header")]
    UndeclaredColumn { table: String, column: String },
    #[error("{table}: row {row} has {found} fields, expected {expected}")]
    RowWidth { table: String, row: usize, found: usize, expected: usize },
    #[error("{table} row {row} column {column}: {reason}")]
    BadCell { table: String, row: usize, column: String, reason: String },
    #[error("{table}.{column}: duplicate key {value:?}")]
    DuplicateKey { table: String, column: String, value: String },
    #[error("{table} row {row} column {column}: dangling reference {value:?}")]
    Dangling { table: String, row: usize, column: String, value: String },
    #[error("no target column")]
    NoTarget,
    #[error("multiple target columns: {0:?}")]
    MultipleTargets(Vec<String>),
    #[error("target column {0} must be categorical")]
    TargetNotCategorical(String),
    #[error("target column {column} has {cardinality} distinct values, expected 2")]
    TargetNotBinary { column: String, cardinality: usize },
}

/// Location of the target column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TargetRef {
    pub table: usize,
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    /// CSV file name relative to the dataset root.
    pub file: String,
    pub columns: Vec<ColumnSpec>,
    pub rows: Vec<Vec<CellValue>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: Vec<ColumnSpec>) -> Self {
        let name = name.into();
        let file = format!("{}.csv", name.to_lowercase());
        Table { name, file, columns, rows: Vec::new() }
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// A resolved foreign-key column.
#[derive(Debug, Clone, PartialEq)]
pub struct ForeignKey {
    pub table: usize,
    pub column: usize,
    pub ref_table: usize,
    pub ref_column: usize,
    /// Referenced row per row of `table`; `None` for null or dangling cells.
    pub resolved: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DanglingRef {
    pub table: String,
    pub row: usize,
    pub column: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Database {
    tables: Vec<Table>,
    foreign_keys: Vec<ForeignKey>,
    dangling: Vec<DanglingRef>,
    strict: bool,
}

impl Database {
    /// Checks names, cell kinds and key integrity, then resolves foreign keys.
    pub fn new(tables: Vec<Table>, strict: bool) -> Result<Database, RdbError> {
        let mut names = HashSet::new();
        for t in &tables {
            if !names.insert(t.name.as_str()) {
                return Err(RdbError::DuplicateTable(t.name.clone()));
            }
            let mut cols = HashSet::new();
            for c in &t.columns {
                if !cols.insert(c.name.as_str()) {
                    return Err(RdbError::DuplicateColumn { table: t.name.clone(), column: c.name.clone() });
                }
            }
            for (r, cells) in t.rows.iter().enumerate() {
                if cells.len() != t.columns.len() {
                    return Err(RdbError::RowWidth {
                        table: t.name.clone(),
                        row: r,
                        found: cells.len(),
                        expected: t.columns.len(),
                    });
                }
                for (c, cell) in cells.iter().enumerate() {
                    if !cell.fits(&t.columns[c].kind) {
                        return Err(RdbError::BadCell {
                            table: t.name.clone(),
                            row: r,
                            column: t.columns[c].name.clone(),
                            reason: format!("value {cell:?} does not match kind {:?}", t.columns[c].kind.tag()),
                        });
                    }
                }
            }
        }

        // Primary-key indices, keyed by (table, column).
        let mut key_index: HashMap<(usize, usize), HashMap<&str, usize>> = HashMap::new();
        for (ti, t) in tables.iter().enumerate() {
            for (ci, c) in t.columns.iter().enumerate() {
                if c.kind != ColumnKind::PrimaryKey {
                    continue;
                }
                let mut index = HashMap::with_capacity(t.rows.len());
                for (r, row) in t.rows.iter().enumerate() {
                    if let Some(k) = row[ci].as_str() {
                        if index.insert(k, r).is_some() {
                            return Err(RdbError::DuplicateKey {
                                table: t.name.clone(),
                                column: c.name.clone(),
                                value: k.to_string(),
                            });
                        }
                    }
                }
                key_index.insert((ti, ci), index);
            }
        }

        let mut foreign_keys = Vec::new();
        let mut dangling = Vec::new();
        for (ti, t) in tables.iter().enumerate() {
            for (ci, c) in t.columns.iter().enumerate() {
                let ColumnKind::ForeignKey(r) = &c.kind else { continue };
                let target = format!("{}.{}", r.table, r.column);
                let unknown = || RdbError::UnknownReference {
                    table: t.name.clone(),
                    column: c.name.clone(),
                    target: target.clone(),
                };
                let rt = tables.iter().position(|x| x.name == r.table).ok_or_else(unknown)?;
                let rc = tables[rt].column_index(&r.column).ok_or_else(unknown)?;
                let index = key_index.get(&(rt, rc)).ok_or_else(|| RdbError::ReferenceNotKey {
                    table: t.name.clone(),
                    column: c.name.clone(),
                    target: target.clone(),
                })?;
                let mut resolved = Vec::with_capacity(t.rows.len());
                for (row_idx, row) in t.rows.iter().enumerate() {
                    let Some(k) = row[ci].as_str() else {
                        resolved.push(None);
                        continue;
                    };
                    match index.get(k) {
                        Some(&hit) => resolved.push(Some(hit)),
                        None if strict => {
                            return Err(RdbError::Dangling {
                                table: t.name.clone(),
                                row: row_idx,
                                column: c.name.clone(),
                                value: k.to_string(),
                            })
                        }
                        None => {
                            log::warn!("{} row {row_idx} column {}: dangling reference {k:?}", t.name, c.name);
                            dangling.push(DanglingRef {
                                table: t.name.clone(),
                                row: row_idx,
                                column: c.name.clone(),
                                value: k.to_string(),
                            });
                            resolved.push(None);
                        }
                    }
                }
                foreign_keys.push(ForeignKey { table: ti, column: ci, ref_table: rt, ref_column: rc, resolved });
            }
        }

        Ok(Database { tables, foreign_keys, dangling, strict })
    }

    pub fn tables(&self) -> &[Table] {
        &self.tables
    }

    pub fn table(&self, t: usize) -> &Table {
        &self.tables[t]
    }

    pub fn table_index(&self, name: &str) -> Option<usize> {
        self.tables.iter().position(|t| t.name == name)
    }

    pub fn row_counts(&self) -> Vec<usize> {
        self.tables.iter().map(Table::len).collect()
    }

    /// Foreign keys in (table, column) order.
    pub fn foreign_keys(&self) -> &[ForeignKey] {
        &self.foreign_keys
    }

    pub fn foreign_key(&self, table: usize, column: usize) -> Option<&ForeignKey> {
        self.foreign_keys.iter().find(|f| f.table == table && f.column == column)
    }

    pub fn dangling(&self) -> &[DanglingRef] {
        &self.dangling
    }

    pub fn is_strict(&self) -> bool {
        self.strict
    }

    pub fn cell(&self, table: usize, row: usize, column: usize) -> &CellValue {
        &self.tables[table].rows[row][column]
    }

    /// The unique column flagged as target.
    pub fn target(&self) -> Result<TargetRef, RdbError> {
        let flagged: Vec<(usize, usize)> = self
            .tables
            .iter()
            .enumerate()
            .flat_map(|(t, tab)| tab.columns.iter().enumerate().filter(|(_, c)| c.target).map(move |(c, _)| (t, c)))
            .collect();
        match flagged.as_slice() {
            [] => Err(RdbError::NoTarget),
            [(t, c)] => {
                let col = &self.tables[*t].columns[*c];
                if col.kind != ColumnKind::Categorical {
                    return Err(RdbError::TargetNotCategorical(self.column_name(*t, *c)));
                }
                Ok(TargetRef { table: *t, column: *c })
            }
            many => Err(RdbError::MultipleTargets(many.iter().map(|&(t, c)| self.column_name(t, c)).collect())),
        }
    }

    /// `Table.column`
    pub fn column_name(&self, table: usize, column: usize) -> String {
        format!("{}.{}", self.tables[table].name, self.tables[table].columns[column].name)
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn resolves_foreign_keys() {
        let db = patient_visit();
        assert_eq!(db.row_counts(), vec![2, 1, 3]);
        let fk = db.foreign_key(2, 1).unwrap();
        assert_eq!(fk.resolved, vec![Some(0), Some(0), Some(1)]);
        let doc = db.foreign_key(2, 2).unwrap();
        assert_eq!(doc.resolved, vec![Some(0), None, Some(0)]);
        assert_eq!(db.target().unwrap(), TargetRef { table: 0, column: 2 });
    }

    #[test]
    fn dangling_strict_vs_lenient() {
        let db = patient_visit();
        let mut tables = db.tables().to_vec();
        tables[2].rows[2][1] = CellValue::Key("p9".into());
        let err = Database::new(tables.clone(), true).unwrap_err();
        match err {
            RdbError::Dangling { table, row, column, value } => {
                assert_eq!((table.as_str(), row, column.as_str(), value.as_str()), ("Visit", 2, "patient_id", "p9"));
            }
            e => panic!("unexpected {e}"),
        }
        let lenient = Database::new(tables, false).unwrap();
        assert_eq!(lenient.dangling().len(), 1);
        assert_eq!(lenient.foreign_key(2, 1).unwrap().resolved[2], None);
    }

    #[test]
    fn duplicate_primary_key_rejected() {
        let mut tables = patient_visit().tables().to_vec();
        tables[0].rows[1][0] = CellValue::Key("p1".into());
        assert!(matches!(Database::new(tables, true), Err(RdbError::DuplicateKey { .. })));
    }

    #[test]
    fn reference_must_target_primary_key() {
        let mut tables = patient_visit().tables().to_vec();
        tables[2].columns[1] = ColumnSpec::foreign_key("patient_id", "Patient", "age");
        assert!(matches!(Database::new(tables, true), Err(RdbError::ReferenceNotKey { .. })));
    }

    #[test]
    fn target_count_checked() {
        let mut tables = patient_visit().tables().to_vec();
        tables[0].columns[2].target = false;
        assert!(matches!(Database::new(tables.clone(), true).unwrap().target(), Err(RdbError::NoTarget)));
        tables[0].columns[2].target = true;
        tables[2].columns[3].target = true;
        assert!(matches!(Database::new(tables, true).unwrap().target(), Err(RdbError::MultipleTargets(_))));
    }
}
