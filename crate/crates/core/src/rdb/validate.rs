use std::collections::HashSet;

use serde::Serialize;

use super::{remove_target_column, ColumnKind, Database, KindTag, RdbError};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub tables: Vec<TableReport>,
    pub foreign_keys: Vec<FkReport>,
    /// `Table.column` of the target.
    pub target: String,
    pub dangling: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableReport {
    pub name: String,
    pub rows: usize,
    pub columns: Vec<ColumnReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColumnReport {
    pub name: String,
    pub kind: KindTag,
    pub null_rate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cardinality: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FkReport {
    pub column: String,
    pub references: String,
    pub non_null: usize,
    pub resolved: usize,
    pub resolution_rate: f64,
}

pub fn validate_schema(db: &Database) -> Result<ValidationReport, RdbError> {
    let target = db.target()?;
    // Fails on a non-binary target.
    remove_target_column(db)?;

    let tables = db
        .tables()
        .iter()
        .map(|t| TableReport {
            name: t.name.clone(),
            rows: t.len(),
            columns: t
                .columns
                .iter()
                .enumerate()
                .map(|(c, spec)| {
                    let nulls = t.rows.iter().filter(|r| r[c].is_null()).count();
                    let cardinality = (spec.kind == ColumnKind::Categorical).then(|| {
                        t.rows.iter().filter_map(|r| r[c].as_str()).collect::<HashSet<_>>().len()
                    });
                    ColumnReport {
                        name: spec.name.clone(),
                        kind: spec.kind.tag(),
                        null_rate: if t.is_empty() { 0.0 } else { nulls as f64 / t.len() as f64 },
                        cardinality,
                    }
                })
                .collect(),
        })
        .collect();

    let foreign_keys = db
        .foreign_keys()
        .iter()
        .map(|fk| {
            let t = db.table(fk.table);
            let non_null = t.rows.iter().filter(|r| !r[fk.column].is_null()).count();
            let resolved = fk.resolved.iter().filter(|r| r.is_some()).count();
            FkReport {
                column: db.column_name(fk.table, fk.column),
                references: db.column_name(fk.ref_table, fk.ref_column),
                non_null,
                resolved,
                resolution_rate: if non_null == 0 { 1.0 } else { resolved as f64 / non_null as f64 },
            }
        })
        .collect();

    Ok(ValidationReport {
        tables,
        foreign_keys,
        target: db.column_name(target.table, target.column),
        dangling: db.dangling().len(),
    })
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "tables: {}", self.tables.len())?;
        for t in &self.tables {
            writeln!(f, "  {} ({} rows)", t.name, t.rows)?;
            for c in &t.columns {
                write!(f, "    {:<24} {:<12} null {:.3}", c.name, format!("{:?}", c.kind), c.null_rate)?;
                if let Some(k) = c.cardinality {
                    write!(f, " cardinality {k}")?;
                }
                writeln!(f)?;
            }
        }
        for fk in &self.foreign_keys {
            writeln!(f, "fk {} -> {}: {}/{} resolved", fk.column, fk.references, fk.resolved, fk.non_null)?;
        }
        writeln!(f, "target: {}", self.target)?;
        write!(f, "dangling references: {}", self.dangling)
    }
}
