use super::{CellValue, Database, RdbError, TargetRef};

static NULL_CELL: CellValue = CellValue::Null;

/// Read access to table cells.
pub trait CellSource {
    fn database(&self) -> &Database;

    fn cell(&self, table: usize, row: usize, column: usize) -> &CellValue;

    fn row(&self, table: usize, row: usize) -> Vec<&CellValue> {
        (0..self.database().table(table).columns.len()).map(|c| self.cell(table, row, c)).collect()
    }

    fn column(&self, table: usize, column: usize) -> Vec<&CellValue> {
        (0..self.database().table(table).len()).map(|r| self.cell(table, r, column)).collect()
    }
}

impl CellSource for Database {
    fn database(&self) -> &Database {
        self
    }

    fn cell(&self, table: usize, row: usize, column: usize) -> &CellValue {
        Database::cell(self, table, row, column)
    }
}

/// Maps the two target tokens to `{0, 1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    pub negative: String,
    pub positive: String,
}

impl LabelMap {
    const KNOWN: [(&'static str, &'static str); 4] = [("0", "1"), ("false", "true"), ("no", "yes"), ("negative", "positive")];

    /// Well-known binary token pairs map naturally; anything else maps in sorted order.
    pub fn infer(tokens: &[&str]) -> Result<LabelMap, usize> {
        let mut distinct: Vec<&str> = tokens.to_vec();
        distinct.sort_unstable();
        distinct.dedup();
        if distinct.len() > 2 {
            return Err(distinct.len());
        }
        for (neg, pos) in Self::KNOWN {
            if distinct.iter().all(|t| t.eq_ignore_ascii_case(neg) || t.eq_ignore_ascii_case(pos)) {
                let pick = |want: &str| {
                    distinct.iter().find(|t| t.eq_ignore_ascii_case(want)).map(|s| s.to_string()).unwrap_or_else(|| want.to_string())
                };
                return Ok(LabelMap { negative: pick(neg), positive: pick(pos) });
            }
        }
        match distinct.as_slice() {
            [a, b] => Ok(LabelMap { negative: a.to_string(), positive: b.to_string() }),
            [a] => Ok(LabelMap { negative: a.to_string(), positive: String::new() }),
            _ => Ok(LabelMap { negative: "0".into(), positive: "1".into() }),
        }
    }

    pub fn label(&self, token: &str) -> Option<u8> {
        if token == self.positive {
            Some(1)
        } else if token == self.negative {
            Some(0)
        } else {
            None
        }
    }
}

/// View of a database whose target column reads as null everywhere.
/// Labels are reachable only through [`MaskedDatabase::labels`].
#[derive(Debug, Clone)]
pub struct MaskedDatabase<'a> {
    db: &'a Database,
    target: TargetRef,
    labels: Vec<Option<u8>>,
    label_map: LabelMap,
}

/// Masks the target column of `db`.
pub fn remove_target_column(db: &Database) -> Result<MaskedDatabase<'_>, RdbError> {
    let target = db.target()?;
    let tokens: Vec<&str> = db.table(target.table).rows.iter().filter_map(|r| r[target.column].as_str()).collect();
    let label_map = LabelMap::infer(&tokens)
        .map_err(|cardinality| RdbError::TargetNotBinary { column: db.column_name(target.table, target.column), cardinality })?;
    let labels = db
        .table(target.table)
        .rows
        .iter()
        .map(|r| r[target.column].as_str().and_then(|t| label_map.label(t)))
        .collect();
    Ok(MaskedDatabase { db, target, labels, label_map })
}

impl<'a> MaskedDatabase<'a> {
    pub fn target(&self) -> TargetRef {
        self.target
    }

    /// Label per row of the target table; `None` where the target cell is null.
    pub fn labels(&self) -> &[Option<u8>] {
        &self.labels
    }

    pub fn label_map(&self) -> &LabelMap {
        &self.label_map
    }

    /// Masking an already-masked view is the identity.
    pub fn mask(&self) -> MaskedDatabase<'a> {
        self.clone()
    }

    pub fn inner(&self) -> &'a Database {
        self.db
    }
}

impl CellSource for MaskedDatabase<'_> {
    fn database(&self) -> &Database {
        self.db
    }

    fn cell(&self, table: usize, row: usize, column: usize) -> &CellValue {
        if table == self.target.table && column == self.target.column {
            &NULL_CELL
        } else {
            self.db.cell(table, row, column)
        }
    }
}
