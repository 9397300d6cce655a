//! Column vectorizers. Every encoder is fit on training rows only and is
//! immutable afterwards; fitted encoders serialize to JSON.

mod categorical;
mod features;
mod scalar;

use serde::{Deserialize, Serialize};

pub use categorical::{embedding_dim, CategoricalEncoder, MAX_EMBEDDING_DIM};
pub use features::{
    datetime_layout, encode_latlong, text_counts, DateTimeEncoder, TextEncoder, DATETIME_WIDTH, LATLONG_WIDTH, TEXT_WIDTH,
};
pub use scalar::{quantile_sorted, ScalarEncoder, IQR_FLOOR};

use crate::rdb::{CellSource, CellValue, ColumnKind};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EncodeError {
    #[error("column {column}: expected a {expected} cell, found {found:?}")]
    KindMismatch { column: String, expected: &'static str, found: CellValue },
    #[error("encoders cover {expected} tables, database has {found}")]
    TableCount { expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnEncoder {
    Scalar(ScalarEncoder),
    Categorical(CategoricalEncoder),
    Datetime(DateTimeEncoder),
    Latlong,
    Text(TextEncoder),
}

impl ColumnEncoder {
    /// Dense width including the null flag; categorical columns contribute indices instead.
    pub fn dense_width(&self) -> usize {
        match self {
            ColumnEncoder::Scalar(_) => 2,
            ColumnEncoder::Categorical(_) => 0,
            ColumnEncoder::Datetime(_) => DATETIME_WIDTH + 1,
            ColumnEncoder::Latlong => LATLONG_WIDTH + 1,
            ColumnEncoder::Text(_) => TEXT_WIDTH + 1,
        }
    }

    /// Fits on the given training cells. Returns `None` for columns that carry no features.
    pub fn fit<'a>(kind: &ColumnKind, cells: impl IntoIterator<Item = &'a CellValue>) -> Option<ColumnEncoder> {
        let cells = cells.into_iter();
        Some(match kind {
            ColumnKind::Scalar => ColumnEncoder::Scalar(ScalarEncoder::fit(cells.filter_map(CellValue::as_scalar))),
            ColumnKind::Categorical => ColumnEncoder::Categorical(CategoricalEncoder::fit(cells.filter_map(|c| match c {
                CellValue::Categorical(s) => Some(s.as_str()),
                _ => None,
            }))),
            ColumnKind::DateTime => ColumnEncoder::Datetime(DateTimeEncoder::fit(cells.filter_map(|c| match c {
                CellValue::DateTime(t) => Some(*t),
                _ => None,
            }))),
            ColumnKind::LatLong => ColumnEncoder::Latlong,
            ColumnKind::Text => ColumnEncoder::Text(TextEncoder::fit(cells.filter_map(|c| match c {
                CellValue::Text(s) => Some(s.as_str()),
                _ => None,
            }))),
            ColumnKind::PrimaryKey | ColumnKind::ForeignKey(_) => return None,
        })
    }

    /// Appends dense features. Categorical columns append nothing here.
    pub fn encode_dense(&self, column: &str, cell: &CellValue, out: &mut Vec<f64>) -> Result<(), EncodeError> {
        let mismatch = |expected| EncodeError::KindMismatch { column: column.to_string(), expected, found: cell.clone() };
        match (self, cell) {
            (ColumnEncoder::Scalar(e), CellValue::Scalar(x)) => out.extend(e.encode(Some(*x))),
            (ColumnEncoder::Scalar(e), CellValue::Null) => out.extend(e.encode(None)),
            (ColumnEncoder::Scalar(_), _) => return Err(mismatch("scalar")),
            (ColumnEncoder::Categorical(_), CellValue::Categorical(_) | CellValue::Null) => {}
            (ColumnEncoder::Categorical(_), _) => return Err(mismatch("categorical")),
            (ColumnEncoder::Datetime(e), CellValue::DateTime(t)) => e.encode_into(Some(t), out),
            (ColumnEncoder::Datetime(e), CellValue::Null) => e.encode_into(None, out),
            (ColumnEncoder::Datetime(_), _) => return Err(mismatch("datetime")),
            (ColumnEncoder::Latlong, CellValue::LatLong { lat, lon }) => {
                out.extend(encode_latlong(*lat, *lon));
                out.push(0.0);
            }
            (ColumnEncoder::Latlong, CellValue::Null) => {
                out.extend([0.0; LATLONG_WIDTH]);
                out.push(1.0);
            }
            (ColumnEncoder::Latlong, _) => return Err(mismatch("latlong")),
            (ColumnEncoder::Text(e), CellValue::Text(s)) => e.encode_into(Some(s), out),
            (ColumnEncoder::Text(e), CellValue::Null) => e.encode_into(None, out),
            (ColumnEncoder::Text(_), _) => return Err(mismatch("text")),
        }
        Ok(())
    }
}

/// A node's vectorized features.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedNode {
    pub dense: Vec<f64>,
    /// (column index within the table, vocabulary index)
    pub categorical: Vec<(usize, usize)>,
}

/// Encoders for the feature columns of one table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableEncoder {
    pub table: String,
    /// (column index, column name, encoder), in column order.
    pub columns: Vec<(usize, String, ColumnEncoder)>,
}

impl TableEncoder {
    /// Fits every feature column of `table` on `rows`. Key columns and the
    /// columns listed in `skip` contribute no features.
    pub fn fit(source: &dyn CellSource, table: usize, rows: &[usize], skip: &[usize]) -> TableEncoder {
        let t = source.database().table(table);
        let columns = t
            .columns
            .iter()
            .enumerate()
            .filter(|(c, _)| !skip.contains(c))
            .filter_map(|(c, spec)| {
                ColumnEncoder::fit(&spec.kind, rows.iter().map(|&r| source.cell(table, r, c))).map(|e| (c, spec.name.clone(), e))
            })
            .collect();
        TableEncoder { table: t.name.clone(), columns }
    }

    pub fn dense_width(&self) -> usize {
        self.columns.iter().map(|(_, _, e)| e.dense_width()).sum()
    }

    pub fn categorical(&self) -> impl Iterator<Item = (usize, &CategoricalEncoder)> {
        self.columns.iter().filter_map(|(c, _, e)| match e {
            ColumnEncoder::Categorical(cat) => Some((*c, cat)),
            _ => None,
        })
    }

    /// Width when categorical columns are one-hot encoded instead of embedded.
    pub fn one_hot_width(&self) -> usize {
        self.dense_width() + self.categorical().map(|(_, e)| e.num_indices()).sum::<usize>()
    }

    pub fn encode_node(&self, source: &dyn CellSource, table: usize, row: usize) -> Result<EncodedNode, EncodeError> {
        let mut dense = Vec::with_capacity(self.dense_width());
        let mut categorical = Vec::new();
        for (c, name, enc) in &self.columns {
            let cell = source.cell(table, row, *c);
            enc.encode_dense(name, cell, &mut dense)?;
            if let ColumnEncoder::Categorical(cat) = enc {
                categorical.push((*c, cat.encode(cell.as_str())));
            }
        }
        Ok(EncodedNode { dense, categorical })
    }

    /// Dense features with categoricals expanded as indicator vectors, in column order.
    pub fn encode_one_hot(&self, source: &dyn CellSource, table: usize, row: usize, out: &mut Vec<f64>) -> Result<(), EncodeError> {
        for (c, name, enc) in &self.columns {
            let cell = source.cell(table, row, *c);
            match enc {
                ColumnEncoder::Categorical(cat) => {
                    if !matches!(cell, CellValue::Categorical(_) | CellValue::Null) {
                        return Err(EncodeError::KindMismatch { column: name.clone(), expected: "categorical", found: cell.clone() });
                    }
                    cat.one_hot_into(cell.as_str(), out)
                }
                _ => enc.encode_dense(name, cell, out)?,
            }
        }
        Ok(())
    }
}

/// Every node of one table, encoded.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedTable {
    pub dense_width: usize,
    /// Row-major `[rows, dense_width]`.
    pub dense: Vec<f64>,
    pub num_categorical: usize,
    /// Row-major `[rows, num_categorical]`.
    pub categorical: Vec<usize>,
}

impl EncodedTable {
    pub fn dense_row(&self, row: usize) -> &[f64] {
        &self.dense[row * self.dense_width..(row + 1) * self.dense_width]
    }

    pub fn categorical_row(&self, row: usize) -> &[usize] {
        &self.categorical[row * self.num_categorical..(row + 1) * self.num_categorical]
    }
}

/// Fitted encoders for every table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatabaseEncoders {
    pub tables: Vec<TableEncoder>,
}

impl DatabaseEncoders {
    /// `training_rows[t]` lists the rows of table `t` that may inform the fit.
    /// The target column (already masked in a masked source) is excluded.
    pub fn fit(source: &dyn CellSource, training_rows: &[Vec<usize>], target: Option<(usize, usize)>) -> DatabaseEncoders {
        let tables = (0..source.database().tables().len())
            .map(|t| {
                let skip: Vec<usize> = target.filter(|(tt, _)| *tt == t).map(|(_, c)| c).into_iter().collect();
                TableEncoder::fit(source, t, &training_rows[t], &skip)
            })
            .collect();
        DatabaseEncoders { tables }
    }

    pub fn encode_table(&self, source: &dyn CellSource, table: usize) -> Result<EncodedTable, EncodeError> {
        let enc = &self.tables[table];
        let n = source.database().table(table).len();
        let dense_width = enc.dense_width();
        let num_categorical = enc.categorical().count();
        let mut dense = Vec::with_capacity(n * dense_width);
        let mut categorical = Vec::with_capacity(n * num_categorical);
        for r in 0..n {
            let node = enc.encode_node(source, table, r)?;
            dense.extend(node.dense);
            categorical.extend(node.categorical.iter().map(|&(_, i)| i));
        }
        Ok(EncodedTable { dense_width, dense, num_categorical, categorical })
    }

    pub fn encode_all(&self, source: &dyn CellSource) -> Result<Vec<EncodedTable>, EncodeError> {
        let found = source.database().tables().len();
        if found != self.tables.len() {
            return Err(EncodeError::TableCount { expected: self.tables.len(), found });
        }
        (0..found).map(|t| self.encode_table(source, t)).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("encoders serialize")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rdb::fixtures::patient_visit;
    use crate::rdb::{parse_datetime, remove_target_column, ColumnSpec, Database};

    fn visit_with_date() -> Database {
        let mut tables = patient_visit().tables().to_vec();
        tables[2].columns.push(ColumnSpec::new("when", ColumnKind::DateTime));
        for (i, row) in tables[2].rows.iter_mut().enumerate() {
            row.push(CellValue::DateTime(parse_datetime(&format!("2020-0{}-15", i + 1)).unwrap()));
        }
        Database::new(tables, true).unwrap()
    }

    #[test]
    fn visit_dense_width() {
        let db = visit_with_date();
        let enc = TableEncoder::fit(&db, 2, &[0, 1, 2], &[]);
        assert_eq!(enc.dense_width(), 2 + 126);
        let node = enc.encode_node(&db, 2, 0).unwrap();
        assert_eq!(node.dense.len(), 128);
        assert!(node.categorical.is_empty());
    }

    #[test]
    fn key_only_table_is_empty() {
        let db = patient_visit();
        let enc = TableEncoder::fit(&db, 1, &[0], &[]);
        let node = enc.encode_node(&db, 1, 0).unwrap();
        assert_eq!((node.dense.len(), node.categorical.len()), (0, 0));
    }

    #[test]
    fn identical_rows_encode_identically() {
        let mut tables = patient_visit().tables().to_vec();
        tables[0].rows[1][1] = tables[0].rows[0][1].clone();
        tables[0].rows[1][2] = tables[0].rows[0][2].clone();
        let db = Database::new(tables, true).unwrap();
        let enc = TableEncoder::fit(&db, 0, &[0, 1], &[]);
        assert_eq!(enc.encode_node(&db, 0, 0).unwrap(), enc.encode_node(&db, 0, 1).unwrap());
    }

    #[test]
    fn target_excluded_from_features() {
        let db = patient_visit();
        let masked = remove_target_column(&db).unwrap();
        let encs = DatabaseEncoders::fit(&masked, &[vec![0, 1], vec![0], vec![0, 1, 2]], Some((0, 2)));
        assert!(encs.tables[0].columns.iter().all(|(c, _, _)| *c != 2));
        assert_eq!(encs.tables[0].dense_width(), 2);
        let back = DatabaseEncoders::from_json(&encs.to_json()).unwrap();
        assert_eq!(back, encs);
    }

    #[test]
    fn kind_mismatch() {
        let enc = ColumnEncoder::Scalar(ScalarEncoder::fit([1.0]));
        let err = enc.encode_dense("x", &CellValue::Text("a".into()), &mut Vec::new()).unwrap_err();
        assert!(matches!(err, EncodeError::KindMismatch { expected: "scalar", .. }));
    }

    #[test]
    fn fit_ignores_unlisted_rows() {
        let db = patient_visit();
        let a = TableEncoder::fit(&db, 2, &[0], &[]);
        let mut tables = db.tables().to_vec();
        tables[2].rows[2][3] = CellValue::Scalar(1e6);
        let perturbed = Database::new(tables, true).unwrap();
        assert_eq!(TableEncoder::fit(&perturbed, 2, &[0], &[]), a);
    }
}
