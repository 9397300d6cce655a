use std::fs;
use std::path::Path;

use super::{CellValue, ColumnEntry, Database, RdbError, SchemaFile, Table, TableEntry};

/// Loads `schema.json` and one CSV per declared table from `root`.
pub fn load_database(root: impl AsRef<Path>, strict: bool) -> Result<Database, RdbError> {
    let root = root.as_ref();
    let schema_path = root.join("schema.json");
    let text = fs::read_to_string(&schema_path).map_err(|source| RdbError::Io { path: schema_path.clone(), source })?;
    let schema: SchemaFile =
        serde_json::from_str(&text).map_err(|source| RdbError::SchemaJson { path: schema_path.clone(), source })?;

    let mut tables = Vec::with_capacity(schema.tables.len());
    for entry in &schema.tables {
        let columns = entry
            .columns
            .iter()
            .map(|c| c.to_spec(&entry.name))
            .collect::<Result<Vec<_>, _>>()
            .map_err(RdbError::Schema)?;
        let mut table = Table { name: entry.name.clone(), file: entry.file.clone(), columns, rows: Vec::new() };
        read_rows(root, &mut table)?;
        tables.push(table);
    }
    Database::new(tables, strict)
}

fn read_rows(root: &Path, table: &mut Table) -> Result<(), RdbError> {
    let path = root.join(&table.file);
    if !path.exists() {
        return Err(RdbError::Io {
            path,
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "table file not found"),
        });
    }
    let csv_err = |source| RdbError::Csv { path: path.clone(), source };
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(&path).map_err(csv_err)?;
    let header = reader.headers().map_err(csv_err)?.clone();

    // Header position of each declared column.
    let mut positions = Vec::with_capacity(table.columns.len());
    for col in &table.columns {
        let pos = header.iter().position(|h| h == col.name).ok_or_else(|| RdbError::MissingColumn {
            table: table.name.clone(),
            column: col.name.clone(),
        })?;
        positions.push(pos);
    }
    if let Some(extra) = header.iter().find(|h| table.column_index(h).is_none()) {
        return Err(RdbError::UndeclaredColumn { table: table.name.clone(), column: extra.to_string() });
    }

    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        if record.len() != header.len() {
            return Err(RdbError::RowWidth {
                table: table.name.clone(),
                row: r,
                found: record.len(),
                expected: header.len(),
            });
        }
        let mut row = Vec::with_capacity(table.columns.len());
        for (col, &pos) in table.columns.iter().zip(&positions) {
            let cell = CellValue::parse(&col.kind, &record[pos]).map_err(|reason| RdbError::BadCell {
                table: table.name.clone(),
                row: r,
                column: col.name.clone(),
                reason,
            })?;
            row.push(cell);
        }
        table.rows.push(row);
    }
    Ok(())
}

/// Writes `schema.json` plus one CSV per table; inverse of [`load_database`].
pub fn write_database(db: &Database, root: impl AsRef<Path>) -> Result<(), RdbError> {
    let root = root.as_ref();
    fs::create_dir_all(root).map_err(|source| RdbError::Io { path: root.to_path_buf(), source })?;
    let schema = SchemaFile {
        tables: db
            .tables()
            .iter()
            .map(|t| TableEntry {
                name: t.name.clone(),
                file: t.file.clone(),
                columns: t.columns.iter().map(ColumnEntry::from_spec).collect(),
            })
            .collect(),
    };
    let schema_path = root.join("schema.json");
    let mut text = serde_json::to_string_pretty(&schema).expect("schema serializes");
    text.push('\n');
    fs::write(&schema_path, text).map_err(|source| RdbError::Io { path: schema_path, source })?;

    for t in db.tables() {
        let path = root.join(&t.file);
        let csv_err = |source| RdbError::Csv { path: path.clone(), source };
        let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
        w.write_record(t.columns.iter().map(|c| c.name.as_str())).map_err(csv_err)?;
        for row in &t.rows {
            w.write_record(row.iter().map(CellValue::to_field)).map_err(csv_err)?;
        }
        w.flush().map_err(|source| RdbError::Io { path: path.clone(), source })?;
    }
    Ok(())
}
