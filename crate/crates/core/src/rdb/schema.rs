use serde::{Deserialize, Serialize};

/// `(table, column)` pair naming a referenced key column.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ColumnRef {
    pub table: String,
    pub column: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnKind {
    Scalar,
    Categorical,
    DateTime,
    LatLong,
    Text,
    PrimaryKey,
    ForeignKey(ColumnRef),
}

impl ColumnKind {
    pub fn tag(&self) -> KindTag {
        match self {
            ColumnKind::Scalar => KindTag::Scalar,
            ColumnKind::Categorical => KindTag::Categorical,
            ColumnKind::DateTime => KindTag::Datetime,
            ColumnKind::LatLong => KindTag::Latlong,
            ColumnKind::Text => KindTag::Text,
            ColumnKind::PrimaryKey => KindTag::PrimaryKey,
            ColumnKind::ForeignKey(_) => KindTag::ForeignKey,
        }
    }

    pub fn is_key(&self) -> bool {
        matches!(self, ColumnKind::PrimaryKey | ColumnKind::ForeignKey(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindTag {
    Scalar,
    Categorical,
    Datetime,
    Latlong,
    Text,
    PrimaryKey,
    ForeignKey,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    pub target: bool,
}

impl ColumnSpec {
    pub fn new(name: impl Into<String>, kind: ColumnKind) -> Self {
        ColumnSpec { name: name.into(), kind, target: false }
    }

    pub fn target(name: impl Into<String>) -> Self {
        ColumnSpec { name: name.into(), kind: ColumnKind::Categorical, target: true }
    }

    pub fn foreign_key(name: impl Into<String>, table: &str, column: &str) -> Self {
        ColumnSpec::new(
            name,
            ColumnKind::ForeignKey(ColumnRef { table: table.into(), column: column.into() }),
        )
    }
}

// On-disk `schema.json` layout.

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchemaFile {
    pub tables: Vec<TableEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableEntry {
    pub name: String,
    pub file: String,
    pub columns: Vec<ColumnEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnEntry {
    pub name: String,
    pub kind: KindTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub references: Option<ColumnRef>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub target: bool,
}

fn is_false(b: &bool) -> bool {
    !*b
}

impl ColumnEntry {
    pub fn to_spec(&self, table: &str) -> Result<ColumnSpec, String> {
        let kind = match (self.kind, &self.references) {
            (KindTag::ForeignKey, Some(r)) => ColumnKind::ForeignKey(r.clone()),
            (KindTag::ForeignKey, None) => {
                return Err(format!("{table}.{}: foreign_key without references", self.name))
            }
            (_, Some(_)) => {
                return Err(format!("{table}.{}: references on a non-foreign-key column", self.name))
            }
            (KindTag::Scalar, None) => ColumnKind::Scalar,
            (KindTag::Categorical, None) => ColumnKind::Categorical,
            (KindTag::Datetime, None) => ColumnKind::DateTime,
            (KindTag::Latlong, None) => ColumnKind::LatLong,
            (KindTag::Text, None) => ColumnKind::Text,
            (KindTag::PrimaryKey, None) => ColumnKind::PrimaryKey,
        };
        Ok(ColumnSpec { name: self.name.clone(), kind, target: self.target })
    }

    pub fn from_spec(spec: &ColumnSpec) -> Self {
        let references = match &spec.kind {
            ColumnKind::ForeignKey(r) => Some(r.clone()),
            _ => None,
        };
        ColumnEntry { name: spec.name.clone(), kind: spec.kind.tag(), references, target: spec.target }
    }
}
