use chrono::{NaiveDate, NaiveDateTime};

use super::schema::ColumnKind;

const DATETIME_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

/// One parsed table entry.
#[derive(Debug, Clone, PartialEq)]
pub enum CellValue {
    Null,
    Scalar(f64),
    Categorical(String),
    DateTime(NaiveDateTime),
    LatLong { lat: f64, lon: f64 },
    Text(String),
    /// Primary or foreign key token.
    Key(String),
}

impl CellValue {
    pub fn is_null(&self) -> bool {
        matches!(self, CellValue::Null)
    }

    pub fn as_scalar(&self) -> Option<f64> {
        match self {
            CellValue::Scalar(x) => Some(*x),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            CellValue::Categorical(s) | CellValue::Text(s) | CellValue::Key(s) => Some(s),
            _ => None,
        }
    }

    /// Parses a raw CSV field for a column of `kind`. The empty string is null.
    pub fn parse(kind: &ColumnKind, raw: &str) -> Result<CellValue, String> {
        if raw.is_empty() {
            return Ok(CellValue::Null);
        }
        match kind {
            ColumnKind::Scalar => {
                let x: f64 = raw
                    .trim()
                    .parse()
                    .map_err(|_| format!("not a number: {raw:?}"))?;
                if !x.is_finite() {
                    return Err(format!("non-finite scalar: {raw:?}"));
                }
                Ok(CellValue::Scalar(x))
            }
            ColumnKind::Categorical => Ok(CellValue::Categorical(raw.to_string())),
            ColumnKind::Text => Ok(CellValue::Text(raw.to_string())),
            ColumnKind::PrimaryKey | ColumnKind::ForeignKey(_) => Ok(CellValue::Key(raw.to_string())),
            ColumnKind::DateTime => parse_datetime(raw.trim()).map(CellValue::DateTime),
            ColumnKind::LatLong => {
                let (lat, lon) = raw
                    .split_once(',')
                    .ok_or_else(|| format!("expected \"lat,long\": {raw:?}"))?;
                let lat: f64 = lat.trim().parse().map_err(|_| format!("bad latitude: {raw:?}"))?;
                let lon: f64 = lon.trim().parse().map_err(|_| format!("bad longitude: {raw:?}"))?;
                if !(-90.0..=90.0).contains(&lat) {
                    return Err(format!("latitude out of range: {lat}"));
                }
                if !(-180.0..=180.0).contains(&lon) {
                    return Err(format!("longitude out of range: {lon}"));
                }
                Ok(CellValue::LatLong { lat, lon })
            }
        }
    }

    /// Inverse of [`CellValue::parse`].
    pub fn to_field(&self) -> String {
        match self {
            CellValue::Null => String::new(),
            CellValue::Scalar(x) => format!("{x}"),
            CellValue::Categorical(s) | CellValue::Text(s) | CellValue::Key(s) => s.clone(),
            CellValue::DateTime(t) => t.format(DATETIME_FORMAT).to_string(),
            CellValue::LatLong { lat, lon } => format!("{lat},{lon}"),
        }
    }

    /// Whether this value may be stored in a column of `kind`.
    pub fn fits(&self, kind: &ColumnKind) -> bool {
        matches!(
            (self, kind),
            (CellValue::Null, _)
                | (CellValue::Scalar(_), ColumnKind::Scalar)
                | (CellValue::Categorical(_), ColumnKind::Categorical)
                | (CellValue::DateTime(_), ColumnKind::DateTime)
                | (CellValue::LatLong { .. }, ColumnKind::LatLong)
                | (CellValue::Text(_), ColumnKind::Text)
                | (CellValue::Key(_), ColumnKind::PrimaryKey)
                | (CellValue::Key(_), ColumnKind::ForeignKey(_))
        )
    }
}

/// ISO-8601 `YYYY-MM-DD[THH:MM:SS]`, UTC assumed.
pub fn parse_datetime(raw: &str) -> Result<NaiveDateTime, String> {
    if let Ok(t) = NaiveDateTime::parse_from_str(raw, DATETIME_FORMAT) {
        return Ok(t);
    }
    NaiveDate::parse_from_str(raw, "%Y-%m-%d")
        .map(|d| d.and_hms_opt(0, 0, 0).expect("midnight is valid"))
        .map_err(|_| format!("not an ISO-8601 datetime: {raw:?}"))
}
