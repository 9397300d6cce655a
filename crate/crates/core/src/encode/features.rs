//! Fixed-width vectorizers for datetime, geolocation and text cells.

use std::f64::consts::PI;

use chrono::{Datelike, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use super::ScalarEncoder;

/// Datetime features, excluding the trailing null flag.
pub const DATETIME_WIDTH: usize = 125;
pub const LATLONG_WIDTH: usize = 5;
pub const TEXT_WIDTH: usize = 2;

/// Offsets of each datetime feature group.
pub mod datetime_layout {
    pub const YEAR: usize = 0;
    pub const MONTH: usize = 1;
    pub const WEEK: usize = 13;
    pub const DAY: usize = 66;
    pub const WEEKDAY: usize = 97;
    pub const DAY_OF_YEAR: usize = 104;
    /// Six one-hot(2) flags: month end, month start, quarter end,
    /// quarter start, year end, year start.
    pub const FLAGS: usize = 105;
    /// cos/sin pairs: weekday, day of month, month, day of year.
    pub const CYCLIC: usize = 117;
    /// (offset, width) of every one-hot group.
    pub const ONE_HOT_GROUPS: [(usize, usize); 10] = [
        (MONTH, 12),
        (WEEK, 53),
        (DAY, 31),
        (WEEKDAY, 7),
        (FLAGS, 2),
        (FLAGS + 2, 2),
        (FLAGS + 4, 2),
        (FLAGS + 6, 2),
        (FLAGS + 8, 2),
        (FLAGS + 10, 2),
    ];
}

/// `[cos λ cos φ, cos λ sin φ, sin λ, λ/90, φ/180]` for latitude λ and longitude φ in degrees.
pub fn encode_latlong(lat: f64, lon: f64) -> [f64; LATLONG_WIDTH] {
    let ((sla, cla), (slo, clo)) = (sin_cos_degrees(lat), sin_cos_degrees(lon));
    [cla * clo, cla * slo, sla, lat / 90.0, lon / 180.0]
}

/// Sine and cosine of an angle in degrees, exact at multiples of 90.
fn sin_cos_degrees(deg: f64) -> (f64, f64) {
    let r = deg.rem_euclid(360.0);
    let quadrant = (r / 90.0).round();
    let (s, c) = (r - 90.0 * quadrant).to_radians().sin_cos();
    match quadrant as i32 % 4 {
        0 => (s, c),
        1 => (c, -s),
        2 => (-s, -c),
        _ => (-c, s),
    }
}

fn days_in_month(year: i32, month: u32) -> u32 {
    let (ny, nm) = if month == 12 { (year + 1, 1) } else { (year, month + 1) };
    let first_next = NaiveDate::from_ymd_opt(ny, nm, 1).expect("valid date");
    first_next.pred_opt().expect("valid date").day()
}

fn days_in_year(year: i32) -> u32 {
    if NaiveDate::from_ymd_opt(year, 2, 29).is_some() {
        366
    } else {
        365
    }
}

fn cyclic(value: f64, period: f64) -> [f64; 2] {
    let angle = 2.0 * PI * value / period;
    [angle.cos(), angle.sin()]
}

/// Calendar features of a timestamp; the year is scaled by an encoder fit on training years.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DateTimeEncoder {
    pub year: ScalarEncoder,
}

impl DateTimeEncoder {
    pub fn fit(values: impl IntoIterator<Item = NaiveDateTime>) -> Self {
        DateTimeEncoder { year: ScalarEncoder::fit(values.into_iter().map(|t| t.year() as f64)) }
    }

    /// Appends the 125 features followed by the null flag.
    pub fn encode_into(&self, value: Option<&NaiveDateTime>, out: &mut Vec<f64>) {
        use datetime_layout::*;
        let start = out.len();
        out.resize(start + DATETIME_WIDTH + 1, 0.0);
        let v = &mut out[start..];
        let Some(t) = value else {
            v[DATETIME_WIDTH] = 1.0;
            return;
        };
        let (year, month, day) = (t.year(), t.month(), t.day());
        let weekday = t.weekday().number_from_monday();
        let ordinal = t.ordinal();
        let dim = days_in_month(year, month);
        let diy = days_in_year(year);

        v[YEAR] = self.year.scale(year as f64);
        v[MONTH + month as usize - 1] = 1.0;
        v[WEEK + t.iso_week().week() as usize - 1] = 1.0;
        v[DAY + day as usize - 1] = 1.0;
        v[WEEKDAY + weekday as usize - 1] = 1.0;
        v[DAY_OF_YEAR] = ordinal as f64 / 366.0;
        let flags = [
            day == dim,
            day == 1,
            month % 3 == 0 && day == dim,
            month % 3 == 1 && day == 1,
            month == 12 && day == 31,
            month == 1 && day == 1,
        ];
        for (i, f) in flags.iter().enumerate() {
            v[FLAGS + 2 * i + usize::from(*f)] = 1.0;
        }
        let pairs = [
            cyclic(weekday as f64, 7.0),
            cyclic(day as f64, dim as f64),
            cyclic(month as f64, 12.0),
            cyclic(ordinal as f64, diy as f64),
        ];
        for (i, [c, s]) in pairs.iter().enumerate() {
            v[CYCLIC + 2 * i] = *c;
            v[CYCLIC + 2 * i + 1] = *s;
        }
    }
}

/// Word count and character count, each robust-scaled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TextEncoder {
    pub words: ScalarEncoder,
    pub chars: ScalarEncoder,
}

/// `[whitespace-separated word count, character count]`
pub fn text_counts(s: &str) -> [f64; 2] {
    [s.split_whitespace().count() as f64, s.chars().count() as f64]
}

impl TextEncoder {
    pub fn fit<'a>(values: impl IntoIterator<Item = &'a str>) -> Self {
        let counts: Vec<[f64; 2]> = values.into_iter().map(text_counts).collect();
        TextEncoder {
            words: ScalarEncoder::fit(counts.iter().map(|c| c[0])),
            chars: ScalarEncoder::fit(counts.iter().map(|c| c[1])),
        }
    }

    pub fn encode_into(&self, value: Option<&str>, out: &mut Vec<f64>) {
        match value {
            Some(s) => {
                let [w, c] = text_counts(s);
                out.extend([self.words.scale(w), self.chars.scale(c), 0.0]);
            }
            None => out.extend([0.0, 0.0, 1.0]),
        }
    }
}
