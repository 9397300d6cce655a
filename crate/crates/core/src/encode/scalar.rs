use serde::{Deserialize, Serialize};

pub const IQR_FLOOR: f64 = 1e-9;

/// Quantile by linear interpolation between order statistics of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Robust scaling to zero median and unit interquartile range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarEncoder {
    pub median: f64,
    pub iqr: f64,
    /// No training values were seen; every value encodes to 0.
    pub constant: bool,
}

impl ScalarEncoder {
    pub fn fit(values: impl IntoIterator<Item = f64>) -> ScalarEncoder {
        let mut v: Vec<f64> = values.into_iter().collect();
        if v.is_empty() {
            return ScalarEncoder { median: 0.0, iqr: 1.0, constant: true };
        }
        v.sort_by(f64::total_cmp);
        let q1 = quantile_sorted(&v, 0.25);
        let q3 = quantile_sorted(&v, 0.75);
        ScalarEncoder { median: quantile_sorted(&v, 0.5), iqr: (q3 - q1).max(IQR_FLOOR), constant: false }
    }

    pub fn scale(&self, x: f64) -> f64 {
        if self.constant {
            0.0
        } else {
            (x - self.median) / self.iqr
        }
    }

    /// `[scaled value, missing flag]`
    pub fn encode(&self, x: Option<f64>) -> [f64; 2] {
        match x {
            Some(x) => [self.scale(x), 0.0],
            None => [0.0, 1.0],
        }
    }
}
