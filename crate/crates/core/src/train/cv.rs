use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::rng;

pub const DEFAULT_FOLDS: usize = 5;
/// Share of each training split held out for validation.
pub const VALIDATION_SHARE: f64 = 0.15;
pub const MIN_IDS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CvError {
    #[error("cross-validation needs at least {MIN_IDS} ids, got {0}")]
    TooFew(usize),
    #[error("need at least 2 folds, got {0}")]
    Folds(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub test: Vec<usize>,
    /// Everything outside `test`; the union of `val` and `fit`.
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub fit: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvPlan {
    pub seed: u64,
    pub folds: Vec<Fold>,
}

/// Splits `0..n` into `k` test folds; fold sizes differ by at most one.
pub fn make_cv_plan(n: usize, k: usize, seed: u64) -> Result<CvPlan, CvError> {
    if n < MIN_IDS {
        return Err(CvError::TooFew(n));
    }
    if k < 2 || k > n {
        return Err(CvError::Folds(k));
    }
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(&mut rng::stream(seed, rng::streams::CV_SPLIT));
    let mut assignment = vec![0; n];
    let (base, extra) = (n / k, n % k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        for &id in &ids[start..start + size] {
            assignment[id] = f;
        }
        start += size;
    }
    let folds = (0..k)
        .map(|f| {
            let test: Vec<usize> = (0..n).filter(|&i| assignment[i] == f).collect();
            let train: Vec<usize> = (0..n).filter(|&i| assignment[i] != f).collect();
            let n_val = (VALIDATION_SHARE * train.len() as f64).round() as usize;
            let mut shuffled = train.clone();
            shuffled.shuffle(&mut rng::stream(seed, rng::streams::fold(rng::streams::CV_SPLIT, f)));
            let mut val = shuffled[..n_val].to_vec();
            let mut fit = shuffled[n_val..].to_vec();
            val.sort_unstable();
            fit.sort_unstable();
            Fold { test, train, val, fit }
        })
        .collect();
    Ok(CvPlan { seed, folds })
}
