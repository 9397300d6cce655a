use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("AUROC needs both classes; got {positives} positives and {negatives} negatives")]
    SingleClass { positives: usize, negatives: usize },
    #[error("{0} scores for {1} labels")]
    Length(usize, usize),
    #[error("method has {0} folds, baseline has {1}")]
    FoldMismatch(usize, usize),
}

/// Rank-based AUROC (Mann-Whitney U); tied scores receive their average rank.
pub fn auroc(scores: &[f64], labels: &[u8]) -> Result<f64, MetricError> {
    if scores.len() != labels.len() {
        return Err(MetricError::Length(scores.len(), labels.len()));
    }
    let positives = labels.iter().filter(|&&l| l == 1).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(MetricError::SingleClass { positives, negatives });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Ranks i+1..=j+1 share their mean.
        let mean_rank = (i + j + 2) as f64 / 2.0;
        rank_sum += mean_rank * order[i..=j].iter().filter(|&&k| labels[k] == 1).count() as f64;
        i = j + 1;
    }
    let (p, n) = (positives as f64, negatives as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Percentage of rows where `score >= threshold` matches a positive label.
pub fn accuracy(scores: &[f64], labels: &[u8], threshold: f64) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let correct = scores.iter().zip(labels).filter(|(&s, &l)| (s >= threshold) == (l == 1)).count();
    100.0 * correct as f64 / labels.len() as f64
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let n = values.len();
        if n == 0 {
            return Summary { mean: f64::NAN, sd: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n < 2 {
            0.0
        } else {
            (values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Summary { mean, sd }
    }
}

impl std::fmt::Display for Summary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.3} ± {:.3}", self.mean, self.sd)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Relative {
    pub per_fold: Vec<f64>,
    pub summary: Summary,
}

/// Per-fold differences `method - baseline`.
pub fn relative_auroc(method: &[f64], baseline: &[f64]) -> Result<Relative, MetricError> {
    if method.len() != baseline.len() {
        return Err(MetricError::FoldMismatch(method.len(), baseline.len()));
    }
    let per_fold: Vec<f64> = method.iter().zip(baseline).map(|(m, b)| m - b).collect();
    let summary = Summary::of(&per_fold);
    Ok(Relative { per_fold, summary })
}
