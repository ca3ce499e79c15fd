//! Clustering and classification metrics over flat label sequences.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("predicted and true labelings differ in length ({predicted} vs {truth})")]
    LengthMismatch { predicted: usize, truth: usize },
    #[error("pairwise metrics need at least two items, got {0}")]
    TooFewItems(usize),
    #[error("no runs to summarize")]
    NoRuns,
}

fn check_lengths(predicted: &[usize], truth: &[usize]) -> Result<(), EvalError> {
    if predicted.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            predicted: predicted.len(),
            truth: truth.len(),
        });
    }
    Ok(())
}

fn pairs(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}

/// Pair counts from the contingency table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairCounts {
    /// Pairs together in both labelings.
    pub both: u64,
    /// Pairs together in the prediction.
    pub predicted: u64,
    /// Pairs together in the truth.
    pub truth: u64,
    pub total: u64,
}

impl PairCounts {
    pub fn new(predicted: &[usize], truth: &[usize]) -> Result<Self, EvalError> {
        check_lengths(predicted, truth)?;
        let mut cells: HashMap<(usize, usize), u64> = HashMap::new();
        let mut rows: HashMap<usize, u64> = HashMap::new();
        let mut cols: HashMap<usize, u64> = HashMap::new();
        for (&p, &t) in predicted.iter().zip(truth) {
            *cells.entry((p, t)).or_default() += 1;
            *rows.entry(p).or_default() += 1;
            *cols.entry(t).or_default() += 1;
        }
        Ok(Self {
            both: cells.values().map(|&n| pairs(n)).sum(),
            predicted: rows.values().map(|&n| pairs(n)).sum(),
            truth: cols.values().map(|&n| pairs(n)).sum(),
            total: pairs(predicted.len() as u64),
        })
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Adjusted Rand index. Degenerate cases where the index cannot be corrected
/// for chance (both labelings all-in-one or all-singletons) return 1.
pub fn adjusted_rand_index(predicted: &[usize], truth: &[usize]) -> Result<f64, EvalError> {
    let c = PairCounts::new(predicted, truth)?;
    Ok(ari_from_counts(&c))
}

pub fn ari_from_counts(c: &PairCounts) -> f64 {
    if c.total == 0 {
        return 1.0;
    }
    let expected = c.predicted as f64 * c.truth as f64 / c.total as f64;
    let max = 0.5 * (c.predicted + c.truth) as f64;
    let den = max - expected;
    if den == 0.0 {
        1.0
    } else {
        (c.both as f64 - expected) / den
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairwiseScores {
    pub recall: f64,
    pub precision: f64,
    pub fscore: f64,
}

/// Pair-counting precision, recall and their harmonic mean (0/0 taken as 0).
pub fn pairwise_prf(predicted: &[usize], truth: &[usize]) -> Result<PairwiseScores, EvalError> {
    check_lengths(predicted, truth)?;
    if predicted.len() < 2 {
        return Err(EvalError::TooFewItems(predicted.len()));
    }
    Ok(prf_from_counts(&PairCounts::new(predicted, truth)?))
}

pub fn prf_from_counts(c: &PairCounts) -> PairwiseScores {
    let precision = ratio(c.both, c.predicted);
    let recall = ratio(c.both, c.truth);
    let fscore = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    PairwiseScores {
        recall,
        precision,
        fscore,
    }
}

/// Fraction of positions where the ids agree.
pub fn accuracy(predicted: &[usize], truth: &[usize]) -> Result<f64, EvalError> {
    check_lengths(predicted, truth)?;
    let hits = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(ratio(hits as u64, predicted.len() as u64))
}

/// Metrics of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub ari: f64,
    pub recall: f64,
    pub precision: f64,
    pub fscore: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
}

impl RunMetrics {
    /// All metrics of one labeling; accuracy only when `with_accuracy`.
    pub fn compute(predicted: &[usize], truth: &[usize], with_accuracy: bool) -> Result<Self, EvalError> {
        let counts = PairCounts::new(predicted, truth)?;
        if predicted.len() < 2 {
            return Err(EvalError::TooFewItems(predicted.len()));
        }
        let prf = prf_from_counts(&counts);
        Ok(Self {
            seed: None,
            ari: ari_from_counts(&counts),
            recall: prf.recall,
            precision: prf.precision,
            fscore: prf.fscore,
            accuracy: if with_accuracy {
                Some(accuracy(predicted, truth)?)
            } else {
                None
            },
        })
    }
}

/// Per-run metrics plus their mean, which is also flattened to the top level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub ari: f64,
    pub recall: f64,
    pub precision: f64,
    pub fscore: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    pub runs: Vec<RunMetrics>,
    pub mean: RunMetrics,
}

impl MetricsReport {
    pub fn from_runs(runs: Vec<RunMetrics>) -> Result<Self, EvalError> {
        if runs.is_empty() {
            return Err(EvalError::NoRuns);
        }
        let n = runs.len() as f64;
        let avg = |f: fn(&RunMetrics) -> f64| runs.iter().map(f).sum::<f64>() / n;
        let accuracy = runs
            .iter()
            .map(|r| r.accuracy)
            .collect::<Option<Vec<f64>>>()
            .map(|a| a.iter().sum::<f64>() / n);
        let mean = RunMetrics {
            seed: None,
            ari: avg(|r| r.ari),
            recall: avg(|r| r.recall),
            precision: avg(|r| r.precision),
            fscore: avg(|r| r.fscore),
            accuracy,
        };
        Ok(Self {
            ari: mean.ari,
            recall: mean.recall,
            precision: mean.precision,
            fscore: mean.fscore,
            accuracy: mean.accuracy,
            runs,
            mean,
        })
    }
}
