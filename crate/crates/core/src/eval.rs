//! Classification metrics and inter-rater agreement.
//!
//! Zero denominators yield 0 for precision, recall and F1. AUROC gives tied
//! positive/negative pairs half credit, matching the Mann-Whitney statistic.

use std::collections::{BTreeSet, HashMap};
use std::hash::Hash;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("length mismatch: {0} scores vs {1} labels")]
    LengthMismatch(usize, usize),
    #[error("both classes must be present")]
    SingleClass,
    #[error("non-finite score")]
    NonFinite,
    #[error("at least two raters and two observed categories are required")]
    Degenerate,
    #[error("csv write failed: {0}")]
    Write(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecallF1 {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn precision_recall_f1(c: &ConfusionCounts) -> PrecisionRecallF1 {
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
    PrecisionRecallF1 { precision, recall, f1 }
}

fn check_lengths(scores: &[f64], labels: &[bool]) -> Result<(), EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch(scores.len(), labels.len()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(EvalError::NonFinite);
    }
    Ok(())
}

/// Positive prediction iff `score >= threshold`.
pub fn confusion(scores: &[f64], labels: &[bool], threshold: f64) -> Result<ConfusionCounts, EvalError> {
    check_lengths(scores, labels)?;
    let mut c = ConfusionCounts::default();
    for (&s, &y) in scores.iter().zip(labels) {
        match (s >= threshold, y) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

pub fn confusion_from_predictions(predicted: &[bool], labels: &[bool]) -> Result<ConfusionCounts, EvalError> {
    if predicted.len() != labels.len() {
        return Err(EvalError::LengthMismatch(predicted.len(), labels.len()));
    }
    let scores: Vec<f64> = predicted.iter().map(|&p| if p { 1.0 } else { 0.0 }).collect();
    confusion(&scores, labels, 0.5)
}

/// Area under the ROC curve via average ranks.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64, EvalError> {
    check_lengths(scores, labels)?;
    let n_pos = labels.iter().filter(|&&y| y).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their average
        let avg_rank = (i + j + 2) as f64 / 2.0;
        let pos_in_tie = order[i..=j].iter().filter(|&&k| labels[k]).count();
        pos_rank_sum += avg_rank * pos_in_tie as f64;
        i = j + 1;
    }
    let np = n_pos as f64;
    Ok((pos_rank_sum - np * (np + 1.0) / 2.0) / (np * n_neg as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub tpr: f64,
    pub fpr: f64,
}

/// One point per distinct score (descending), plus the origin.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<RocPoint>, EvalError> {
    check_lengths(scores, labels)?;
    let n_pos = labels.iter().filter(|&&y| y).count() as f64;
    let n_neg = labels.len() as f64 - n_pos;
    if n_pos == 0.0 || n_neg == 0.0 {
        return Err(EvalError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![RocPoint { threshold: f64::INFINITY, tpr: 0.0, fpr: 0.0 }];
    let (mut tp, mut fp) = (0.0, 0.0);
    for (idx, &k) in order.iter().enumerate() {
        if labels[k] {
            tp += 1.0;
        } else {
            fp += 1.0;
        }
        let last_of_tie = order.get(idx + 1).map_or(true, |&n| scores[n] != scores[k]);
        if last_of_tie {
            points.push(RocPoint { threshold: scores[k], tpr: tp / n_pos, fpr: fp / n_neg });
        }
    }
    Ok(points)
}

/// Best F1 over the supplied thresholds; earlier thresholds win ties.
pub fn best_f1(
    scores: &[f64],
    labels: &[bool],
    thresholds: impl IntoIterator<Item = f64>,
) -> Result<(f64, PrecisionRecallF1), EvalError> {
    let mut best: Option<(f64, PrecisionRecallF1)> = None;
    for t in thresholds {
        let m = precision_recall_f1(&confusion(scores, labels, t)?);
        if best.map_or(true, |(_, b)| m.f1 > b.f1) {
            best = Some((t, m));
        }
    }
    Ok(best.unwrap_or((0.0, PrecisionRecallF1 { precision: 0.0, recall: 0.0, f1: 0.0 })))
}

/// Fraction of related items among those scoring at or above each
/// threshold; `None` where nothing clears the threshold.
pub fn ratio_curve(
    scores: &[f64],
    labels: &[bool],
    thresholds: &[f64],
) -> Result<Vec<(f64, Option<f64>)>, EvalError> {
    check_lengths(scores, labels)?;
    Ok(thresholds
        .iter()
        .map(|&t| {
            let (n, rel) = scores
                .iter()
                .zip(labels)
                .filter(|(&s, _)| s >= t)
                .fold((0u64, 0u64), |(n, r), (_, &y)| (n + 1, r + u64::from(y)));
            (t, if n == 0 { None } else { Some(rel as f64 / n as f64) })
        })
        .collect())
}

/// Cohen's kappa for two aligned label sequences.
pub fn cohen_kappa<L: Eq + Hash + Ord + Clone>(a: &[L], b: &[L]) -> Result<f64, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(EvalError::Degenerate);
    }
    let categories: BTreeSet<&L> = a.iter().chain(b).collect();
    if categories.len() < 2 {
        return Err(EvalError::Degenerate);
    }
    let n = a.len() as f64;
    let agree = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64;
    let mut count_a: HashMap<&L, f64> = HashMap::new();
    let mut count_b: HashMap<&L, f64> = HashMap::new();
    for (x, y) in a.iter().zip(b) {
        *count_a.entry(x).or_default() += 1.0;
        *count_b.entry(y).or_default() += 1.0;
    }
    let p_o = agree / n;
    let p_e: f64 = categories
        .iter()
        .map(|c| count_a.get(c).copied().unwrap_or(0.0) / n * count_b.get(c).copied().unwrap_or(0.0) / n)
        .sum();
    if p_e >= 1.0 {
        return Err(EvalError::Degenerate);
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

/// Light's kappa: unweighted mean of Cohen's kappa over every rater pair.
pub fn light_kappa<L: Eq + Hash + Ord + Clone>(raters: &[Vec<L>]) -> Result<f64, EvalError> {
    if raters.len() < 2 {
        return Err(EvalError::Degenerate);
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..raters.len() {
        for j in (i + 1)..raters.len() {
            total += cohen_kappa(&raters[i], &raters[j])?;
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub metric: String,
    pub value: f64,
    pub axis: String,
    pub params: String,
}

impl MetricRow {
    pub fn new(metric: impl Into<String>, value: f64, axis: impl Into<String>, params: impl Into<String>) -> Self {
        MetricRow { metric: metric.into(), value, axis: axis.into(), params: params.into() }
    }
}

/// Writes `metric,value,axis,params` rows with a header.
pub fn write_metrics_csv<W: Write>(out: W, rows: &[MetricRow]) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| EvalError::Write(e.to_string()))?;
    }
    w.flush().map_err(|e| EvalError::Write(e.to_string()))
}
