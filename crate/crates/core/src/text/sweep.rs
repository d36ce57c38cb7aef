use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eval::{auroc, best_f1};

use super::embed::TextModelParams;
use super::score::{train_segments, TextScoreFormula};
use super::tokenize::TokenizedTweet;
use super::TextError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub params: TextModelParams,
    pub formula: TextScoreFormula,
    pub auroc: f64,
    pub f1: f64,
    /// Score threshold (0 to 100) at which `f1` is reached.
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    /// Grid-major, formula-minor.
    pub cells: Vec<SweepCell>,
    pub best: usize,
}

impl SweepReport {
    pub fn best_cell(&self) -> &SweepCell {
        &self.cells[self.best]
    }
}

/// Trains every grid cell, scores the labelled corpus with every formula
/// and reports AUROC and best F1 per combination. The best cell has the
/// highest F1; the earliest cell wins ties.
pub fn sweep_hyperparameters(
    corpus: &[(TokenizedTweet, bool)],
    grid: &[TextModelParams],
    formulas: &[TextScoreFormula],
    seed_term: &str,
    segment_hours: u32,
) -> Result<SweepReport, TextError> {
    if grid.is_empty() || formulas.is_empty() {
        return Err(TextError::InvalidParams("empty sweep grid".into()));
    }
    let tweets: Vec<TokenizedTweet> = corpus.iter().map(|(t, _)| t.clone()).collect();
    let labels: Vec<bool> = corpus.iter().map(|(_, l)| *l).collect();
    if !(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l)) {
        return Err(TextError::InvalidParams("sweep needs both related and unrelated tweets".into()));
    }

    let per_params: Vec<Result<Vec<SweepCell>, TextError>> = grid
        .par_iter()
        .map(|params| {
            let emb = train_segments(&tweets, params, seed_term, segment_hours)?;
            formulas
                .iter()
                .map(|&formula| {
                    let scores = emb.scores(&tweets, formula, seed_term);
                    let auc = auroc(&scores, &labels).map_err(|e| TextError::InvalidParams(e.to_string()))?;
                    let (threshold, m) = best_f1(&scores, &labels, (0..=100).map(f64::from))
                        .map_err(|e| TextError::InvalidParams(e.to_string()))?;
                    Ok(SweepCell { params: params.clone(), formula, auroc: auc, f1: m.f1, threshold })
                })
                .collect()
        })
        .collect();
    let mut cells = Vec::new();
    for r in per_params {
        cells.extend(r?);
    }
    let best = cells
        .iter()
        .enumerate()
        .fold(0, |b, (i, c)| if c.f1 > cells[b].f1 { i } else { b });
    Ok(SweepReport { cells, best })
}
