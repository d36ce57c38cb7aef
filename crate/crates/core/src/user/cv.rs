use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eval::{auroc, confusion, precision_recall_f1};
use crate::stats::{mean, std_dev};

use super::model::{check_training_set, ClassifierKind, Hyperparams, TrainedUserModel};
use super::UserError;

pub const CV_REPEATS: usize = 10;
pub const TEST_FRACTION: f64 = 0.3;
pub const DECISION_THRESHOLD: f64 = 0.5;

/// Indices of a stratified train/test split. Each class contributes
/// `round(0.3 * n_class)` test samples, at least one and never all.
pub fn stratified_split(y: &[bool], test_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in [false, true] {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        idx.shuffle(&mut rng);
        let n = idx.len();
        let k = if n < 2 { 0 } else { ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1) };
        test.extend_from_slice(&idx[..k]);
        train.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auroc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    fn of(xs: &[f64]) -> Self {
        MeanStd { mean: mean(xs), std: std_dev(xs) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub repeats: Vec<FoldMetrics>,
    pub precision: MeanStd,
    pub recall: MeanStd,
    pub f1: MeanStd,
    pub auroc: MeanStd,
}

fn pick<T: Clone>(v: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| v[i].clone()).collect()
}

/// Ten repeated stratified 70/30 splits. Positive predictions are
/// `p >= 0.5`.
pub fn cross_validate(
    kind: ClassifierKind,
    feature_names: &[&str],
    x: &[Vec<f64>],
    y: &[bool],
    hp: &Hyperparams,
    seed: u64,
) -> Result<CvReport, UserError> {
    check_training_set(x, y)?;
    let pos = y.iter().filter(|&&l| l).count();
    if x.len() < 10 || pos < 2 || y.len() - pos < 2 {
        return Err(UserError::TooFewSamples);
    }
    let repeats = (0..CV_REPEATS)
        .map(|r| {
            let split_seed = seed.wrapping_add(r as u64);
            let (train, test) = stratified_split(y, TEST_FRACTION, split_seed);
            let model = TrainedUserModel::train(kind, feature_names, &pick(x, &train), &pick(y, &train), hp, split_seed)?;
            let yt = pick(y, &test);
            let scores: Vec<f64> = test.iter().map(|&i| model.predict_proba(&x[i])).collect();
            let c = confusion(&scores, &yt, DECISION_THRESHOLD).map_err(|e| UserError::Eval(e.to_string()))?;
            let m = precision_recall_f1(&c);
            let auc = auroc(&scores, &yt).map_err(|e| UserError::Eval(e.to_string()))?;
            Ok(FoldMetrics { precision: m.precision, recall: m.recall, f1: m.f1, auroc: auc })
        })
        .collect::<Result<Vec<_>, UserError>>()?;
    let col = |f: fn(&FoldMetrics) -> f64| MeanStd::of(&repeats.iter().map(f).collect::<Vec<_>>());
    Ok(CvReport {
        precision: col(|m| m.precision),
        recall: col(|m| m.recall),
        f1: col(|m| m.f1),
        auroc: col(|m| m.auroc),
        repeats,
    })
}

/// Named hyperparameters with candidate values, in declaration order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GridSpec {
    pub axes: Vec<(String, Vec<String>)>,
}

impl GridSpec {
    pub fn new() -> Self {
        GridSpec::default()
    }

    pub fn axis<I: IntoIterator<Item = V>, V: ToString>(mut self, name: &str, values: I) -> Self {
        self.axes.push((name.to_string(), values.into_iter().map(|v| v.to_string()).collect()));
        self
    }

    /// Parses `name=v1,v2;name2=v3` (whitespace ignored).
    pub fn parse(text: &str) -> Result<Self, UserError> {
        let mut g = GridSpec::new();
        for part in text.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, vs) = part
                .split_once('=')
                .ok_or_else(|| UserError::InvalidHyperparameter(format!("grid axis {part:?} lacks '='")))?;
            let values: Vec<String> = vs.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
            g.axes.push((k.trim().to_string(), values));
        }
        Ok(g)
    }

    /// Every combination applied on top of `base`; the last axis varies
    /// fastest.
    pub fn cells(&self, base: &Hyperparams) -> Result<Vec<Hyperparams>, UserError> {
        if self.axes.iter().any(|(_, v)| v.is_empty()) {
            return Err(UserError::EmptyGrid);
        }
        let mut cells = vec![base.clone()];
        for (name, values) in &self.axes {
            let mut next = Vec::with_capacity(cells.len() * values.len());
            for c in &cells {
                for v in values {
                    let mut h = c.clone();
                    h.set(name, v)?;
                    next.push(h);
                }
            }
            cells = next;
        }
        Ok(cells)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub cells: Vec<(Hyperparams, CvReport)>,
    pub best: usize,
}

impl GridResult {
    pub fn best_params(&self) -> &Hyperparams {
        &self.cells[self.best].0
    }

    pub fn best_report(&self) -> &CvReport {
        &self.cells[self.best].1
    }
}

/// Cross-validates every grid cell with the same seed and keeps the one with
/// the highest mean F1; the earliest cell wins ties.
pub fn grid_search(
    kind: ClassifierKind,
    feature_names: &[&str],
    x: &[Vec<f64>],
    y: &[bool],
    grid: &GridSpec,
    base: &Hyperparams,
    seed: u64,
) -> Result<GridResult, UserError> {
    let cells = grid.cells(base)?;
    let reports = cells
        .par_iter()
        .map(|hp| cross_validate(kind, feature_names, x, y, hp, seed))
        .collect::<Result<Vec<_>, _>>()?;
    let best = reports
        .iter()
        .enumerate()
        .fold(0, |b, (i, r)| if r.f1.mean > reports[b].f1.mean { i } else { b });
    Ok(GridResult { cells: cells.into_iter().zip(reports).collect(), best })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_preserves_class_ratio() {
        let y: Vec<bool> = (0..103).map(|i| i % 10 == 0).collect();
        let (train, test) = stratified_split(&y, 0.3, 5);
        assert_eq!(train.len() + test.len(), 103);
        let test_pos = test.iter().filter(|&&i| y[i]).count();
        assert_eq!(test_pos, 3);
        assert_eq!(test.len() - test_pos, 28);
    }

    #[test]
    fn grid_cells_cross_product() {
        let g = GridSpec::parse("max_depth=2,4; n_trees=10,20,30").unwrap();
        let cells = g.cells(&Hyperparams::default()).unwrap();
        assert_eq!(cells.len(), 6);
        assert_eq!((cells[0].max_depth, cells[0].n_trees), (Some(2), 10));
        assert_eq!((cells[1].max_depth, cells[1].n_trees), (Some(2), 20));
        assert_eq!((cells[5].max_depth, cells[5].n_trees), (Some(4), 30));
        assert!(GridSpec::parse("max_depth=").unwrap().cells(&Hyperparams::default()).is_err());
    }

    #[test]
    fn perfect_separator_scores_one() {
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![if i >= 30 { 100.0 + i as f64 } else { i as f64 }]).collect();
        let y: Vec<bool> = (0..40).map(|i| i >= 30).collect();
        let hp = Hyperparams { n_trees: 10, ..Hyperparams::default() };
        for k in ClassifierKind::ALL {
            let r = cross_validate(k, &["a"], &x, &y, &hp, 3).unwrap();
            assert_eq!(r.repeats.len(), 10);
            assert_eq!(r.f1.mean, 1.0, "{k}");
        }
    }
}
