use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::stats::{rescale_0_100, sigmoid};

use super::tree::{grow, GiniStats, NewtonStats, Node, Tree, TreeParams};
use super::UserError;

pub const PROBABILITY_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    LogisticRegression,
    RandomForest,
    GradientBoosted,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 3] =
        [ClassifierKind::LogisticRegression, ClassifierKind::RandomForest, ClassifierKind::GradientBoosted];

    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::LogisticRegression => "logistic_regression",
            ClassifierKind::RandomForest => "random_forest",
            ClassifierKind::GradientBoosted => "gradient_boosted",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassifierKind {
    type Err = UserError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "logistic_regression" | "lr" | "logistic" => Ok(ClassifierKind::LogisticRegression),
            "random_forest" | "rf" | "forest" => Ok(ClassifierKind::RandomForest),
            "gradient_boosted" | "gb" | "boosted" => Ok(ClassifierKind::GradientBoosted),
            other => Err(UserError::InvalidHyperparameter(format!("unknown classifier {other:?}"))),
        }
    }
}

/// Settings for all three classifier kinds; each kind reads the fields it
/// needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub max_leaf_nodes: Option<usize>,
    /// Gradient-boosting shrinkage.
    pub learning_rate: f64,
    /// Logistic-regression L2 strength.
    pub l2: f64,
    pub max_iter: usize,
    pub tolerance: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            n_trees: 100,
            max_depth: None,
            min_samples_split: 2,
            max_leaf_nodes: None,
            learning_rate: 0.1,
            l2: 1e-4,
            max_iter: 2000,
            tolerance: 1e-6,
        }
    }
}

fn parse_opt_usize(v: &str) -> Option<Option<usize>> {
    match v.trim() {
        "none" | "None" | "" => Some(None),
        s => s.parse().ok().map(Some),
    }
}

fn fmt_opt(v: Option<usize>) -> String {
    v.map_or_else(|| "none".to_string(), |d| d.to_string())
}

impl Hyperparams {
    pub const NAMES: [&'static str; 8] =
        ["n_trees", "max_depth", "min_samples_split", "max_leaf_nodes", "learning_rate", "l2", "max_iter", "tolerance"];

    /// Sets one named field from its text form (`none` clears the optional
    /// limits).
    pub fn set(&mut self, name: &str, value: &str) -> Result<(), UserError> {
        let bad = || UserError::InvalidHyperparameter(format!("{name}={value}"));
        let v = value.trim();
        match name.trim() {
            "n_trees" => self.n_trees = v.parse().map_err(|_| bad())?,
            "max_depth" => self.max_depth = parse_opt_usize(v).ok_or_else(bad)?,
            "min_samples_split" => self.min_samples_split = v.parse().map_err(|_| bad())?,
            "max_leaf_nodes" => self.max_leaf_nodes = parse_opt_usize(v).ok_or_else(bad)?,
            "learning_rate" => self.learning_rate = v.parse().map_err(|_| bad())?,
            "l2" => self.l2 = v.parse().map_err(|_| bad())?,
            "max_iter" => self.max_iter = v.parse().map_err(|_| bad())?,
            "tolerance" => self.tolerance = v.parse().map_err(|_| bad())?,
            _ => return Err(UserError::InvalidHyperparameter(format!("unknown hyperparameter {name:?}"))),
        }
        self.validate()
    }

    pub fn get(&self, name: &str) -> Option<String> {
        Some(match name {
            "n_trees" => self.n_trees.to_string(),
            "max_depth" => fmt_opt(self.max_depth),
            "min_samples_split" => self.min_samples_split.to_string(),
            "max_leaf_nodes" => fmt_opt(self.max_leaf_nodes),
            "learning_rate" => self.learning_rate.to_string(),
            "l2" => self.l2.to_string(),
            "max_iter" => self.max_iter.to_string(),
            "tolerance" => self.tolerance.to_string(),
            _ => return None,
        })
    }

    pub fn validate(&self) -> Result<(), UserError> {
        let bad = |m: &str| Err(UserError::InvalidHyperparameter(m.to_string()));
        if self.n_trees == 0 {
            return bad("n_trees must be positive");
        }
        if self.max_depth == Some(0) {
            return bad("max_depth must be positive");
        }
        if self.min_samples_split < 2 {
            return bad("min_samples_split must be at least 2");
        }
        if self.max_leaf_nodes.is_some_and(|m| m < 2) {
            return bad("max_leaf_nodes must be at least 2");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return bad("l2 must be non-negative");
        }
        if self.max_iter == 0 || !(self.tolerance > 0.0) {
            return bad("max_iter and tolerance must be positive");
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        Self::NAMES.iter().map(|n| format!("{n}={}", self.get(n).unwrap())).collect::<Vec<_>>().join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelBody {
    Logistic { means: Vec<f64>, scales: Vec<f64>, weights: Vec<f64>, bias: f64 },
    Forest { trees: Vec<Tree> },
    Boosted { init: f64, learning_rate: f64, trees: Vec<Tree> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedUserModel {
    pub kind: ClassifierKind,
    pub hyperparams: Hyperparams,
    pub seed: u64,
    pub feature_names: Vec<String>,
    /// Range of `ln p` over the training set.
    pub calibration_min: f64,
    pub calibration_max: f64,
    pub body: ModelBody,
}

pub(crate) fn check_training_set(x: &[Vec<f64>], y: &[bool]) -> Result<usize, UserError> {
    if x.len() != y.len() {
        return Err(UserError::LengthMismatch { features: x.len(), labels: y.len() });
    }
    if x.is_empty() {
        return Err(UserError::EmptyTrainingSet);
    }
    let f = x[0].len();
    if f == 0 || x.iter().any(|r| r.len() != f) {
        return Err(UserError::FeatureWidth);
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(UserError::NonFinite);
    }
    if !(y.iter().any(|&l| l) && y.iter().any(|&l| !l)) {
        return Err(UserError::SingleClass);
    }
    Ok(f)
}

/// Weights giving both classes equal total weight.
pub(crate) fn balanced_weights(y: &[bool]) -> Vec<f64> {
    let n = y.len() as f64;
    let pos = y.iter().filter(|&&l| l).count() as f64;
    let (wp, wn) = (n / (2.0 * pos), n / (2.0 * (n - pos)));
    y.iter().map(|&l| if l { wp } else { wn }).collect()
}

fn sub_seed(seed: u64, k: u64) -> u64 {
    seed.wrapping_add(k.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn train_logistic(x: &[Vec<f64>], y: &[bool], hp: &Hyperparams) -> ModelBody {
    let n = x.len();
    let f = x[0].len();
    let nf = n as f64;
    let means: Vec<f64> = (0..f).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / nf).collect();
    let scales: Vec<f64> = (0..f)
        .map(|j| {
            let v = x.iter().map(|r| (r[j] - means[j]).powi(2)).sum::<f64>() / nf;
            if v > 0.0 {
                v.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let z: Vec<Vec<f64>> = x.iter().map(|r| (0..f).map(|j| (r[j] - means[j]) / scales[j]).collect()).collect();
    let sw = balanced_weights(y);
    let wsum: f64 = sw.iter().sum();

    // Standardized columns have unit variance, so the Hessian of the mean
    // weighted loss is bounded by (f + 1) / 4 times the largest weight share.
    let wmax = sw.iter().cloned().fold(0.0, f64::max) * nf / wsum;
    let step = 1.0 / (0.25 * wmax * (f as f64 + 1.0) + hp.l2);
    let mut w = vec![0.0; f];
    let mut b = 0.0;
    let mut grad = vec![0.0; f];
    for _ in 0..hp.max_iter {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut gb = 0.0;
        for ((zi, &yi), &wi) in z.iter().zip(y).zip(&sw) {
            let p = sigmoid(b + zi.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>());
            let r = wi * (p - if yi { 1.0 } else { 0.0 }) / wsum;
            for j in 0..f {
                grad[j] += r * zi[j];
            }
            gb += r;
        }
        for j in 0..f {
            grad[j] += hp.l2 * w[j];
        }
        let gnorm = grad.iter().chain(std::iter::once(&gb)).fold(0.0f64, |m, g| m.max(g.abs()));
        if gnorm < hp.tolerance {
            break;
        }
        for j in 0..f {
            w[j] -= step * grad[j];
        }
        b -= step * gb;
    }
    ModelBody::Logistic { means, scales, weights: w, bias: b }
}

fn tree_params(hp: &Hyperparams, max_features: Option<usize>) -> TreeParams {
    TreeParams {
        max_depth: hp.max_depth,
        min_samples_split: hp.min_samples_split,
        max_leaf_nodes: hp.max_leaf_nodes,
        max_features,
    }
}

fn train_forest(x: &[Vec<f64>], y: &[bool], hp: &Hyperparams, seed: u64) -> ModelBody {
    let f = x[0].len();
    let mtry = ((f as f64).sqrt().round() as usize).max(1);
    let params = tree_params(hp, Some(mtry));
    let pos: Vec<usize> = (0..y.len()).filter(|&i| y[i]).collect();
    let neg: Vec<usize> = (0..y.len()).filter(|&i| !y[i]).collect();
    let ones = vec![1.0; y.len()];
    let half = y.len() / 2;
    let trees = (0..hp.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, t as u64));
            let mut sample = Vec::with_capacity(2 * half.max(1));
            for _ in 0..half.max(1) {
                sample.push(pos[rng.random_range(0..pos.len())]);
                sample.push(neg[rng.random_range(0..neg.len())]);
            }
            grow(x, sample, GiniStats::empty(y, &ones), &params, &mut rng)
        })
        .collect();
    ModelBody::Forest { trees }
}

fn train_boosted(x: &[Vec<f64>], y: &[bool], hp: &Hyperparams, seed: u64) -> ModelBody {
    let sw = balanced_weights(y);
    let wpos: f64 = y.iter().zip(&sw).filter(|(l, _)| **l).map(|(_, w)| w).sum();
    let wneg: f64 = y.iter().zip(&sw).filter(|(l, _)| !**l).map(|(_, w)| w).sum();
    let init = (wpos / wneg).ln();
    let params = tree_params(&Hyperparams { max_depth: hp.max_depth.or(Some(3)), ..hp.clone() }, None);
    let mut f = vec![init; x.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trees = Vec::with_capacity(hp.n_trees);
    let all: Vec<usize> = (0..x.len()).collect();
    for _ in 0..hp.n_trees {
        let mut g = vec![0.0; x.len()];
        let mut h = vec![0.0; x.len()];
        for i in 0..x.len() {
            let p = sigmoid(f[i]);
            g[i] = sw[i] * (p - if y[i] { 1.0 } else { 0.0 });
            h[i] = sw[i] * (p * (1.0 - p)).max(1e-12);
        }
        let tree = grow(x, all.clone(), NewtonStats::empty(&g, &h), &params, &mut rng);
        for i in 0..x.len() {
            f[i] += hp.learning_rate * tree.predict(&x[i]);
        }
        trees.push(tree);
    }
    ModelBody::Boosted { init, learning_rate: hp.learning_rate, trees }
}

impl TrainedUserModel {
    /// Trains a classifier for the positive (verified) class. Deterministic
    /// for a given seed.
    pub fn train(
        kind: ClassifierKind,
        feature_names: &[&str],
        x: &[Vec<f64>],
        y: &[bool],
        hp: &Hyperparams,
        seed: u64,
    ) -> Result<Self, UserError> {
        hp.validate()?;
        let f = check_training_set(x, y)?;
        if feature_names.len() != f {
            return Err(UserError::FeatureWidth);
        }
        let body = match kind {
            ClassifierKind::LogisticRegression => train_logistic(x, y, hp),
            ClassifierKind::RandomForest => train_forest(x, y, hp, seed),
            ClassifierKind::GradientBoosted => train_boosted(x, y, hp, seed),
        };
        let mut model = TrainedUserModel {
            kind,
            hyperparams: hp.clone(),
            seed,
            feature_names: feature_names.iter().map(|s| s.to_string()).collect(),
            calibration_min: 0.0,
            calibration_max: 0.0,
            body,
        };
        let logs: Vec<f64> = x.iter().map(|r| model.predict_proba(r).clamp(PROBABILITY_FLOOR, 1.0).ln()).collect();
        model.calibration_min = logs.iter().cloned().fold(f64::INFINITY, f64::min);
        model.calibration_max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Ok(model)
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Probability of the positive class, always in `[0, 1]`.
    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        let p = match &self.body {
            ModelBody::Logistic { means, scales, weights, bias } => {
                let z: f64 = x.iter().zip(means).zip(scales).zip(weights).map(|(((v, m), s), w)| (v - m) / s * w).sum();
                sigmoid(bias + z)
            }
            ModelBody::Forest { trees } => trees.iter().map(|t| t.predict(x)).sum::<f64>() / trees.len() as f64,
            ModelBody::Boosted { init, learning_rate, trees } => {
                sigmoid(init + learning_rate * trees.iter().map(|t| t.predict(x)).sum::<f64>())
            }
        };
        if p.is_nan() {
            0.5
        } else {
            p.clamp(0.0, 1.0)
        }
    }

    /// `ln p` rescaled against the training range onto `[0, 100]`.
    pub fn user_score(&self, x: &[f64]) -> f64 {
        let lp = self.predict_proba(x).clamp(PROBABILITY_FLOOR, 1.0).ln();
        rescale_0_100(lp, self.calibration_min, self.calibration_max)
    }

    pub fn trees(&self) -> Option<&[Tree]> {
        match &self.body {
            ModelBody::Forest { trees } | ModelBody::Boosted { trees, .. } => Some(trees),
            ModelBody::Logistic { .. } => None,
        }
    }

    /// Mean impurity decrease per feature: each tree's gains normalized to
    /// sum 1, averaged over trees with at least one split, normalized again.
    pub fn gini_importance(&self) -> Result<Vec<(String, f64)>, UserError> {
        let trees = self.trees().ok_or(UserError::NotATreeEnsemble)?;
        let f = self.n_features();
        let mut acc = vec![0.0; f];
        let mut used = 0usize;
        for t in trees {
            let g = t.gain_by_feature(f);
            let s: f64 = g.iter().sum();
            if s > 0.0 {
                used += 1;
                for (a, v) in acc.iter_mut().zip(g) {
                    *a += v / s;
                }
            }
        }
        let total: f64 = acc.iter().sum();
        if used == 0 || total <= 0.0 {
            return Err(UserError::NoSplits);
        }
        Ok(self.feature_names.iter().cloned().zip(acc.into_iter().map(|a| a / total)).collect())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("user_model\n");
        let mut kv = |k: &str, v: String| {
            out.push_str(k);
            out.push('=');
            out.push_str(&v);
            out.push('\n');
        };
        kv("kind", self.kind.to_string());
        kv("seed", self.seed.to_string());
        kv("features", self.feature_names.join(","));
        kv("calibration_min", self.calibration_min.to_string());
        kv("calibration_max", self.calibration_max.to_string());
        for n in Hyperparams::NAMES {
            kv(&format!("hp.{n}"), self.hyperparams.get(n).unwrap());
        }
        let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        let trees = match &self.body {
            ModelBody::Logistic { means, scales, weights, bias } => {
                kv("means", join(means));
                kv("scales", join(scales));
                kv("weights", join(weights));
                kv("bias", bias.to_string());
                &[][..]
            }
            ModelBody::Forest { trees } => trees.as_slice(),
            ModelBody::Boosted { init, learning_rate, trees } => {
                kv("init", init.to_string());
                kv("shrinkage", learning_rate.to_string());
                trees.as_slice()
            }
        };
        kv("trees", trees.len().to_string());
        for t in trees {
            let pre = t.preorder();
            out.push_str(&format!("tree {}\n", pre.len()));
            for n in pre {
                match n {
                    Node::Leaf { value } => out.push_str(&format!("leaf {value}\n")),
                    Node::Split { feature, threshold, gain, .. } => {
                        out.push_str(&format!("split {feature} {threshold} {gain}\n"))
                    }
                }
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, UserError> {
        let err = |line: usize, m: &str| UserError::Format { line, message: m.to_string() };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
        match lines.next() {
            Some((_, "user_model")) => {}
            _ => return Err(err(1, "expected 'user_model' header")),
        }
        let mut fields = std::collections::HashMap::new();
        let mut n_trees = None;
        let mut last_line = 1;
        for (ln, l) in lines.by_ref() {
            last_line = ln;
            let (k, v) = l.split_once('=').ok_or_else(|| err(ln, "expected key=value"))?;
            if k == "trees" {
                n_trees = Some(v.parse::<usize>().map_err(|_| err(ln, "bad tree count"))?);
                break;
            }
            fields.insert(k.to_string(), (ln, v.to_string()));
        }
        let n_trees = n_trees.ok_or_else(|| err(last_line, "missing trees="))?;
        let header_end = last_line;
        let get = |k: &str| fields.get(k).map(|(_, v)| v.as_str()).ok_or_else(|| err(header_end, &format!("missing {k}")));
        let num = |k: &str| -> Result<f64, UserError> {
            let (ln, v) = fields.get(k).ok_or_else(|| err(header_end, &format!("missing {k}")))?;
            v.parse().map_err(|_| err(*ln, &format!("bad number for {k}")))
        };
        let vec = |k: &str| -> Result<Vec<f64>, UserError> {
            let (ln, v) = fields.get(k).ok_or_else(|| err(header_end, &format!("missing {k}")))?;
            v.split(',').map(|s| s.parse().map_err(|_| err(*ln, &format!("bad list for {k}")))).collect()
        };
        let kind: ClassifierKind = get("kind")?.parse()?;
        let seed: u64 = get("seed")?.parse().map_err(|_| err(header_end, "bad seed"))?;
        let feature_names: Vec<String> = get("features")?.split(',').map(str::to_string).collect();
        let mut hyperparams = Hyperparams::default();
        for n in Hyperparams::NAMES {
            hyperparams.set(n, get(&format!("hp.{n}"))?)?;
        }

        let mut trees = Vec::with_capacity(n_trees);
        for _ in 0..n_trees {
            let (ln, head) = lines.next().ok_or_else(|| err(last_line, "missing tree"))?;
            let count: usize = head
                .strip_prefix("tree ")
                .and_then(|c| c.parse().ok())
                .ok_or_else(|| err(ln, "expected 'tree <nodes>'"))?;
            let mut nodes = Vec::with_capacity(count);
            for _ in 0..count {
                let (ln, l) = lines.next().ok_or_else(|| err(ln, "truncated tree"))?;
                let parts: Vec<&str> = l.split(' ').collect();
                let node = match parts.as_slice() {
                    ["leaf", v] => Node::Leaf { value: v.parse().map_err(|_| err(ln, "bad leaf"))? },
                    ["split", f, t, g] => Node::Split {
                        feature: f.parse().map_err(|_| err(ln, "bad split feature"))?,
                        threshold: t.parse().map_err(|_| err(ln, "bad threshold"))?,
                        gain: g.parse().map_err(|_| err(ln, "bad gain"))?,
                        left: 0,
                        right: 0,
                    },
                    _ => return Err(err(ln, "expected leaf or split")),
                };
                if let Node::Split { feature, .. } = node {
                    if feature >= feature_names.len() {
                        return Err(err(ln, "split feature out of range"));
                    }
                }
                nodes.push(node);
                last_line = ln;
            }
            trees.push(Tree::from_preorder(&nodes).ok_or_else(|| err(last_line, "malformed preorder tree"))?);
        }

        let body = match kind {
            ClassifierKind::LogisticRegression => {
                ModelBody::Logistic { means: vec("means")?, scales: vec("scales")?, weights: vec("weights")?, bias: num("bias")? }
            }
            ClassifierKind::RandomForest => ModelBody::Forest { trees },
            ClassifierKind::GradientBoosted => {
                ModelBody::Boosted { init: num("init")?, learning_rate: num("shrinkage")?, trees }
            }
        };
        if let ModelBody::Logistic { means, scales, weights, .. } = &body {
            if [means.len(), scales.len(), weights.len()].iter().any(|&l| l != feature_names.len()) {
                return Err(err(last_line, "logistic vectors do not match feature count"));
            }
        }
        Ok(TrainedUserModel {
            kind,
            hyperparams,
            seed,
            feature_names,
            calibration_min: num("calibration_min")?,
            calibration_max: num("calibration_max")?,
            body,
        })
    }
}
