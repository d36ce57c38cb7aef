//! Function and transform selection by normality ranking, and the frozen
//! calibration used to score new messages.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eval::{auroc, best_f1};
use crate::kvdoc::{KvDoc, KvWriter};
use crate::stats::{mean, min_max, rescale_0_100, std_dev};

use super::features::{GeoFeatures, GeoFunction};
use super::normality::{shapiro_wilk, SW_MAX_N, SW_MIN_N};
use super::transform::{fit_boxcox_lambda, transform_boxcox_with, transform_log10, transform_minmax, TransformKind};
use super::{GeoError, GeoParams};

/// How many of the best-W candidates compete on centring.
pub const TOP_K: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateReport {
    pub function: GeoFunction,
    pub transform: TransformKind,
    /// Position in declaration order (function-major, then min-max, log10,
    /// Box-Cox).
    pub order: usize,
    pub shapiro_w: Option<f64>,
    /// Moments of the transformed scores rescaled onto `[0, 1]`.
    pub mean: Option<f64>,
    pub stddev: Option<f64>,
    pub pct_within_1sd: Option<f64>,
    pub best_f1: Option<f64>,
    pub auroc: Option<f64>,
    /// 1-based position in the W ranking; `None` when excluded.
    pub rank: Option<usize>,
    pub excluded: Option<String>,
    pub chosen: bool,
    /// Range of the transformed training scores.
    pub train_min: Option<f64>,
    pub train_max: Option<f64>,
}

impl CandidateReport {
    fn excluded(function: GeoFunction, transform: TransformKind, order: usize, reason: String) -> Self {
        CandidateReport {
            function,
            transform,
            order,
            shapiro_w: None,
            mean: None,
            stddev: None,
            pct_within_1sd: None,
            best_f1: None,
            auroc: None,
            rank: None,
            excluded: Some(reason),
            chosen: false,
            train_min: None,
            train_max: None,
        }
    }

    fn centring(&self) -> f64 {
        self.mean.map_or(f64::INFINITY, |m| (m - 0.5).abs())
    }
}

/// Everything needed to score a new message on the geo axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoCalibration {
    pub function: GeoFunction,
    pub transform: TransformKind,
    pub train_min: f64,
    pub train_max: f64,
    pub idw_power: f64,
    pub d_min: f64,
    pub epsilon: f64,
}

impl GeoCalibration {
    /// Transformed function value before rescaling.
    pub fn transformed(&self, g: &GeoFeatures) -> f64 {
        let g = GeoFeatures { distance_mi: g.distance_mi.max(self.d_min), ..*g };
        self.transform.apply(self.function.eval(&g), self.epsilon)
    }

    /// Score in `[0, 100]`: the training minimum maps to 0, the maximum to
    /// 100, anything outside is clamped.
    pub fn score(&self, g: &GeoFeatures) -> f64 {
        rescale_0_100(self.transformed(g), self.train_min, self.train_max)
    }

    pub fn to_text(&self) -> String {
        let w = KvWriter::new()
            .comment("geo calibration")
            .put("function", self.function)
            .put("transform", self.transform.family());
        let w = match self.transform {
            TransformKind::BoxCox { lambda } => w.put("lambda", lambda),
            _ => w,
        };
        w.put("train_min", self.train_min)
            .put("train_max", self.train_max)
            .put("idw_power", self.idw_power)
            .put("d_min", self.d_min)
            .put("epsilon", self.epsilon)
            .finish()
    }

    pub fn from_text(text: &str) -> Result<Self, GeoError> {
        let perr = |e: crate::kvdoc::KvError| GeoError::Parse(e.to_string());
        let doc = KvDoc::parse(text).map_err(perr)?;
        let function: GeoFunction = doc.require("function").map_err(perr)?.parse()?;
        let transform = match doc.require("transform").map_err(perr)? {
            "minmax" => TransformKind::MinMax,
            "log10" => TransformKind::Log10,
            "boxcox" => {
                let lambda: f64 = doc.parse_value("lambda").map_err(perr)?;
                if !lambda.is_finite() {
                    return Err(GeoError::Parse("lambda must be finite".into()));
                }
                TransformKind::BoxCox { lambda }
            }
            other => return Err(GeoError::Parse(format!("unknown transform {other:?}"))),
        };
        let cal = GeoCalibration {
            function,
            transform,
            train_min: doc.parse_value("train_min").map_err(perr)?,
            train_max: doc.parse_value("train_max").map_err(perr)?,
            idw_power: doc.parse_value("idw_power").map_err(perr)?,
            d_min: doc.parse_value("d_min").map_err(perr)?,
            epsilon: doc.parse_value("epsilon").map_err(perr)?,
        };
        if !(cal.train_min.is_finite() && cal.train_max.is_finite() && cal.train_min <= cal.train_max) {
            return Err(GeoError::Parse("train_min/train_max invalid".into()));
        }
        Ok(cal)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoModelSelection {
    /// All 27 combinations in declaration order.
    pub candidates: Vec<CandidateReport>,
    pub calibration: GeoCalibration,
}

impl GeoModelSelection {
    pub fn chosen(&self) -> &CandidateReport {
        self.candidates.iter().find(|c| c.chosen).expect("selection always has a chosen candidate")
    }

    /// Candidates that were ranked, best first.
    pub fn ranking(&self) -> Vec<&CandidateReport> {
        let mut r: Vec<&CandidateReport> = self.candidates.iter().filter(|c| c.rank.is_some()).collect();
        r.sort_by_key(|c| c.rank);
        r
    }
}

fn transform_families(raw: &[f64], epsilon: f64) -> Vec<(TransformKind, Result<Vec<f64>, GeoError>)> {
    let boxcox = fit_boxcox_lambda(raw, epsilon).map(|l| (l, transform_boxcox_with(raw, l, epsilon)));
    vec![
        (TransformKind::MinMax, Ok(raw.to_vec())),
        (TransformKind::Log10, Ok(transform_log10(raw, epsilon))),
        match boxcox {
            Ok((lambda, ys)) => (TransformKind::BoxCox { lambda }, Ok(ys)),
            Err(e) => (TransformKind::BoxCox { lambda: f64::NAN }, Err(e)),
        },
    ]
}

/// Evenly spaced deterministic subsample capped at the W size limit.
fn normality_sample(ys: &[f64]) -> Vec<f64> {
    let n = ys.len();
    if n <= SW_MAX_N {
        return ys.to_vec();
    }
    (0..SW_MAX_N).map(|i| ys[i * n / SW_MAX_N]).collect()
}

fn evaluate(
    function: GeoFunction,
    transform: TransformKind,
    order: usize,
    ys: Result<Vec<f64>, GeoError>,
    labels: &[bool],
) -> CandidateReport {
    let ys = match ys {
        Ok(ys) => ys,
        Err(e) => return CandidateReport::excluded(function, transform, order, e.to_string()),
    };
    if ys.len() < SW_MIN_N {
        return CandidateReport::excluded(function, transform, order, format!("only {} samples", ys.len()));
    }
    if ys.iter().any(|y| !y.is_finite()) {
        return CandidateReport::excluded(function, transform, order, "non-finite transformed score".into());
    }
    let unit = match transform_minmax(&ys) {
        Ok(u) => u,
        Err(e) => return CandidateReport::excluded(function, transform, order, e.to_string()),
    };
    let w = match shapiro_wilk(&normality_sample(&ys)) {
        Ok(w) => w,
        Err(e) => return CandidateReport::excluded(function, transform, order, e.to_string()),
    };
    let (lo, hi) = min_max(&ys).expect("non-empty");
    let m = mean(&unit);
    let sd = std_dev(&unit);
    let within = unit.iter().filter(|&&u| (u - m).abs() <= sd).count() as f64 / unit.len() as f64 * 100.0;

    let scores: Vec<f64> = unit.iter().map(|u| u * 100.0).collect();
    let both_classes = labels.iter().any(|&l| l) && labels.iter().any(|&l| !l);
    let (f1, auc) = if both_classes {
        let f1 = best_f1(&scores, labels, (0..=100).map(f64::from)).ok().map(|(_, m)| m.f1);
        (f1, auroc(&scores, labels).ok())
    } else {
        (None, None)
    };

    CandidateReport {
        function,
        transform,
        order,
        shapiro_w: Some(w),
        mean: Some(m),
        stddev: Some(sd),
        pct_within_1sd: Some(within),
        best_f1: f1,
        auroc: auc,
        rank: None,
        excluded: None,
        chosen: false,
        train_min: Some(lo),
        train_max: Some(hi),
    }
}

fn ranking_cmp(a: &CandidateReport, b: &CandidateReport) -> Ordering {
    let wa = a.shapiro_w.unwrap_or(f64::NEG_INFINITY);
    let wb = b.shapiro_w.unwrap_or(f64::NEG_INFINITY);
    wb.total_cmp(&wa)
        .then_with(|| a.centring().total_cmp(&b.centring()))
        .then_with(|| a.order.cmp(&b.order))
}

/// Ranks the non-excluded candidates by W (ties: closeness of the mean to
/// 0.5, then declaration order) and marks, among the top [`TOP_K`], the one
/// whose mean is closest to 0.5. Returns the index of the chosen candidate.
pub fn rank_and_choose(candidates: &mut [CandidateReport]) -> Result<usize, GeoError> {
    let mut idx: Vec<usize> = (0..candidates.len()).filter(|&i| candidates[i].excluded.is_none()).collect();
    if idx.is_empty() {
        return Err(GeoError::NoViableCandidate);
    }
    idx.sort_by(|&i, &j| ranking_cmp(&candidates[i], &candidates[j]));
    for c in candidates.iter_mut() {
        c.rank = None;
        c.chosen = false;
    }
    for (r, &i) in idx.iter().enumerate() {
        candidates[i].rank = Some(r + 1);
    }
    let chosen = *idx
        .iter()
        .take(TOP_K)
        .min_by(|&&i, &&j| {
            candidates[i]
                .centring()
                .total_cmp(&candidates[j].centring())
                .then_with(|| candidates[i].rank.cmp(&candidates[j].rank))
        })
        .expect("non-empty");
    candidates[chosen].chosen = true;
    Ok(chosen)
}

/// Evaluates all function/transform combinations on a labelled training set
/// and freezes the chosen one. Labels only feed the F1 and AUROC columns.
pub fn select_geo_model(samples: &[(GeoFeatures, bool)], params: &GeoParams) -> Result<GeoModelSelection, GeoError> {
    params.validate()?;
    if samples.is_empty() {
        return Err(GeoError::Degenerate("no training samples".into()));
    }
    let labels: Vec<bool> = samples.iter().map(|(_, l)| *l).collect();

    let per_function: Vec<Vec<CandidateReport>> = GeoFunction::ALL
        .par_iter()
        .enumerate()
        .map(|(fi, &function)| {
            let raw: Vec<f64> = samples
                .iter()
                .map(|(g, _)| {
                    let g = GeoFeatures { distance_mi: g.distance_mi.max(params.d_min), ..*g };
                    function.eval(&g)
                })
                .collect();
            transform_families(&raw, params.epsilon)
                .into_iter()
                .enumerate()
                .map(|(ti, (kind, ys))| evaluate(function, kind, fi * 3 + ti, ys, &labels))
                .collect()
        })
        .collect();
    let mut candidates: Vec<CandidateReport> = per_function.into_iter().flatten().collect();

    let chosen = rank_and_choose(&mut candidates)?;
    let c = &candidates[chosen];
    let calibration = GeoCalibration {
        function: c.function,
        transform: c.transform,
        train_min: c.train_min.expect("ranked candidates carry a range"),
        train_max: c.train_max.expect("ranked candidates carry a range"),
        idw_power: params.idw_power,
        d_min: params.d_min,
        epsilon: params.epsilon,
    };
    Ok(GeoModelSelection { candidates, calibration })
}
