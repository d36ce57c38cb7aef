use image::RgbImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ingest::{IncidentTag, LabelRecord, MediaRef};
use crate::kvdoc::{KvDoc, KvError, KvWriter};
use crate::stats::sigmoid;
use crate::user::stratified_split;

use super::scores::{check_gate, ImageCalibration, ImageScorer, ImageScores, ScoreSource, TagProbabilities};
use super::ImageError;

pub const IMAGE_FEATURE_NAMES: [&str; 13] = [
    "red_0", "red_1", "red_2", "red_3", "green_0", "green_1", "green_2", "green_3", "blue_0", "blue_1", "blue_2",
    "blue_3", "edge_density",
];

const HIST_BINS: usize = 4;
const EDGE_THRESHOLD: f64 = 32.0;
const HOLDOUT_FRACTION: f64 = 0.3;
const L2: f64 = 1e-3;
const MAX_ITER: usize = 5000;
const TOLERANCE: f64 = 1e-7;

/// Per-channel 4-bin colour histograms (fractions of pixels) followed by the
/// fraction of pixels whose grey-level forward gradient `|dx| + |dy|`
/// exceeds 32.
pub fn extract_image_features(img: &RgbImage) -> Vec<f64> {
    let mut f = vec![0.0; IMAGE_FEATURE_NAMES.len()];
    let (w, h) = img.dimensions();
    let n = (w as f64 * h as f64).max(1.0);
    for p in img.pixels() {
        for c in 0..3 {
            let bin = p.0[c] as usize * HIST_BINS / 256;
            f[c * HIST_BINS + bin] += 1.0 / n;
        }
    }
    if w >= 2 && h >= 2 {
        let grey = |x: u32, y: u32| {
            let p = img.get_pixel(x, y).0;
            (p[0] as f64 + p[1] as f64 + p[2] as f64) / 3.0
        };
        let mut edges = 0usize;
        for y in 0..h - 1 {
            for x in 0..w - 1 {
                let g = grey(x, y);
                if (grey(x + 1, y) - g).abs() + (grey(x, y + 1) - g).abs() > EDGE_THRESHOLD {
                    edges += 1;
                }
            }
        }
        f[3 * HIST_BINS] = edges as f64 / ((w - 1) as f64 * (h - 1) as f64);
    }
    f
}

/// Logistic model on standardized features, fitted by unweighted full-batch
/// gradient descent with a small ridge penalty on the weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LogisticModel {
    fn fit(x: &[Vec<f64>], y: &[bool]) -> Self {
        let n = x.len() as f64;
        let d = x[0].len();
        let means: Vec<f64> = (0..d).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let scales: Vec<f64> = (0..d)
            .map(|j| {
                let s = (x.iter().map(|r| (r[j] - means[j]).powi(2)).sum::<f64>() / n).sqrt();
                if s > 1e-12 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        let z: Vec<Vec<f64>> = x.iter().map(|r| (0..d).map(|j| (r[j] - means[j]) / scales[j]).collect()).collect();
        let step = 1.0 / (0.25 * (d as f64 + 1.0) + L2);
        let mut w = vec![0.0; d];
        let mut b = 0.0;
        for _ in 0..MAX_ITER {
            let mut gw = vec![0.0; d];
            let mut gb = 0.0;
            for (row, &label) in z.iter().zip(y) {
                let p = sigmoid(b + row.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>());
                let r = p - if label { 1.0 } else { 0.0 };
                gb += r;
                for (g, a) in gw.iter_mut().zip(row) {
                    *g += r * a;
                }
            }
            let mut worst = (gb / n).abs();
            for (g, wj) in gw.iter_mut().zip(&w) {
                *g = *g / n + L2 * wj;
                worst = worst.max(g.abs());
            }
            if worst < TOLERANCE {
                break;
            }
            b -= step * gb / n;
            for (wj, g) in w.iter_mut().zip(&gw) {
                *wj -= step * g;
            }
        }
        LogisticModel { means, scales, weights: w, bias: b }
    }

    pub fn predict(&self, features: &[f64]) -> f64 {
        let z = features
            .iter()
            .enumerate()
            .map(|(j, v)| (v - self.means[j]) / self.scales[j] * self.weights[j])
            .sum::<f64>();
        sigmoid(self.bias + z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToyTrainingReport {
    pub train_size: usize,
    pub holdout_size: usize,
    /// Stage-one accuracy at `p >= 0.5` on the held-out 30%.
    pub holdout_accuracy: Option<f64>,
}

/// Two-stage logistic image classifier. Stage two has one model per
/// incident tag, trained on related images only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyImageScorer {
    pub seed: u64,
    pub gate: f64,
    pub stage1: LogisticModel,
    pub flood: LogisticModel,
    pub wind: LogisticModel,
    pub destruction: LogisticModel,
    pub calibration: ImageCalibration,
}

/// Splits the images 70/30 (stratified on the related label, seeded), fits
/// both stages on the 70% and reports stage-one accuracy on the rest.
/// Calibration bounds are the log-probabilities seen on the training part.
pub fn train_toy_classifier(
    images: &[(RgbImage, LabelRecord)],
    seed: u64,
    gate: f64,
) -> Result<(ToyImageScorer, ToyTrainingReport), ImageError> {
    check_gate(gate)?;
    if images.is_empty() {
        return Err(ImageError::EmptyTrainingSet);
    }
    let y: Vec<bool> = images.iter().map(|(_, l)| l.related).collect();
    if y.iter().all(|&v| v) || y.iter().all(|&v| !v) {
        return Err(ImageError::SingleClass);
    }
    let x: Vec<Vec<f64>> = images.par_iter().map(|(img, _)| extract_image_features(img)).collect();
    let (train, test) = stratified_split(&y, HOLDOUT_FRACTION, seed);
    let xt: Vec<Vec<f64>> = train.iter().map(|&i| x[i].clone()).collect();
    let yt: Vec<bool> = train.iter().map(|&i| y[i]).collect();
    let stage1 = LogisticModel::fit(&xt, &yt);

    let related: Vec<usize> = train.iter().copied().filter(|&i| y[i]).collect();
    let xr: Vec<Vec<f64>> = related.iter().map(|&i| x[i].clone()).collect();
    let tag_model = |tag: IncidentTag| {
        let yr: Vec<bool> = related.iter().map(|&i| images[i].1.has_tag(tag)).collect();
        LogisticModel::fit(&xr, &yr)
    };
    let flood = tag_model(IncidentTag::Flooding);
    let wind = tag_model(IncidentTag::Windy);
    let destruction = tag_model(IncidentTag::Destruction);

    let calibration = ImageCalibration::from_probabilities(xt.iter().map(|f| stage1.predict(f)))
        .ok_or(ImageError::EmptyTrainingSet)?;
    let holdout_accuracy = (!test.is_empty()).then(|| {
        let correct = test.iter().filter(|&&i| (stage1.predict(&x[i]) >= 0.5) == y[i]).count();
        correct as f64 / test.len() as f64
    });
    let scorer = ToyImageScorer { seed, gate, stage1, flood, wind, destruction, calibration };
    let report = ToyTrainingReport { train_size: train.len(), holdout_size: test.len(), holdout_accuracy };
    Ok((scorer, report))
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl ToyImageScorer {
    pub fn score_image(&self, img: &RgbImage) -> ImageScores {
        let f = extract_image_features(img);
        let p_related = self.stage1.predict(&f);
        let tags = (p_related >= self.gate).then(|| TagProbabilities {
            flood: self.flood.predict(&f),
            wind: self.wind.predict(&f),
            destruction: self.destruction.predict(&f),
        });
        ImageScores { p_related, tags, source: ScoreSource::ToyModel }
    }

    pub fn to_text(&self) -> String {
        let mut w = KvWriter::new()
            .comment("toy image model")
            .put("features", IMAGE_FEATURE_NAMES.join(","))
            .put("seed", self.seed)
            .put("gate", self.gate)
            .put("log_min", self.calibration.log_min)
            .put("log_max", self.calibration.log_max);
        for (name, m) in self.models() {
            w = w
                .put(&format!("{name}.means"), join(&m.means))
                .put(&format!("{name}.scales"), join(&m.scales))
                .put(&format!("{name}.weights"), join(&m.weights))
                .put(&format!("{name}.bias"), m.bias);
        }
        w.finish()
    }

    pub fn from_text(text: &str) -> Result<Self, ImageError> {
        let doc = KvDoc::parse(text).map_err(kv_err)?;
        let fmt = |key: &str, message: String| ImageError::Format { line: doc.line_of(key).unwrap_or(0), message };
        if doc.require("features").map_err(kv_err)? != IMAGE_FEATURE_NAMES.join(",") {
            return Err(fmt("features", "feature list does not match this build".into()));
        }
        let vector = |key: &str| -> Result<Vec<f64>, ImageError> {
            let v = doc
                .require(key)
                .map_err(kv_err)?
                .split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|e| fmt(key, e.to_string())))
                .collect::<Result<Vec<_>, _>>()?;
            if v.len() != IMAGE_FEATURE_NAMES.len() || v.iter().any(|x| !x.is_finite()) {
                return Err(fmt(key, format!("expected {} finite values", IMAGE_FEATURE_NAMES.len())));
            }
            Ok(v)
        };
        let model = |name: &str| -> Result<LogisticModel, ImageError> {
            Ok(LogisticModel {
                means: vector(&format!("{name}.means"))?,
                scales: vector(&format!("{name}.scales"))?,
                weights: vector(&format!("{name}.weights"))?,
                bias: doc.parse_value(&format!("{name}.bias")).map_err(kv_err)?,
            })
        };
        let gate: f64 = doc.parse_value("gate").map_err(kv_err)?;
        check_gate(gate)?;
        Ok(ToyImageScorer {
            seed: doc.parse_value("seed").map_err(kv_err)?,
            gate,
            stage1: model("stage1")?,
            flood: model("flood")?,
            wind: model("wind")?,
            destruction: model("destruction")?,
            calibration: ImageCalibration {
                log_min: doc.parse_value("log_min").map_err(kv_err)?,
                log_max: doc.parse_value("log_max").map_err(kv_err)?,
            },
        })
    }

    fn models(&self) -> [(&'static str, &LogisticModel); 4] {
        [("stage1", &self.stage1), ("flood", &self.flood), ("wind", &self.wind), ("destruction", &self.destruction)]
    }
}

fn kv_err(e: KvError) -> ImageError {
    let line = match &e {
        KvError::Syntax { line } | KvError::Duplicate { line, .. } => *line,
        _ => 0,
    };
    ImageError::Format { line, message: e.to_string() }
}

impl ImageScorer for ToyImageScorer {
    fn score(&self, media: &MediaRef) -> Result<ImageScores, ImageError> {
        let img = image::open(&media.path)
            .map_err(|e| ImageError::Decode { path: media.path.clone(), message: e.to_string() })?
            .to_rgb8();
        Ok(self.score_image(&img))
    }

    fn calibration(&self) -> ImageCalibration {
        self.calibration
    }

    fn gate(&self) -> f64 {
        self.gate
    }
}
