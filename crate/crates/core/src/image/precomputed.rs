//! Adapter for probabilities computed elsewhere, e.g. by a convolutional
//! network.
//!
//! ```text
//! media_id,p_related,p_flood,p_wind,p_destruction
//! ```
//!
//! Stage-two columns may be empty on rows below the gate.

use std::collections::HashMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::Deserialize;

use crate::ingest::MediaRef;

use super::scores::{check_gate, ImageCalibration, ImageScorer, ImageScores, ScoreSource, TagProbabilities};
use super::ImageError;

#[derive(Debug, Deserialize)]
struct Row {
    media_id: String,
    p_related: f64,
    p_flood: Option<f64>,
    p_wind: Option<f64>,
    p_destruction: Option<f64>,
}

pub fn read_precomputed_scores<R: Read>(reader: R, gate: f64) -> Result<HashMap<String, ImageScores>, ImageError> {
    check_gate(gate)?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| ImageError::Schema { line: 1, message: e.to_string() })?.clone();
    let mut out = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| ImageError::Schema {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let row: Row = rec.deserialize(Some(&headers)).map_err(|e| ImageError::Schema { line, message: e.to_string() })?;
        let tags = match (row.p_flood, row.p_wind, row.p_destruction) {
            (Some(flood), Some(wind), Some(destruction)) => Some(TagProbabilities { flood, wind, destruction }),
            (None, None, None) => None,
            _ => {
                return Err(ImageError::Schema { line, message: "stage-two columns must be all present or all empty".into() })
            }
        };
        let scores = ImageScores::gated(row.p_related, tags, ScoreSource::Precomputed, gate).map_err(|e| match e {
            ImageError::Schema { message, .. } => ImageError::Schema { line, message },
            other => ImageError::Schema { line, message: other.to_string() },
        })?;
        if out.contains_key(&row.media_id) {
            return Err(ImageError::DuplicateMedia { line, media_id: row.media_id });
        }
        out.insert(row.media_id, scores);
    }
    Ok(out)
}

pub fn load_precomputed_scores(path: impl AsRef<Path>, gate: f64) -> Result<HashMap<String, ImageScores>, ImageError> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| ImageError::Open { path: path.display().to_string(), source: e })?;
    read_precomputed_scores(f, gate)
}

/// Looks media up by id. Calibration bounds come from every row in the
/// table.
#[derive(Debug, Clone)]
pub struct PrecomputedScorer {
    scores: HashMap<String, ImageScores>,
    calibration: ImageCalibration,
    gate: f64,
}

impl PrecomputedScorer {
    pub fn new(scores: HashMap<String, ImageScores>, gate: f64) -> Result<Self, ImageError> {
        check_gate(gate)?;
        let calibration = ImageCalibration::from_probabilities(scores.values().map(|s| s.p_related))
            .unwrap_or(ImageCalibration { log_min: 0.0, log_max: 0.0 });
        Ok(PrecomputedScorer { scores, calibration, gate })
    }

    pub fn load(path: impl AsRef<Path>, gate: f64) -> Result<Self, ImageError> {
        Self::new(load_precomputed_scores(path, gate)?, gate)
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn get(&self, media_id: &str) -> Option<&ImageScores> {
        self.scores.get(media_id)
    }
}

impl ImageScorer for PrecomputedScorer {
    fn score(&self, media: &MediaRef) -> Result<ImageScores, ImageError> {
        self.scores.get(&media.media_id).copied().ok_or_else(|| ImageError::UnknownMedia(media.media_id.clone()))
    }

    fn calibration(&self) -> ImageCalibration {
        self.calibration
    }

    fn gate(&self) -> f64 {
        self.gate
    }
}
