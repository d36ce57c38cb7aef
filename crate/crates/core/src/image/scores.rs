use serde::{Deserialize, Serialize};

use crate::ingest::MediaRef;
use crate::stats::rescale_0_100;

use super::ImageError;

pub const DEFAULT_GATE: f64 = 0.5;
pub const PROBABILITY_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreSource {
    Precomputed,
    ToyModel,
}

/// Stage-two probabilities, one per incident tag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TagProbabilities {
    pub flood: f64,
    pub wind: f64,
    pub destruction: f64,
}

impl TagProbabilities {
    pub fn validate(&self) -> Result<(), ImageError> {
        check_probability("p_flood", self.flood)?;
        check_probability("p_wind", self.wind)?;
        check_probability("p_destruction", self.destruction)
    }
}

pub(crate) fn check_probability(field: &'static str, value: f64) -> Result<(), ImageError> {
    if value.is_finite() && (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(ImageError::Probability { field, value })
    }
}

pub(crate) fn check_gate(gate: f64) -> Result<(), ImageError> {
    if gate.is_finite() && (0.0..=1.0).contains(&gate) {
        Ok(())
    } else {
        Err(ImageError::InvalidGate(gate))
    }
}

/// Scorer output for a single image. `tags` is present exactly when
/// `p_related` reaches the scorer's gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageScores {
    pub p_related: f64,
    pub tags: Option<TagProbabilities>,
    pub source: ScoreSource,
}

impl ImageScores {
    /// Validates the probabilities and applies the gate: tags are dropped
    /// below it and required at or above it.
    pub fn gated(
        p_related: f64,
        tags: Option<TagProbabilities>,
        source: ScoreSource,
        gate: f64,
    ) -> Result<Self, ImageError> {
        check_probability("p_related", p_related)?;
        check_gate(gate)?;
        if let Some(t) = &tags {
            t.validate()?;
        }
        let tags = if p_related >= gate {
            Some(tags.ok_or(ImageError::Schema {
                line: 0,
                message: format!("p_related {p_related} reaches the gate {gate} but stage-two probabilities are missing"),
            })?)
        } else {
            None
        };
        Ok(ImageScores { p_related, tags, source })
    }
}

/// Log-probability bounds observed on the scorer's reference set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageCalibration {
    pub log_min: f64,
    pub log_max: f64,
}

impl ImageCalibration {
    pub fn from_probabilities<I: IntoIterator<Item = f64>>(ps: I) -> Option<Self> {
        ps.into_iter().map(log_probability).fold(None, |acc, l| match acc {
            None => Some(ImageCalibration { log_min: l, log_max: l }),
            Some(c) => Some(ImageCalibration { log_min: c.log_min.min(l), log_max: c.log_max.max(l) }),
        })
    }

    pub fn score(&self, p_related: f64) -> f64 {
        rescale_0_100(log_probability(p_related), self.log_min, self.log_max)
    }
}

pub fn log_probability(p: f64) -> f64 {
    p.clamp(PROBABILITY_FLOOR, 1.0).ln()
}

/// A source of two-stage image probabilities. Implementations must return
/// identical scores for identical inputs.
pub trait ImageScorer: Send + Sync {
    fn score(&self, media: &MediaRef) -> Result<ImageScores, ImageError>;
    fn calibration(&self) -> ImageCalibration;
    fn gate(&self) -> f64;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageScoreResult {
    pub score: f64,
    pub tags: Option<TagProbabilities>,
    pub media_id: Option<String>,
}

/// Image score of a message: 0 without media, otherwise the highest
/// calibrated score among its media, with that image's tag probabilities.
pub fn image_score(media: &[MediaRef], scorer: &dyn ImageScorer) -> Result<ImageScoreResult, ImageError> {
    let calibration = scorer.calibration();
    let mut best: Option<ImageScoreResult> = None;
    for m in media {
        let s = scorer.score(m)?;
        let score = calibration.score(s.p_related);
        if best.as_ref().is_none_or(|b| score > b.score) {
            best = Some(ImageScoreResult { score, tags: s.tags, media_id: Some(m.media_id.clone()) });
        }
    }
    Ok(best.unwrap_or(ImageScoreResult { score: 0.0, tags: None, media_id: None }))
}

#[cfg(test)]
mod tests {
    use super::*;

    const TAGS: TagProbabilities = TagProbabilities { flood: 0.8, wind: 0.1, destruction: 0.3 };

    #[test]
    fn gate_controls_tags() {
        let above = ImageScores::gated(0.9, Some(TAGS), ScoreSource::Precomputed, 0.5).unwrap();
        assert_eq!(above.tags, Some(TAGS));
        let at = ImageScores::gated(0.5, Some(TAGS), ScoreSource::Precomputed, 0.5).unwrap();
        assert!(at.tags.is_some());
        let below = ImageScores::gated(0.49, Some(TAGS), ScoreSource::Precomputed, 0.5).unwrap();
        assert_eq!(below.tags, None);
        assert!(ImageScores::gated(0.7, None, ScoreSource::Precomputed, 0.5).is_err());
        assert!(ImageScores::gated(1.5, None, ScoreSource::Precomputed, 0.5).is_err());
        assert!(ImageScores::gated(0.2, None, ScoreSource::Precomputed, 1.5).is_err());
    }

    #[test]
    fn calibration_endpoints() {
        let c = ImageCalibration::from_probabilities([0.01, 0.5, 0.99]).unwrap();
        assert_eq!(c.score(0.99), 100.0);
        assert_eq!(c.score(0.01), 0.0);
        assert!(c.score(0.5) > 50.0);
        assert!(ImageCalibration::from_probabilities([]).is_none());
    }
}
