//! Image relevance in two stages: a binary related/not-related probability,
//! then per-tag probabilities for flooding, wind and destruction when the
//! first stage clears a gate. Scorers are pluggable; two are built in, an
//! adapter for externally computed probabilities and a small logistic model
//! over colour and edge features.

mod augment;
mod precomputed;
mod scores;
mod toy;

use thiserror::Error;

pub use augment::{augment_dataset, plan_augmentation, AugmentationOp, AugmentedImage, LabeledImage, Provenance, BALANCE_TOLERANCE};
pub use precomputed::{load_precomputed_scores, read_precomputed_scores, PrecomputedScorer};
pub use scores::{
    image_score, ImageCalibration, ImageScoreResult, ImageScorer, ImageScores, ScoreSource, TagProbabilities,
    DEFAULT_GATE, PROBABILITY_FLOOR,
};
pub use toy::{extract_image_features, train_toy_classifier, ToyImageScorer, ToyTrainingReport, IMAGE_FEATURE_NAMES};

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("line {line}: {message}")]
    Schema { line: u64, message: String },
    #[error("line {line}: duplicate media id {media_id:?}")]
    DuplicateMedia { line: u64, media_id: String },
    #[error("probability {value} for {field} is outside [0, 1]")]
    Probability { field: &'static str, value: f64 },
    #[error("gate {0} is outside [0, 1]")]
    InvalidGate(f64),
    #[error("no score for media {0:?}")]
    UnknownMedia(String),
    #[error("cannot decode image {path}: {message}")]
    Decode { path: String, message: String },
    #[error("no training images")]
    EmptyTrainingSet,
    #[error("training images contain a single related class")]
    SingleClass,
    #[error("no augmentation operations given")]
    NoOperations,
    #[error("target balance {0} must be positive and at most 1")]
    InvalidBalance(f64),
    #[error("cannot open {path}: {source}")]
    Open { path: String, source: std::io::Error },
    #[error("model text line {line}: {message}")]
    Format { line: usize, message: String },
}
