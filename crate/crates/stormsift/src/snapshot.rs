//! Immutable scored snapshots and the store that publishes them.

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use stormsift_core::fusion::{passes_thresholds, ScoredTweet, ThresholdVector};
use stormsift_core::geo::GeoCalibration;
use stormsift_core::image::ImageCalibration;
use stormsift_core::text::{SegmentSummary, TextScoreFormula};
use stormsift_core::user::ClassifierKind;
use thiserror::Error;

pub const MAX_PAGE_SIZE: usize = 10_000;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("page_size must be in 1..={MAX_PAGE_SIZE}, got {0}")]
    PageSize(usize),
    #[error("duplicate tweet id {0:?}")]
    DuplicateId(String),
    #[error("cannot read or write {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextCalibration {
    pub formula: TextScoreFormula,
    pub seed_term: String,
    pub segment_hours: u32,
    pub segments: Vec<SegmentSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserCalibration {
    pub kind: ClassifierKind,
    pub hyperparams: String,
    pub calibration_min: f64,
    pub calibration_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageCalibrationInfo {
    /// `precomputed`, `toy_model` or `none`.
    pub source: String,
    pub gate: f64,
    pub calibration: Option<ImageCalibration>,
}

/// Calibration artifacts of all four submodels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibrations {
    pub geo: GeoCalibration,
    pub text: TextCalibration,
    pub user: UserCalibration,
    pub image: ImageCalibrationInfo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SnapshotFile {
    version: u64,
    calibrations: Calibrations,
    tweets: Vec<ScoredTweet>,
}

/// Scored messages ordered by `(created_at, id)`. Never mutated after
/// construction.
#[derive(Debug, Clone, PartialEq)]
pub struct StoreSnapshot {
    version: u64,
    tweets: Vec<ScoredTweet>,
    index: HashMap<String, usize>,
    calibrations: Calibrations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryPage {
    pub version: u64,
    pub total: usize,
    pub page: usize,
    pub page_size: usize,
    pub items: Vec<ScoredTweet>,
}

impl StoreSnapshot {
    pub fn new(version: u64, mut tweets: Vec<ScoredTweet>, calibrations: Calibrations) -> Result<Self, SnapshotError> {
        tweets.sort_by(|a, b| a.tweet.created_at.cmp(&b.tweet.created_at).then_with(|| a.tweet.id.cmp(&b.tweet.id)));
        let mut index = HashMap::with_capacity(tweets.len());
        for (i, t) in tweets.iter().enumerate() {
            if index.insert(t.tweet.id.clone(), i).is_some() {
                return Err(SnapshotError::DuplicateId(t.tweet.id.clone()));
            }
        }
        Ok(StoreSnapshot { version, tweets, index, calibrations })
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn len(&self) -> usize {
        self.tweets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tweets.is_empty()
    }

    pub fn tweets(&self) -> &[ScoredTweet] {
        &self.tweets
    }

    pub fn calibrations(&self) -> &Calibrations {
        &self.calibrations
    }

    pub fn get(&self, id: &str) -> Option<&ScoredTweet> {
        self.index.get(id).map(|&i| &self.tweets[i])
    }

    /// Same content under another version number.
    pub fn with_version(&self, version: u64) -> Self {
        StoreSnapshot { version, ..self.clone() }
    }

    /// Zero-based page of the messages passing `t`, plus the total count.
    pub fn query(&self, t: &ThresholdVector, page: usize, page_size: usize) -> Result<QueryPage, SnapshotError> {
        if page_size == 0 || page_size > MAX_PAGE_SIZE {
            return Err(SnapshotError::PageSize(page_size));
        }
        let passing: Vec<&ScoredTweet> = self.tweets.iter().filter(|s| passes_thresholds(&s.scores, t)).collect();
        let items = passing
            .iter()
            .skip(page.saturating_mul(page_size))
            .take(page_size)
            .map(|s| ScoredTweet { passed: true, ..(*s).clone() })
            .collect();
        Ok(QueryPage { version: self.version, total: passing.len(), page, page_size, items })
    }

    pub fn save(&self, path: &Path) -> Result<(), SnapshotError> {
        let io = |e: String| SnapshotError::Io { path: path.display().to_string(), message: e };
        let file = SnapshotFile { version: self.version, calibrations: self.calibrations.clone(), tweets: self.tweets.clone() };
        let text = serde_json::to_string(&file).map_err(|e| io(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| io(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, SnapshotError> {
        let io = |e: String| SnapshotError::Io { path: path.display().to_string(), message: e };
        let text = std::fs::read_to_string(path).map_err(|e| io(e.to_string()))?;
        let file: SnapshotFile = serde_json::from_str(&text).map_err(|e| io(e.to_string()))?;
        Self::new(file.version, file.tweets, file.calibrations)
    }
}

/// Holds the current snapshot. Readers take a cheap `Arc` clone and keep
/// querying it even while a newer one is published.
#[derive(Debug)]
pub struct Store {
    current: RwLock<Arc<StoreSnapshot>>,
}

impl Store {
    pub fn new(initial: StoreSnapshot) -> Self {
        Store { current: RwLock::new(Arc::new(initial)) }
    }

    pub fn current(&self) -> Arc<StoreSnapshot> {
        self.current.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    /// Installs `next` with a version one above the current one and returns
    /// that version.
    pub fn publish(&self, next: StoreSnapshot) -> u64 {
        let mut guard = self.current.write().unwrap_or_else(|e| e.into_inner());
        let version = guard.version + 1;
        *guard = Arc::new(next.with_version(version));
        version
    }
}
