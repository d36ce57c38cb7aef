//! End-to-end run: ingest, per-axis scoring, fusion, and the run manifest.
//!
//! Every stage is also callable on its own so the CLI can persist
//! intermediate artifacts between commands.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use stormsift_core::fusion::{
    passes_thresholds, write_scored_ndjson, ScoreVector, ScoredTweet, ThresholdVector,
};
use stormsift_core::geo::{select_geo_model, ForcingField, GeoCalibration, GeoFeatures, GeoModelSelection};
use stormsift_core::image::{
    image_score, ImageError, ImageScoreResult, ImageScorer, PrecomputedScorer, ToyImageScorer,
};
use stormsift_core::ingest::{
    bucket_hourly, consensus_related, load_labels, load_sensor_csv, load_track_csv, parse_tweet_stream, to_json_line,
    LabelRecord, MediaRef, RejectReport, SensorReading, StudyWindow, TrackPoint, TweetRecord,
};
use stormsift_core::text::{
    default_stopwords, segment_of, tokenize_tweet, train_segments, EmbeddingTable, SegmentSummary, SegmentedEmbeddings,
    TokenizedTweet,
};
use stormsift_core::user::{extract_all, grid_search, GridResult, TrainedUserModel, FEATURE_NAMES};
use thiserror::Error;

use crate::config::PipelineConfig;
use crate::snapshot::{Calibrations, ImageCalibrationInfo, StoreSnapshot, TextCalibration, UserCalibration};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Config,
    Ingest,
    Geo,
    Text,
    User,
    Image,
    Fusion,
    Output,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Ingest => "ingest",
            Stage::Geo => "geo",
            Stage::Text => "text",
            Stage::User => "user",
            Stage::Image => "image",
            Stage::Fusion => "fusion",
            Stage::Output => "output",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
#[error("[{stage}] {message}")]
pub struct PipelineError {
    pub stage: Stage,
    pub message: String,
}

impl PipelineError {
    pub fn new(stage: Stage, message: impl fmt::Display) -> Self {
        PipelineError { stage, message: message.to_string() }
    }
}

fn at<E: fmt::Display>(stage: Stage) -> impl Fn(E) -> PipelineError {
    move |e| PipelineError::new(stage, e)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestedData {
    pub study: StudyWindow,
    /// Accepted messages in input order.
    pub tweets: Vec<TweetRecord>,
    pub rejected: Vec<RejectReport>,
    pub sensors: Vec<SensorReading>,
    pub track: Vec<TrackPoint>,
    pub labels: Vec<LabelRecord>,
}

impl IngestedData {
    /// Consensus "related" label per message id.
    pub fn relevance(&self) -> HashMap<String, bool> {
        consensus_related(&self.labels)
    }
}

fn required<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path, PipelineError> {
    p.as_deref().ok_or_else(|| PipelineError::new(Stage::Config, format!("{key} is required")))
}

/// Parses every input. An input without any accepted message is an error.
pub fn ingest(cfg: &PipelineConfig) -> Result<IngestedData, PipelineError> {
    cfg.validate().map_err(at(Stage::Config))?;
    cfg.check_inputs().map_err(at(Stage::Config))?;
    let study = cfg.study_window().map_err(at(Stage::Config))?;
    let tweets_path = required(&cfg.tweets, "tweets")?;
    let f = File::open(tweets_path).map_err(|e| PipelineError::new(Stage::Ingest, format!("{}: {e}", tweets_path.display())))?;
    let outcome = parse_tweet_stream(BufReader::new(f), &study).map_err(at(Stage::Ingest))?;
    if outcome.accepted.is_empty() {
        return Err(PipelineError::new(
            Stage::Ingest,
            format!("no accepted messages in {} ({} rejected)", tweets_path.display(), outcome.rejected.len()),
        ));
    }
    let sensors = load_sensor_csv(required(&cfg.sensors, "sensors")?, study.start).map_err(at(Stage::Ingest))?;
    let track = load_track_csv(required(&cfg.track, "track")?, study.start).map_err(at(Stage::Ingest))?;
    let labels = match &cfg.labels {
        Some(p) => load_labels(p).map_err(at(Stage::Ingest))?,
        None => Vec::new(),
    };
    Ok(IngestedData { study, tweets: outcome.accepted, rejected: outcome.rejected, sensors, track, labels })
}

/// Per-message forcing features; `None` where the hour lacks readings or
/// a track point.
pub fn geo_features(cfg: &PipelineConfig, data: &IngestedData) -> Vec<Option<GeoFeatures>> {
    let field = ForcingField::new(&data.sensors, &data.track, cfg.geo.clone());
    data.tweets
        .par_iter()
        .map(|t| {
            let w = bucket_hourly(t.created_at, data.study.start).ok()?;
            field.features_at(t.location, w).ok()
        })
        .collect()
}

pub fn select_geo(
    cfg: &PipelineConfig,
    data: &IngestedData,
    features: &[Option<GeoFeatures>],
) -> Result<GeoModelSelection, PipelineError> {
    let labels = data.relevance();
    let samples: Vec<(GeoFeatures, bool)> = data
        .tweets
        .iter()
        .zip(features)
        .filter_map(|(t, g)| g.map(|g| (g, labels.get(&t.id).copied().unwrap_or(false))))
        .collect();
    select_geo_model(&samples, &cfg.geo).map_err(at(Stage::Geo))
}

pub fn tokenize_corpus(data: &IngestedData) -> Vec<TokenizedTweet> {
    let stop = default_stopwords();
    data.tweets
        .iter()
        .map(|t| {
            let w = bucket_hourly(t.created_at, data.study.start).expect("accepted messages lie in the study window");
            tokenize_tweet(&t.id, &t.text, w, stop)
        })
        .collect()
}

pub fn train_text(cfg: &PipelineConfig, corpus: &[TokenizedTweet]) -> Result<SegmentedEmbeddings, PipelineError> {
    train_segments(corpus, &cfg.text_params(), &cfg.seed_term, cfg.segment_hours).map_err(at(Stage::Text))
}

#[derive(Debug, Clone)]
pub struct UserTraining {
    pub model: TrainedUserModel,
    pub grid: Option<GridResult>,
}

/// Trains the credibility model on every author, after a grid search when
/// one is configured.
pub fn train_user(cfg: &PipelineConfig, data: &IngestedData) -> Result<UserTraining, PipelineError> {
    let users = extract_all(&data.tweets, data.study.start).map_err(at(Stage::User))?;
    let x: Vec<Vec<f64>> = users.values().map(|(f, _)| f.to_vec()).collect();
    let y: Vec<bool> = users.values().map(|(_, v)| *v).collect();
    let (hp, grid) = match &cfg.user_grid {
        Some(spec) => {
            let g = grid_search(cfg.user_classifier, &FEATURE_NAMES, &x, &y, spec, &cfg.user_hyperparams, cfg.seed)
                .map_err(at(Stage::User))?;
            (g.best_params().clone(), Some(g))
        }
        None => (cfg.user_hyperparams.clone(), None),
    };
    let model =
        TrainedUserModel::train(cfg.user_classifier, &FEATURE_NAMES, &x, &y, &hp, cfg.seed).map_err(at(Stage::User))?;
    Ok(UserTraining { model, grid })
}

pub fn user_scores(model: &TrainedUserModel, data: &IngestedData) -> Result<Vec<f64>, PipelineError> {
    let users = extract_all(&data.tweets, data.study.start).map_err(at(Stage::User))?;
    let by_author: HashMap<&str, f64> =
        users.iter().map(|(id, (f, _))| (id.as_str(), model.user_score(&f.to_vec()))).collect();
    Ok(data.tweets.iter().map(|t| by_author[t.author.user_id.as_str()]).collect())
}

/// Where image probabilities come from.
pub enum ImageBackend {
    Precomputed(PrecomputedScorer),
    Toy(ToyImageScorer),
    /// Results saved by an earlier `score-images` run, keyed by message id.
    Stored(ImageScoreFile),
    /// No scorer configured: every message scores 0 on the image axis.
    Disabled,
}

impl ImageBackend {
    pub fn from_config(cfg: &PipelineConfig) -> Result<Self, PipelineError> {
        if let Some(p) = &cfg.image_scores {
            return PrecomputedScorer::load(p, cfg.image_gate).map(ImageBackend::Precomputed).map_err(at(Stage::Image));
        }
        if let Some(p) = &cfg.image_model {
            let text = std::fs::read_to_string(p).map_err(|e| PipelineError::new(Stage::Image, format!("{}: {e}", p.display())))?;
            return ToyImageScorer::from_text(&text).map(ImageBackend::Toy).map_err(at(Stage::Image));
        }
        Ok(ImageBackend::Disabled)
    }

    pub fn scorer(&self) -> Option<&dyn ImageScorer> {
        match self {
            ImageBackend::Precomputed(s) => Some(s),
            ImageBackend::Toy(s) => Some(s),
            ImageBackend::Stored(_) | ImageBackend::Disabled => None,
        }
    }

    pub fn info(&self, gate: f64) -> ImageCalibrationInfo {
        if let ImageBackend::Stored(f) = self {
            return f.info.clone();
        }
        let (source, calibration) = match self {
            ImageBackend::Precomputed(s) => ("precomputed", Some(s.calibration())),
            ImageBackend::Toy(s) => ("toy_model", Some(s.calibration())),
            ImageBackend::Stored(_) | ImageBackend::Disabled => ("none", None),
        };
        let gate = self.scorer().map_or(gate, |s| s.gate());
        ImageCalibrationInfo { source: source.into(), gate, calibration }
    }
}

/// Per-message image results. Media the scorer cannot resolve are left out
/// of that message's maximum and reported in the returned warnings.
/// Relative media paths are resolved against `media_root`.
pub fn image_results(backend: &ImageBackend, data: &IngestedData, media_root: &Path) -> (Vec<ImageScoreResult>, Vec<String>) {
    let empty = ImageScoreResult { score: 0.0, tags: None, media_id: None };
    if let ImageBackend::Stored(f) = backend {
        let mut warnings = Vec::new();
        let results = data
            .tweets
            .iter()
            .map(|t| match f.scores.get(&t.id) {
                Some(r) => r.clone(),
                None => {
                    if !t.media.is_empty() {
                        warnings.push(format!("message {}: no stored image score", t.id));
                    }
                    empty.clone()
                }
            })
            .collect();
        return (results, warnings);
    }
    let Some(scorer) = backend.scorer() else {
        let warn = data.tweets.iter().any(|t| !t.media.is_empty());
        let warnings = if warn { vec!["no image scorer configured; image scores are 0".to_string()] } else { vec![] };
        return (vec![empty; data.tweets.len()], warnings);
    };
    let per_tweet: Vec<(ImageScoreResult, Vec<String>)> = data
        .tweets
        .par_iter()
        .map(|t| {
            let mut warnings = Vec::new();
            let usable: Vec<MediaRef> = t
                .media
                .iter()
                .map(|m| MediaRef { media_id: m.media_id.clone(), path: media_root.join(&m.path).display().to_string() })
                .filter(|m| match scorer.score(m) {
                    Ok(_) => true,
                    Err(e) => {
                        warnings.push(format!("message {}: media {} skipped: {e}", t.id, m.media_id));
                        false
                    }
                })
                .collect();
            let r = image_score(&usable, scorer).unwrap_or_else(|_: ImageError| empty.clone());
            (r, warnings)
        })
        .collect();
    let mut warnings = Vec::new();
    let results = per_tweet
        .into_iter()
        .map(|(r, w)| {
            warnings.extend(w);
            r
        })
        .collect();
    (results, warnings)
}

/// Directory that relative media paths are resolved against: the
/// directory of the tweets file.
pub fn media_root(cfg: &PipelineConfig) -> PathBuf {
    cfg.tweets.as_deref().and_then(Path::parent).map(Path::to_path_buf).unwrap_or_default()
}

/// Trained or loaded models for every axis.
pub struct Models {
    pub geo: GeoCalibration,
    pub geo_ranking: Vec<String>,
    pub text: SegmentedEmbeddings,
    pub user: TrainedUserModel,
    pub user_grid: Option<GridResult>,
    pub image: ImageBackend,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub input_records: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub rejected_by_reason: BTreeMap<String, usize>,
    pub sensor_readings: usize,
    pub track_points: usize,
    pub label_records: usize,
    pub authors: usize,
    pub with_media: usize,
    pub geo_unscored: usize,
    pub media_skipped: usize,
    pub scored: usize,
    pub passed_default_thresholds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub seed: u64,
    pub config_sha256: String,
    pub thresholds: ThresholdVector,
    pub counts: Counts,
    pub calibrations: Calibrations,
    /// Top geo candidates, best first.
    pub geo_ranking: Vec<String>,
    pub user_grid_best: Option<String>,
    pub warnings: Vec<String>,
    pub scores_sha256: String,
    /// Wall-clock milliseconds per stage; not part of [`RunManifest::digest`].
    pub timings_ms: BTreeMap<String, f64>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

const LOCATION_KEYS: [&str; 8] = ["tweets", "sensors", "track", "labels", "image_scores", "image_model", "work_dir", "bind"];

/// Digest of every setting except file locations and the bind address.
pub fn config_digest(cfg: &PipelineConfig) -> String {
    let text: String = cfg
        .entries()
        .into_iter()
        .filter(|(k, _)| !LOCATION_KEYS.contains(k))
        .map(|(k, v)| format!("{k}={v}\n"))
        .collect();
    sha256_hex(text.as_bytes())
}

impl RunManifest {
    /// Hash of everything except timings.
    pub fn digest(&self) -> String {
        let stripped = RunManifest { timings_ms: BTreeMap::new(), ..self.clone() };
        sha256_hex(serde_json::to_string(&stripped).expect("manifest serializes").as_bytes())
    }
}

pub struct PipelineRun {
    pub snapshot: StoreSnapshot,
    pub manifest: RunManifest,
}

fn timed<T>(timings: &mut BTreeMap<String, f64>, stage: Stage, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    timings.insert(stage.name().to_string(), start.elapsed().as_secs_f64() * 1e3);
    out
}

/// Trains every axis model from the ingested data.
pub fn train_models(cfg: &PipelineConfig, data: &IngestedData, timings: &mut BTreeMap<String, f64>) -> Result<Models, PipelineError> {
    let features = timed(timings, Stage::Geo, || geo_features(cfg, data));
    let selection = timed(timings, Stage::Geo, || select_geo(cfg, data, &features))?;
    let corpus = tokenize_corpus(data);
    let text = timed(timings, Stage::Text, || train_text(cfg, &corpus))?;
    let user = timed(timings, Stage::User, || train_user(cfg, data))?;
    let image = ImageBackend::from_config(cfg)?;
    Ok(Models {
        geo: selection.calibration.clone(),
        geo_ranking: geo_ranking(&selection),
        text,
        user: user.model,
        user_grid: user.grid,
        image,
    })
}

pub fn geo_ranking(selection: &GeoModelSelection) -> Vec<String> {
    selection
        .ranking()
        .into_iter()
        .take(5)
        .map(|c| {
            format!(
                "{}/{} W={:.4}{}",
                c.function.id(),
                c.transform.family(),
                c.shapiro_w.unwrap_or(f64::NAN),
                if c.chosen { " (chosen)" } else { "" }
            )
        })
        .collect()
}

/// Scores every message with the given models and builds the snapshot and
/// manifest.
pub fn score_with_models(
    cfg: &PipelineConfig,
    data: &IngestedData,
    models: &Models,
    mut timings: BTreeMap<String, f64>,
) -> Result<PipelineRun, PipelineError> {
    let mut warnings = Vec::new();
    for s in &models.text.summaries {
        if let Some(w) = &s.warning {
            warnings.push(w.clone());
        }
    }

    let features = geo_features(cfg, data);
    let geo: Vec<f64> = features.iter().map(|g| g.map_or(0.0, |g| models.geo.score(&g))).collect();
    let geo_unscored = features.iter().filter(|g| g.is_none()).count();
    if geo_unscored > 0 {
        warnings.push(format!("{geo_unscored} messages lack forcing data for their hour; geo score 0"));
    }

    let corpus = tokenize_corpus(data);
    let text_model = realign(&models.text, &corpus);
    let text = timed(&mut timings, Stage::Text, || text_model.scores(&corpus, cfg.text_formula, &cfg.seed_term));
    let user = timed(&mut timings, Stage::User, || user_scores(&models.user, data))?;
    let (image, image_warnings) = timed(&mut timings, Stage::Image, || image_results(&models.image, data, &media_root(cfg)));
    let media_skipped = image_warnings.len();
    warnings.extend(image_warnings);

    let scored = timed(&mut timings, Stage::Fusion, || {
        data.tweets
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let scores = ScoreVector::new(geo[i], text[i], user[i], image[i].score).map_err(at(Stage::Fusion))?;
                Ok(ScoredTweet::new(t.clone(), scores, image[i].tags, &cfg.thresholds))
            })
            .collect::<Result<Vec<_>, PipelineError>>()
    })?;

    let calibrations = Calibrations {
        geo: models.geo.clone(),
        text: TextCalibration {
            formula: cfg.text_formula,
            seed_term: cfg.seed_term.clone(),
            segment_hours: models.text.segment_hours,
            segments: models.text.summaries.clone(),
        },
        user: UserCalibration {
            kind: models.user.kind,
            hyperparams: models.user.hyperparams.label(),
            calibration_min: models.user.calibration_min,
            calibration_max: models.user.calibration_max,
        },
        image: models.image.info(cfg.image_gate),
    };
    let snapshot = StoreSnapshot::new(1, scored, calibrations.clone()).map_err(at(Stage::Fusion))?;

    let mut ndjson = Vec::new();
    write_scored_ndjson(&mut ndjson, snapshot.tweets()).map_err(at(Stage::Output))?;
    let mut by_reason = BTreeMap::new();
    for r in &data.rejected {
        *by_reason.entry(reason_key(r)).or_insert(0) += 1;
    }
    let counts = Counts {
        input_records: data.tweets.len() + data.rejected.len(),
        accepted: data.tweets.len(),
        rejected: data.rejected.len(),
        rejected_by_reason: by_reason,
        sensor_readings: data.sensors.len(),
        track_points: data.track.len(),
        label_records: data.labels.len(),
        authors: data.tweets.iter().map(|t| t.author.user_id.as_str()).collect::<std::collections::BTreeSet<_>>().len(),
        with_media: data.tweets.iter().filter(|t| !t.media.is_empty()).count(),
        geo_unscored,
        media_skipped,
        scored: snapshot.len(),
        passed_default_thresholds: snapshot.tweets().iter().filter(|s| passes_thresholds(&s.scores, &cfg.thresholds)).count(),
    };
    let manifest = RunManifest {
        seed: cfg.seed,
        config_sha256: config_digest(cfg),
        thresholds: cfg.thresholds,
        counts,
        calibrations,
        geo_ranking: models.geo_ranking.clone(),
        user_grid_best: models.user_grid.as_ref().map(|g| g.best_params().label()),
        warnings,
        scores_sha256: sha256_hex(&ndjson),
        timings_ms: timings,
    };
    Ok(PipelineRun { snapshot, manifest })
}

fn reason_key(r: &RejectReport) -> String {
    let s = r.reason.to_string();
    s.split(':').next().unwrap_or(&s).to_string()
}

/// The same tables with the segment assignment recomputed for `corpus`.
fn realign(model: &SegmentedEmbeddings, corpus: &[TokenizedTweet]) -> SegmentedEmbeddings {
    SegmentedEmbeddings {
        segment_hours: model.segment_hours,
        tables: model.tables.clone(),
        summaries: model.summaries.clone(),
        assignment: corpus.iter().map(|t| segment_of(t.window.index, model.segment_hours)).collect(),
    }
}

/// Ingest, train, score and fuse in one pass. Deterministic for a given
/// configuration.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineRun, PipelineError> {
    let mut timings = BTreeMap::new();
    let data = timed(&mut timings, Stage::Ingest, || ingest(cfg))?;
    let models = train_models(cfg, &data, &mut timings)?;
    score_with_models(cfg, &data, &models, timings)
}

/// Artifact locations under the work directory.
#[derive(Debug, Clone)]
pub struct WorkDir {
    pub root: PathBuf,
}

impl WorkDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        WorkDir { root: root.into() }
    }

    pub fn accepted(&self) -> PathBuf {
        self.root.join("accepted.ndjson")
    }
    pub fn rejects(&self) -> PathBuf {
        self.root.join("rejects.ndjson")
    }
    pub fn geo_model(&self) -> PathBuf {
        self.root.join("geo_model.txt")
    }
    pub fn geo_candidates(&self) -> PathBuf {
        self.root.join("geo_candidates.json")
    }
    pub fn text_dir(&self) -> PathBuf {
        self.root.join("text")
    }
    pub fn user_model(&self) -> PathBuf {
        self.root.join("user_model.txt")
    }
    pub fn user_grid(&self) -> PathBuf {
        self.root.join("user_grid.json")
    }
    pub fn image_scores(&self) -> PathBuf {
        self.root.join("image_scores.json")
    }
    pub fn scored(&self) -> PathBuf {
        self.root.join("scored.ndjson")
    }
    pub fn snapshot(&self) -> PathBuf {
        self.root.join("snapshot.json")
    }
    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    pub fn ensure(&self) -> Result<(), PipelineError> {
        std::fs::create_dir_all(&self.root).map_err(|e| out_err(&self.root, e))
    }
}

fn out_err(p: &Path, e: impl fmt::Display) -> PipelineError {
    PipelineError::new(Stage::Output, format!("{}: {e}", p.display()))
}

fn write_file(p: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    if let Some(parent) = p.parent() {
        std::fs::create_dir_all(parent).map_err(|e| out_err(parent, e))?;
    }
    std::fs::write(p, bytes).map_err(|e| out_err(p, e))
}

fn read_file(stage: Stage, p: &Path, hint: &str) -> Result<String, PipelineError> {
    std::fs::read_to_string(p).map_err(|e| PipelineError::new(stage, format!("{}: {e} ({hint})", p.display())))
}

pub fn write_ingest(work: &WorkDir, data: &IngestedData) -> Result<(), PipelineError> {
    let accepted: String = data.tweets.iter().map(|t| to_json_line(t) + "\n").collect();
    write_file(&work.accepted(), accepted.as_bytes())?;
    let mut rejects = String::new();
    for r in &data.rejected {
        rejects.push_str(&serde_json::to_string(r).map_err(at(Stage::Output))?);
        rejects.push('\n');
    }
    write_file(&work.rejects(), rejects.as_bytes())
}

pub fn write_geo(work: &WorkDir, selection: &GeoModelSelection) -> Result<(), PipelineError> {
    write_file(&work.geo_model(), selection.calibration.to_text().as_bytes())?;
    let json = serde_json::to_string_pretty(&selection.candidates).map_err(at(Stage::Output))?;
    write_file(&work.geo_candidates(), json.as_bytes())
}

pub fn load_geo(work: &WorkDir) -> Result<(GeoCalibration, Vec<String>), PipelineError> {
    let text = read_file(Stage::Geo, &work.geo_model(), "run select-geo first")?;
    let cal = GeoCalibration::from_text(&text).map_err(at(Stage::Geo))?;
    let ranking = match std::fs::read_to_string(work.geo_candidates()) {
        Ok(json) => {
            let candidates = serde_json::from_str(&json).map_err(at(Stage::Geo))?;
            geo_ranking(&GeoModelSelection { candidates, calibration: cal.clone() })
        }
        Err(_) => Vec::new(),
    };
    Ok((cal, ranking))
}

pub fn write_text(work: &WorkDir, model: &SegmentedEmbeddings) -> Result<(), PipelineError> {
    let dir = work.text_dir();
    std::fs::create_dir_all(&dir).map_err(|e| out_err(&dir, e))?;
    for (s, table) in &model.tables {
        let p = dir.join(format!("segment_{s}.emb"));
        let f = File::create(&p).map_err(|e| out_err(&p, e))?;
        let mut w = BufWriter::new(f);
        table.write(&mut w).and_then(|_| w.flush()).map_err(|e| out_err(&p, e))?;
    }
    let summary = TextSummaryFile { segment_hours: model.segment_hours, summaries: model.summaries.clone() };
    let json = serde_json::to_string_pretty(&summary).map_err(at(Stage::Output))?;
    write_file(&dir.join("summary.json"), json.as_bytes())
}

#[derive(Debug, Serialize, Deserialize)]
struct TextSummaryFile {
    segment_hours: u32,
    summaries: Vec<SegmentSummary>,
}

pub fn load_text(work: &WorkDir) -> Result<SegmentedEmbeddings, PipelineError> {
    let dir = work.text_dir();
    let summary: TextSummaryFile =
        serde_json::from_str(&read_file(Stage::Text, &dir.join("summary.json"), "run train-text first")?)
            .map_err(at(Stage::Text))?;
    let mut tables = BTreeMap::new();
    for s in summary.summaries.iter().filter(|s| s.vocab_size > 0) {
        let p = dir.join(format!("segment_{}.emb", s.segment));
        let f = File::open(&p).map_err(|e| PipelineError::new(Stage::Text, format!("{}: {e}", p.display())))?;
        let table = EmbeddingTable::read(BufReader::new(f)).map_err(at(Stage::Text))?;
        tables.insert(s.segment, table);
    }
    Ok(SegmentedEmbeddings { segment_hours: summary.segment_hours, tables, summaries: summary.summaries, assignment: vec![] })
}

pub fn write_user(work: &WorkDir, training: &UserTraining) -> Result<(), PipelineError> {
    write_file(&work.user_model(), training.model.to_text().as_bytes())?;
    if let Some(g) = &training.grid {
        let json = serde_json::to_string_pretty(g).map_err(at(Stage::Output))?;
        write_file(&work.user_grid(), json.as_bytes())?;
    }
    Ok(())
}

pub fn load_user(work: &WorkDir) -> Result<TrainedUserModel, PipelineError> {
    let text = read_file(Stage::User, &work.user_model(), "run train-user first")?;
    TrainedUserModel::from_text(&text).map_err(at(Stage::User))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageScoreFile {
    pub info: ImageCalibrationInfo,
    pub scores: BTreeMap<String, ImageScoreResult>,
    pub warnings: Vec<String>,
}

pub fn write_images(work: &WorkDir, file: &ImageScoreFile) -> Result<(), PipelineError> {
    let json = serde_json::to_string_pretty(file).map_err(at(Stage::Output))?;
    write_file(&work.image_scores(), json.as_bytes())
}

/// Writes the scored lines, snapshot and manifest.
pub fn write_run(work: &WorkDir, run: &PipelineRun) -> Result<(), PipelineError> {
    work.ensure()?;
    let p = work.scored();
    let f = File::create(&p).map_err(|e| out_err(&p, e))?;
    write_scored_ndjson(BufWriter::new(f), run.snapshot.tweets()).map_err(|e| out_err(&p, e))?;
    run.snapshot.save(&work.snapshot()).map_err(at(Stage::Output))?;
    let json = serde_json::to_string_pretty(&run.manifest).map_err(at(Stage::Output))?;
    write_file(&work.manifest(), json.as_bytes())
}

pub fn read_manifest(path: &Path) -> Result<RunManifest, PipelineError> {
    let text = read_file(Stage::Output, path, "run score first")?;
    serde_json::from_str(&text).map_err(at(Stage::Output))
}
