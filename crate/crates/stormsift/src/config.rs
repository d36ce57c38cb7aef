//! Pipeline configuration.
//!
//! A config file is a `key=value` document (blank lines and `#` comments
//! ignored). Every key can also be given on the command line, and command
//! line values win. Relative paths in a file are resolved against the
//! file's directory.
//!
//! ```text
//! study_start=2017-09-10T00:00:00Z
//! study_end=2017-09-13T00:00:00Z
//! tweets=tweets.ndjson
//! sensors=sensors.csv
//! track=track.csv
//! labels=labels.csv
//! image_scores=image_scores.csv
//! work_dir=work
//! seed_term=hurricane
//! text_formula=DP
//! user_classifier=random_forest
//! user_grid=max_depth=4,8;n_trees=50
//! geo_min=50
//! text_min=30
//! user_min=85
//! image_min=85
//! seed=42
//! ```

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use stormsift_core::fusion::ThresholdVector;
use stormsift_core::geo::GeoParams;
use stormsift_core::image::DEFAULT_GATE;
use stormsift_core::ingest::{StudyWindow, Timestamp};
use stormsift_core::kvdoc::{KvDoc, KvError};
use stormsift_core::text::{TextModelParams, TextScoreFormula};
use stormsift_core::user::{ClassifierKind, GridSpec, Hyperparams};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error(transparent)]
    Syntax(#[from] KvError),
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("{key}: {message}")]
    Value { key: String, message: String },
    #[error("{key} is required")]
    MissingPath { key: String },
    #[error("{key}: {path} does not exist")]
    PathNotFound { key: String, path: String },
}

fn bad(key: &str, message: impl ToString) -> ConfigError {
    ConfigError::Value { key: key.to_string(), message: message.to_string() }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub study_start: Timestamp,
    pub study_end: Timestamp,
    pub tweets: Option<PathBuf>,
    pub sensors: Option<PathBuf>,
    pub track: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    /// Precomputed image probabilities; takes precedence over `image_model`.
    pub image_scores: Option<PathBuf>,
    /// A saved toy image classifier.
    pub image_model: Option<PathBuf>,
    /// Directory for stage artifacts and the snapshot.
    pub work_dir: PathBuf,
    pub geo: GeoParams,
    /// `seed` is overwritten by the top-level seed.
    pub text: TextModelParams,
    pub seed_term: String,
    pub segment_hours: u32,
    pub text_formula: TextScoreFormula,
    pub user_classifier: ClassifierKind,
    pub user_hyperparams: Hyperparams,
    pub user_grid: Option<GridSpec>,
    pub image_gate: f64,
    pub thresholds: ThresholdVector,
    pub bind: SocketAddr,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            study_start: Timestamp(1_505_001_600),
            study_end: Timestamp(1_505_260_800),
            tweets: None,
            sensors: None,
            track: None,
            labels: None,
            image_scores: None,
            image_model: None,
            work_dir: PathBuf::from("work"),
            geo: GeoParams::default(),
            text: TextModelParams { dimension: 50, ..TextModelParams::default() },
            seed_term: "hurricane".into(),
            segment_hours: 24,
            text_formula: TextScoreFormula::Dp,
            user_classifier: ClassifierKind::RandomForest,
            user_hyperparams: Hyperparams::default(),
            user_grid: None,
            image_gate: DEFAULT_GATE,
            thresholds: ThresholdVector::RECOMMENDED,
            bind: SocketAddr::from(([127, 0, 0, 1], 8080)),
            seed: 42,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| bad(key, format!("cannot parse {value:?}: {e}")))
}

fn opt_path(value: &str, base: &Path) -> Option<PathBuf> {
    if value.is_empty() {
        None
    } else {
        Some(base.join(value))
    }
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

impl PipelineConfig {
    pub const KEYS: [&'static str; 36] = [
        "study_start",
        "study_end",
        "tweets",
        "sensors",
        "track",
        "labels",
        "image_scores",
        "image_model",
        "work_dir",
        "idw_power",
        "d_min",
        "epsilon",
        "min_precip_stations",
        "window_size",
        "dimension",
        "min_count",
        "negative_samples",
        "epochs",
        "learning_rate",
        "seed_term",
        "segment_hours",
        "text_formula",
        "user_classifier",
        "n_trees",
        "max_depth",
        "min_samples_split",
        "max_leaf_nodes",
        "user_grid",
        "image_gate",
        "geo_min",
        "text_min",
        "user_min",
        "image_min",
        "bind",
        "seed",
        "user_learning_rate",
    ];

    /// Sets one key from its text form. Relative paths are joined onto
    /// `base`; an empty path value clears an optional input.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<(), ConfigError> {
        let value = value.trim();
        match key {
            "study_start" => self.study_start = Timestamp::parse_iso(value).map_err(|e| bad(key, e))?,
            "study_end" => self.study_end = Timestamp::parse_iso(value).map_err(|e| bad(key, e))?,
            "tweets" => self.tweets = opt_path(value, base),
            "sensors" => self.sensors = opt_path(value, base),
            "track" => self.track = opt_path(value, base),
            "labels" => self.labels = opt_path(value, base),
            "image_scores" => self.image_scores = opt_path(value, base),
            "image_model" => self.image_model = opt_path(value, base),
            "work_dir" => self.work_dir = base.join(value),
            "idw_power" => self.geo.idw_power = parse(key, value)?,
            "d_min" => self.geo.d_min = parse(key, value)?,
            "epsilon" => self.geo.epsilon = parse(key, value)?,
            "min_precip_stations" => self.geo.min_precip_stations = parse(key, value)?,
            "window_size" => self.text.window_size = parse(key, value)?,
            "dimension" => self.text.dimension = parse(key, value)?,
            "min_count" => self.text.min_count = parse(key, value)?,
            "negative_samples" => self.text.negative_samples = parse(key, value)?,
            "epochs" => self.text.epochs = parse(key, value)?,
            "learning_rate" => self.text.learning_rate = parse(key, value)?,
            "seed_term" => self.seed_term = value.to_lowercase(),
            "segment_hours" => self.segment_hours = parse(key, value)?,
            "text_formula" => self.text_formula = parse(key, value)?,
            "user_classifier" => self.user_classifier = parse(key, value)?,
            "n_trees" | "max_depth" | "min_samples_split" | "max_leaf_nodes" => {
                self.user_hyperparams.set(key, value).map_err(|e| bad(key, e))?
            }
            "user_learning_rate" => self.user_hyperparams.set("learning_rate", value).map_err(|e| bad(key, e))?,
            "user_grid" => {
                self.user_grid = if value.is_empty() {
                    None
                } else {
                    let g = GridSpec::parse(value).map_err(|e| bad(key, e))?;
                    g.cells(&self.user_hyperparams).map_err(|e| bad(key, e))?;
                    Some(g)
                }
            }
            "image_gate" => self.image_gate = parse(key, value)?,
            "geo_min" => self.thresholds.geo_min = parse(key, value)?,
            "text_min" => self.thresholds.text_min = parse(key, value)?,
            "user_min" => self.thresholds.user_min = parse(key, value)?,
            "image_min" => self.thresholds.image_min = parse(key, value)?,
            "bind" => self.bind = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    pub fn from_text(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let doc = KvDoc::parse(text)?;
        let mut cfg = PipelineConfig::default();
        for key in Self::KEYS {
            if let Some(v) = doc.get(key) {
                cfg.set(key, v, base)?;
            }
        }
        if let Some(unknown) = doc.keys().find(|k| !Self::KEYS.contains(k)) {
            return Err(ConfigError::UnknownKey(unknown.to_string()));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Read { path: path.display().to_string(), source: e })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_text(&text, &base)
    }

    /// Applies `(key, value)` pairs in order, resolving paths against the
    /// current directory.
    pub fn apply_overrides<'a>(&mut self, overrides: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<(), ConfigError> {
        for (k, v) in overrides {
            self.set(k, v, Path::new(""))?;
        }
        Ok(())
    }

    /// Every key with its current value, in `KEYS` order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let hp = &self.user_hyperparams;
        let t = &self.thresholds;
        let values = [
            self.study_start.to_iso(),
            self.study_end.to_iso(),
            show_path(&self.tweets),
            show_path(&self.sensors),
            show_path(&self.track),
            show_path(&self.labels),
            show_path(&self.image_scores),
            show_path(&self.image_model),
            self.work_dir.display().to_string(),
            self.geo.idw_power.to_string(),
            self.geo.d_min.to_string(),
            self.geo.epsilon.to_string(),
            self.geo.min_precip_stations.to_string(),
            self.text.window_size.to_string(),
            self.text.dimension.to_string(),
            self.text.min_count.to_string(),
            self.text.negative_samples.to_string(),
            self.text.epochs.to_string(),
            self.text.learning_rate.to_string(),
            self.seed_term.clone(),
            self.segment_hours.to_string(),
            self.text_formula.to_string(),
            self.user_classifier.to_string(),
            hp.get("n_trees").unwrap_or_default(),
            hp.get("max_depth").unwrap_or_default(),
            hp.get("min_samples_split").unwrap_or_default(),
            hp.get("max_leaf_nodes").unwrap_or_default(),
            self.user_grid.as_ref().map(grid_text).unwrap_or_default(),
            self.image_gate.to_string(),
            t.geo_min.to_string(),
            t.text_min.to_string(),
            t.user_min.to_string(),
            t.image_min.to_string(),
            self.bind.to_string(),
            self.seed.to_string(),
            hp.get("learning_rate").unwrap_or_default(),
        ];
        Self::KEYS.into_iter().zip(values).collect()
    }

    pub fn to_text(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// Skip-gram settings with the top-level seed applied.
    pub fn text_params(&self) -> TextModelParams {
        TextModelParams { seed: self.seed, ..self.text.clone() }
    }

    pub fn study_window(&self) -> Result<StudyWindow, ConfigError> {
        StudyWindow::new(self.study_start, self.study_end).map_err(|e| bad("study_end", e))
    }

    /// Value checks that do not touch the filesystem.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.study_window()?;
        self.geo.validate().map_err(|e| bad("geo", e))?;
        self.text_params().validate().map_err(|e| bad("text", e))?;
        self.user_hyperparams.validate().map_err(|e| bad("user", e))?;
        if self.segment_hours == 0 {
            return Err(bad("segment_hours", "must be positive"));
        }
        if self.seed_term.trim().is_empty() {
            return Err(bad("seed_term", "must not be empty"));
        }
        if !(0.0..=1.0).contains(&self.image_gate) {
            return Err(bad("image_gate", format!("{} outside [0, 1]", self.image_gate)));
        }
        self.thresholds.validate().map_err(|e| bad("thresholds", e))?;
        Ok(())
    }

    /// Required inputs are set and every configured input exists.
    pub fn check_inputs(&self) -> Result<(), ConfigError> {
        for (key, p) in [("tweets", &self.tweets), ("sensors", &self.sensors), ("track", &self.track)] {
            if p.is_none() {
                return Err(ConfigError::MissingPath { key: key.into() });
            }
        }
        for (key, p) in [
            ("tweets", &self.tweets),
            ("sensors", &self.sensors),
            ("track", &self.track),
            ("labels", &self.labels),
            ("image_scores", &self.image_scores),
            ("image_model", &self.image_model),
        ] {
            if let Some(p) = p {
                if !p.exists() {
                    return Err(ConfigError::PathNotFound { key: key.into(), path: p.display().to_string() });
                }
            }
        }
        Ok(())
    }
}

fn grid_text(g: &GridSpec) -> String {
    g.axes.iter().map(|(k, vs)| format!("{k}={}", vs.join(","))).collect::<Vec<_>>().join(";")
}
