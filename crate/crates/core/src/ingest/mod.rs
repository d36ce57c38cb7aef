//! Parsing and validation of the raw inputs: tweets, station readings, the
//! storm track and rater labels.

mod tables;
mod tweets;
mod types;

use thiserror::Error;

pub use tables::{
    consensus_related, load_labels, load_sensor_csv, load_track_csv, read_labels, read_sensors, read_track,
};
pub use tweets::{parse_tweet_line, parse_tweet_stream, to_json_line, ParseOutcome, RejectReason, RejectReport};
pub use types::{
    bucket_hourly, place_centroid, GeoLocation, IncidentTag, LabelRecord, LocationKind, MediaRef, PlaceGeometry,
    SensorReading, StudyWindow, TimeWindow, Timestamp, TrackPoint, TweetRecord, UserProfile, WINDOW_SECONDS,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot open {path}: {source}")]
    Open { path: String, source: std::io::Error },
    #[error("read failed: {0}")]
    Io(std::io::Error),
    #[error("line {line}: {message}")]
    Schema { line: u64, message: String },
    #[error("invalid timestamp {0:?}")]
    Timestamp(String),
    #[error("study window end {end} is not after start {start}")]
    InvalidStudyWindow { start: Timestamp, end: Timestamp },
    #[error("timestamp {t} precedes study start {study_start}")]
    BeforeStudyStart { t: Timestamp, study_start: Timestamp },
    #[error("location ({lat}, {lon}) out of range")]
    InvalidLocation { lat: f64, lon: f64 },
    #[error("place geometry has no vertices")]
    EmptyGeometry,
    #[error("degenerate place geometry: {0}")]
    DegenerateGeometry(String),
    #[error("unknown tag {0:?}")]
    UnknownTag(String),
    #[error("incident tags present on an unrelated label")]
    TagsOnUnrelated,
}
