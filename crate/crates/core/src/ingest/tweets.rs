//! Newline-delimited tweet records.
//!
//! One JSON object per line:
//!
//! ```text
//! {"id":"1","created_at":"2017-09-10T13:00:00Z",
//!  "coordinates":{"lat":27.0,"lon":-81.5},            (or)
//!  "place":{"vertices":[{"lat":..,"lon":..},..]},
//!  "text":"...","hashtags":["irma"],"urls":["http://.."],
//!  "media":[{"id":"m1","path":"img/m1.png"}],
//!  "user":{"id":"u1","created_at":"2010-01-01T00:00:00Z","friends_count":1,
//!          "followers_count":2,"statuses_count":3,"verified":false}}
//! ```
//!
//! Blank lines are ignored. Any other line is one record and ends up either
//! accepted or in the reject list, never both.

use std::collections::HashSet;
use std::fmt;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use super::types::{
    place_centroid, GeoLocation, LocationKind, MediaRef, PlaceGeometry, StudyWindow, Timestamp, TweetRecord,
    UserProfile,
};
use super::IngestError;

#[derive(Debug, Serialize, Deserialize)]
struct RawPoint {
    lat: f64,
    lon: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawPlace {
    vertices: Vec<RawPoint>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawMedia {
    id: String,
    path: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawUser {
    id: String,
    created_at: String,
    friends_count: u64,
    followers_count: u64,
    statuses_count: u64,
    verified: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawTweet {
    id: String,
    created_at: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coordinates: Option<RawPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    place: Option<RawPlace>,
    #[serde(default)]
    text: String,
    #[serde(default)]
    hashtags: Vec<String>,
    #[serde(default)]
    urls: Vec<String>,
    #[serde(default)]
    media: Vec<RawMedia>,
    user: RawUser,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "detail")]
pub enum RejectReason {
    Malformed(String),
    NoLocation,
    InvalidLocation(String),
    OutsideStudyWindow,
    AccountCreatedAfterTweet,
    DuplicateId,
    InvalidMedia,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::Malformed(msg) => write!(f, "malformed: {msg}"),
            RejectReason::NoLocation => f.write_str("no_location"),
            RejectReason::InvalidLocation(msg) => write!(f, "invalid_location: {msg}"),
            RejectReason::OutsideStudyWindow => f.write_str("outside_study_window"),
            RejectReason::AccountCreatedAfterTweet => f.write_str("account_created_after_tweet"),
            RejectReason::DuplicateId => f.write_str("duplicate_id"),
            RejectReason::InvalidMedia => f.write_str("invalid_media"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectReport {
    /// 1-based line number in the source.
    pub line: usize,
    pub id: Option<String>,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParseOutcome {
    pub accepted: Vec<TweetRecord>,
    pub rejected: Vec<RejectReport>,
}

impl ParseOutcome {
    pub fn total(&self) -> usize {
        self.accepted.len() + self.rejected.len()
    }
}

/// Parses a single record. `Err` carries the reject reason and, when it could
/// be read, the record id.
pub fn parse_tweet_line(line: &str, study: &StudyWindow) -> Result<TweetRecord, (Option<String>, RejectReason)> {
    let raw: RawTweet = serde_json::from_str(line).map_err(|e| (None, RejectReason::Malformed(e.to_string())))?;
    let id = raw.id.trim().to_string();
    if id.is_empty() {
        return Err((None, RejectReason::Malformed("empty id".into())));
    }
    let fail = |reason| (Some(id.clone()), reason);

    let created_at = Timestamp::parse_iso(&raw.created_at).map_err(|e| fail(RejectReason::Malformed(e.to_string())))?;
    let account_created_at =
        Timestamp::parse_iso(&raw.user.created_at).map_err(|e| fail(RejectReason::Malformed(e.to_string())))?;

    let (location, location_kind) = match (raw.coordinates, raw.place) {
        (Some(p), _) => {
            let loc = GeoLocation::new(p.lat, p.lon).map_err(|e| fail(RejectReason::InvalidLocation(e.to_string())))?;
            (loc, LocationKind::Coordinates)
        }
        (None, Some(place)) => {
            let vertices = place
                .vertices
                .into_iter()
                .map(|p| GeoLocation::new(p.lat, p.lon))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| fail(RejectReason::InvalidLocation(e.to_string())))?;
            let geometry =
                PlaceGeometry::new(vertices).map_err(|e| fail(RejectReason::InvalidLocation(e.to_string())))?;
            let loc = place_centroid(&geometry).map_err(|e| fail(RejectReason::InvalidLocation(e.to_string())))?;
            (loc, LocationKind::PlaceCentroid)
        }
        (None, None) => return Err(fail(RejectReason::NoLocation)),
    };

    if !study.contains(created_at) {
        return Err(fail(RejectReason::OutsideStudyWindow));
    }
    if account_created_at > created_at {
        return Err(fail(RejectReason::AccountCreatedAfterTweet));
    }
    if raw.media.iter().any(|m| m.id.trim().is_empty()) {
        return Err(fail(RejectReason::InvalidMedia));
    }

    Ok(TweetRecord {
        id: id.clone(),
        created_at,
        location,
        location_kind,
        text: raw.text,
        hashtags: raw.hashtags,
        weblinks: raw.urls,
        media: raw.media.into_iter().map(|m| MediaRef { media_id: m.id, path: m.path }).collect(),
        author: UserProfile {
            user_id: raw.user.id,
            account_created_at,
            friends_count: raw.user.friends_count,
            followers_count: raw.user.followers_count,
            statuses_count: raw.user.statuses_count,
            verified: raw.user.verified,
        },
    })
}

/// Parses a newline-delimited stream. Per-record problems become reject
/// reports; only a read failure on the source is fatal. A repeated id is
/// rejected in favour of its first occurrence.
pub fn parse_tweet_stream<R: BufRead>(source: R, study: &StudyWindow) -> Result<ParseOutcome, IngestError> {
    let mut outcome = ParseOutcome::default();
    let mut seen = HashSet::new();
    for (idx, line) in source.lines().enumerate() {
        let line = line.map_err(IngestError::Io)?;
        if line.trim().is_empty() {
            continue;
        }
        let line_no = idx + 1;
        match parse_tweet_line(&line, study) {
            Ok(record) => {
                if seen.insert(record.id.clone()) {
                    outcome.accepted.push(record);
                } else {
                    outcome.rejected.push(RejectReport {
                        line: line_no,
                        id: Some(record.id),
                        reason: RejectReason::DuplicateId,
                    });
                }
            }
            Err((id, reason)) => outcome.rejected.push(RejectReport { line: line_no, id, reason }),
        }
    }
    Ok(outcome)
}

/// Serializes an accepted record back into the input schema. Place-located
/// records are written as a degenerate bounding box at their centroid, which
/// re-parses to the same location and kind.
pub fn to_json_line(record: &TweetRecord) -> String {
    let point = RawPoint { lat: record.location.lat, lon: record.location.lon };
    let (coordinates, place) = match record.location_kind {
        LocationKind::Coordinates => (Some(point), None),
        LocationKind::PlaceCentroid => {
            let corner = RawPoint { lat: point.lat, lon: point.lon };
            (None, Some(RawPlace { vertices: vec![point, corner] }))
        }
    };
    let raw = RawTweet {
        id: record.id.clone(),
        created_at: record.created_at.to_iso(),
        coordinates,
        place,
        text: record.text.clone(),
        hashtags: record.hashtags.clone(),
        urls: record.weblinks.clone(),
        media: record.media.iter().map(|m| RawMedia { id: m.media_id.clone(), path: m.path.clone() }).collect(),
        user: RawUser {
            id: record.author.user_id.clone(),
            created_at: record.author.account_created_at.to_iso(),
            friends_count: record.author.friends_count,
            followers_count: record.author.followers_count,
            statuses_count: record.author.statuses_count,
            verified: record.author.verified,
        },
    };
    serde_json::to_string(&raw).expect("tweet record serializes")
}
