use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::IngestError;

/// Seconds in one discretization window.
pub const WINDOW_SECONDS: i64 = 3600;

/// A point in time, whole seconds since the Unix epoch, UTC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(pub i64);

impl Timestamp {
    pub fn from_secs(secs: i64) -> Self {
        Timestamp(secs)
    }

    pub fn secs(self) -> i64 {
        self.0
    }

    /// Parses an ISO-8601 / RFC 3339 timestamp with offset, or a naive
    /// `YYYY-MM-DDTHH:MM:SS` which is taken as UTC. Sub-second precision is
    /// truncated.
    pub fn parse_iso(s: &str) -> Result<Self, IngestError> {
        let s = s.trim();
        if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
            return Ok(Timestamp(dt.with_timezone(&Utc).timestamp()));
        }
        for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M"] {
            if let Ok(naive) = chrono::NaiveDateTime::parse_from_str(s, fmt) {
                return Ok(Timestamp(naive.and_utc().timestamp()));
            }
        }
        Err(IngestError::Timestamp(s.to_string()))
    }

    pub fn to_iso(self) -> String {
        match DateTime::<Utc>::from_timestamp(self.0, 0) {
            Some(dt) => dt.to_rfc3339_opts(SecondsFormat::Secs, true),
            None => self.0.to_string(),
        }
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_iso())
    }
}

impl FromStr for Timestamp {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Timestamp::parse_iso(s)
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_iso())
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Timestamp::parse_iso(&s).map_err(serde::de::Error::custom)
    }
}

/// Half-open study interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudyWindow {
    pub start: Timestamp,
    pub end: Timestamp,
}

impl StudyWindow {
    pub fn new(start: Timestamp, end: Timestamp) -> Result<Self, IngestError> {
        if end <= start {
            return Err(IngestError::InvalidStudyWindow { start, end });
        }
        Ok(StudyWindow { start, end })
    }

    pub fn contains(&self, t: Timestamp) -> bool {
        self.start <= t && t < self.end
    }

    /// Number of whole or partial hourly windows covered.
    pub fn hours(&self) -> u32 {
        let span = self.end.0 - self.start.0;
        ((span + WINDOW_SECONDS - 1) / WINDOW_SECONDS) as u32
    }
}

/// Latitude/longitude in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoLocation {
    pub lat: f64,
    pub lon: f64,
}

impl GeoLocation {
    pub fn new(lat: f64, lon: f64) -> Result<Self, IngestError> {
        let loc = GeoLocation { lat, lon };
        loc.validate()?;
        Ok(loc)
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        let ok = self.lat.is_finite()
            && self.lon.is_finite()
            && (-90.0..=90.0).contains(&self.lat)
            && (-180.0..=180.0).contains(&self.lon);
        if ok {
            Ok(())
        } else {
            Err(IngestError::InvalidLocation { lat: self.lat, lon: self.lon })
        }
    }
}

/// A place given as a polygon ring (three or more vertices) or as a bounding
/// box (exactly two corners, south-west first).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaceGeometry {
    pub vertices: Vec<GeoLocation>,
}

impl PlaceGeometry {
    pub fn new(vertices: Vec<GeoLocation>) -> Result<Self, IngestError> {
        let geometry = PlaceGeometry { vertices };
        geometry.validate()?;
        Ok(geometry)
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        match self.vertices.len() {
            0 => return Err(IngestError::EmptyGeometry),
            1 => return Err(IngestError::DegenerateGeometry("a single vertex is not a place".into())),
            _ => {}
        }
        for v in &self.vertices {
            v.validate()?;
        }
        if let [sw, ne] = self.vertices.as_slice() {
            if sw.lat > ne.lat || sw.lon > ne.lon {
                return Err(IngestError::DegenerateGeometry(
                    "bounding box corners must be ordered south-west, north-east".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn is_bounding_box(&self) -> bool {
        self.vertices.len() == 2
    }

    /// Axis-aligned bounds as `(south-west, north-east)`.
    pub fn bounds(&self) -> Option<(GeoLocation, GeoLocation)> {
        let first = self.vertices.first()?;
        let mut sw = *first;
        let mut ne = *first;
        for v in &self.vertices[1..] {
            sw.lat = sw.lat.min(v.lat);
            sw.lon = sw.lon.min(v.lon);
            ne.lat = ne.lat.max(v.lat);
            ne.lon = ne.lon.max(v.lon);
        }
        Some((sw, ne))
    }
}

/// Arithmetic mean of the vertices; for a two-corner bounding box this is
/// the midpoint.
pub fn place_centroid(geometry: &PlaceGeometry) -> Result<GeoLocation, IngestError> {
    if geometry.vertices.is_empty() {
        return Err(IngestError::EmptyGeometry);
    }
    let n = geometry.vertices.len() as f64;
    let (lat_sum, lon_sum) = geometry
        .vertices
        .iter()
        .fold((0.0, 0.0), |(a, b), v| (a + v.lat, b + v.lon));
    GeoLocation::new(lat_sum / n, lon_sum / n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocationKind {
    Coordinates,
    PlaceCentroid,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MediaRef {
    pub media_id: String,
    pub path: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserProfile {
    pub user_id: String,
    pub account_created_at: Timestamp,
    pub friends_count: u64,
    pub followers_count: u64,
    pub statuses_count: u64,
    pub verified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TweetRecord {
    pub id: String,
    pub created_at: Timestamp,
    pub location: GeoLocation,
    pub location_kind: LocationKind,
    pub text: String,
    pub hashtags: Vec<String>,
    pub weblinks: Vec<String>,
    pub media: Vec<MediaRef>,
    pub author: UserProfile,
}

/// Hour index since the study start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TimeWindow {
    pub index: u32,
    pub start: Timestamp,
}

impl TimeWindow {
    pub fn from_index(index: u32, study_start: Timestamp) -> Self {
        TimeWindow { index, start: Timestamp(study_start.0 + i64::from(index) * WINDOW_SECONDS) }
    }
}

/// Floor-buckets `t` into the hourly window containing it.
pub fn bucket_hourly(t: Timestamp, study_start: Timestamp) -> Result<TimeWindow, IngestError> {
    if t < study_start {
        return Err(IngestError::BeforeStudyStart { t, study_start });
    }
    let index = (t.0 - study_start.0) / WINDOW_SECONDS;
    let index = u32::try_from(index).map_err(|_| IngestError::BeforeStudyStart { t, study_start })?;
    Ok(TimeWindow::from_index(index, study_start))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorReading {
    pub station_id: String,
    pub location: GeoLocation,
    pub window: TimeWindow,
    pub wind_mph: f64,
    pub precip_inches: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub window: TimeWindow,
    pub eye: GeoLocation,
    pub category: u8,
    pub pressure_mb: f64,
    pub max_wind_mph: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum IncidentTag {
    Flooding,
    Windy,
    Destruction,
}

impl IncidentTag {
    pub const ALL: [IncidentTag; 3] = [IncidentTag::Flooding, IncidentTag::Windy, IncidentTag::Destruction];

    pub fn name(self) -> &'static str {
        match self {
            IncidentTag::Flooding => "Flooding",
            IncidentTag::Windy => "Windy",
            IncidentTag::Destruction => "Destruction",
        }
    }
}

impl FromStr for IncidentTag {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "flooding" | "flood" => Ok(IncidentTag::Flooding),
            "windy" | "wind" => Ok(IncidentTag::Windy),
            "destruction" => Ok(IncidentTag::Destruction),
            other => Err(IngestError::UnknownTag(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub subject_id: String,
    pub rater_id: String,
    pub related: bool,
    pub tags: Vec<IncidentTag>,
}

impl LabelRecord {
    pub fn new(
        subject_id: impl Into<String>,
        rater_id: impl Into<String>,
        related: bool,
        mut tags: Vec<IncidentTag>,
    ) -> Result<Self, IngestError> {
        tags.sort();
        tags.dedup();
        if !tags.is_empty() && !related {
            return Err(IngestError::TagsOnUnrelated);
        }
        Ok(LabelRecord { subject_id: subject_id.into(), rater_id: rater_id.into(), related, tags })
    }

    pub fn has_tag(&self, tag: IncidentTag) -> bool {
        self.tags.contains(&tag)
    }
}
