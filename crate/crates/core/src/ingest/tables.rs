//! CSV inputs: station readings, storm track and rater labels.
//!
//! ```text
//! sensors: station_id,lat,lon,window_start_iso,wind_mph,precip_in
//! track:   window_start_iso,lat,lon,category,pressure_mb,max_wind_mph
//! labels:  subject_id,rater_id,related,tags        (tags joined with ';')
//! ```
//!
//! A schema violation anywhere aborts the load with the offending line.

use std::collections::HashMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;

use super::types::{
    bucket_hourly, GeoLocation, IncidentTag, LabelRecord, SensorReading, Timestamp, TrackPoint,
};
use super::IngestError;

#[derive(Debug, Deserialize)]
struct SensorRow {
    station_id: String,
    lat: f64,
    lon: f64,
    window_start_iso: String,
    wind_mph: f64,
    precip_in: f64,
}

#[derive(Debug, Deserialize)]
struct TrackRow {
    window_start_iso: String,
    lat: f64,
    lon: f64,
    category: u8,
    pressure_mb: f64,
    max_wind_mph: f64,
}

#[derive(Debug, Deserialize)]
struct LabelRow {
    subject_id: String,
    rater_id: String,
    related: String,
    #[serde(default)]
    tags: String,
}

fn open(path: &Path) -> Result<File, IngestError> {
    File::open(path).map_err(|e| IngestError::Open { path: path.display().to_string(), source: e })
}

fn schema(line: u64, message: impl Into<String>) -> IngestError {
    IngestError::Schema { line, message: message.into() }
}

fn rows<R: Read, T: for<'de> Deserialize<'de>>(reader: R) -> impl Iterator<Item = Result<(u64, T), IngestError>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().cloned();
    let mut records = rdr.into_records();
    let mut header_err = headers.err();
    std::iter::from_fn(move || {
        if let Some(e) = header_err.take() {
            return Some(Err(schema(1, e.to_string())));
        }
        let rec = records.next()?;
        Some(match rec {
            Ok(rec) => {
                let line = rec.position().map(|p| p.line()).unwrap_or(0);
                rec.deserialize::<T>(None).map(|row| (line, row)).map_err(|e| schema(line, e.to_string()))
            }
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                Err(schema(line, e.to_string()))
            }
        })
    })
}

fn non_negative(line: u64, name: &str, v: f64) -> Result<f64, IngestError> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(schema(line, format!("{name} must be finite and non-negative, got {v}")))
    }
}

fn positive(line: u64, name: &str, v: f64) -> Result<f64, IngestError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(schema(line, format!("{name} must be finite and positive, got {v}")))
    }
}

pub fn read_sensors<R: Read>(reader: R, study_start: Timestamp) -> Result<Vec<SensorReading>, IngestError> {
    let mut out = Vec::new();
    for row in rows::<_, SensorRow>(reader) {
        let (line, row) = row?;
        if row.station_id.is_empty() {
            return Err(schema(line, "empty station_id"));
        }
        let location = GeoLocation::new(row.lat, row.lon).map_err(|e| schema(line, e.to_string()))?;
        let t = Timestamp::parse_iso(&row.window_start_iso).map_err(|e| schema(line, e.to_string()))?;
        let window = bucket_hourly(t, study_start).map_err(|e| schema(line, e.to_string()))?;
        out.push(SensorReading {
            station_id: row.station_id,
            location,
            window,
            wind_mph: non_negative(line, "wind_mph", row.wind_mph)?,
            precip_inches: non_negative(line, "precip_in", row.precip_in)?,
        });
    }
    Ok(out)
}

pub fn load_sensor_csv(path: impl AsRef<Path>, study_start: Timestamp) -> Result<Vec<SensorReading>, IngestError> {
    read_sensors(open(path.as_ref())?, study_start)
}

/// Reads the storm track, sorted by window. A repeated window index fails at
/// the repeating line; a gap between consecutive windows fails at the first
/// row after the gap.
pub fn read_track<R: Read>(reader: R, study_start: Timestamp) -> Result<Vec<TrackPoint>, IngestError> {
    let mut points: Vec<(u64, TrackPoint)> = Vec::new();
    let mut first_line: HashMap<u32, u64> = HashMap::new();
    for row in rows::<_, TrackRow>(reader) {
        let (line, row) = row?;
        let eye = GeoLocation::new(row.lat, row.lon).map_err(|e| schema(line, e.to_string()))?;
        let t = Timestamp::parse_iso(&row.window_start_iso).map_err(|e| schema(line, e.to_string()))?;
        let window = bucket_hourly(t, study_start).map_err(|e| schema(line, e.to_string()))?;
        if row.category > 5 {
            return Err(schema(line, format!("category must be 0-5, got {}", row.category)));
        }
        if let Some(prev) = first_line.insert(window.index, line) {
            return Err(schema(line, format!("duplicate track window {} (first seen on line {prev})", window.index)));
        }
        points.push((
            line,
            TrackPoint {
                window,
                eye,
                category: row.category,
                pressure_mb: positive(line, "pressure_mb", row.pressure_mb)?,
                max_wind_mph: positive(line, "max_wind_mph", row.max_wind_mph)?,
            },
        ));
    }
    points.sort_by_key(|(_, p)| p.window.index);
    for pair in points.windows(2) {
        let (_, a) = &pair[0];
        let (line, b) = &pair[1];
        if b.window.index != a.window.index + 1 {
            return Err(schema(*line, format!("track windows not contiguous: {} follows {}", b.window.index, a.window.index)));
        }
    }
    Ok(points.into_iter().map(|(_, p)| p).collect())
}

pub fn load_track_csv(path: impl AsRef<Path>, study_start: Timestamp) -> Result<Vec<TrackPoint>, IngestError> {
    read_track(open(path.as_ref())?, study_start)
}

fn parse_bool(line: u64, s: &str) -> Result<bool, IngestError> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "y" => Ok(true),
        "false" | "0" | "no" | "n" => Ok(false),
        other => Err(schema(line, format!("expected boolean, got {other:?}"))),
    }
}

pub fn read_labels<R: Read>(reader: R) -> Result<Vec<LabelRecord>, IngestError> {
    let mut out = Vec::new();
    for row in rows::<_, LabelRow>(reader) {
        let (line, row) = row?;
        if row.subject_id.is_empty() || row.rater_id.is_empty() {
            return Err(schema(line, "empty subject_id or rater_id"));
        }
        let related = parse_bool(line, &row.related)?;
        let tags = row
            .tags
            .split(';')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(IncidentTag::from_str)
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| schema(line, e.to_string()))?;
        let label =
            LabelRecord::new(row.subject_id, row.rater_id, related, tags).map_err(|e| schema(line, e.to_string()))?;
        out.push(label);
    }
    Ok(out)
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<LabelRecord>, IngestError> {
    read_labels(open(path.as_ref())?)
}

/// Majority "related" vote per subject; ties count as related.
pub fn consensus_related(labels: &[LabelRecord]) -> HashMap<String, bool> {
    let mut votes: HashMap<&str, (u32, u32)> = HashMap::new();
    for l in labels {
        let e = votes.entry(l.subject_id.as_str()).or_default();
        if l.related {
            e.0 += 1;
        } else {
            e.1 += 1;
        }
    }
    votes.into_iter().map(|(k, (yes, no))| (k.to_string(), yes >= no)).collect()
}
