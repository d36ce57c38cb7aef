//! AND-threshold fusion of the four axis scores, plus per-axis pass-rate
//! curves.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::TagProbabilities;
use crate::ingest::TweetRecord;

#[derive(Debug, Error)]
pub enum FusionError {
    #[error("{axis} score {value} is outside [0, 100]")]
    Score { axis: Axis, value: f64 },
    #[error("{axis} threshold {value} is outside [0, 100]")]
    Threshold { axis: Axis, value: f64 },
    #[error("no scored messages")]
    Empty,
    #[error("unknown axis {0:?}")]
    UnknownAxis(String),
    #[error("write failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization failed: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Geo,
    Text,
    User,
    Image,
}

impl Axis {
    pub const ALL: [Axis; 4] = [Axis::Geo, Axis::Text, Axis::User, Axis::Image];

    pub fn name(self) -> &'static str {
        match self {
            Axis::Geo => "geo",
            Axis::Text => "text",
            Axis::User => "user",
            Axis::Image => "image",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Axis {
    type Err = FusionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Axis::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| FusionError::UnknownAxis(s.to_string()))
    }
}

fn in_range(v: f64) -> bool {
    v.is_finite() && (0.0..=100.0).contains(&v)
}

/// Four axis scores on `0..=100`. A message without media has image 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    pub geo: f64,
    pub text: f64,
    pub user: f64,
    pub image: f64,
}

impl ScoreVector {
    pub fn new(geo: f64, text: f64, user: f64, image: f64) -> Result<Self, FusionError> {
        let s = ScoreVector { geo, text, user, image };
        for a in Axis::ALL {
            if !in_range(s.get(a)) {
                return Err(FusionError::Score { axis: a, value: s.get(a) });
            }
        }
        Ok(s)
    }

    pub fn get(&self, axis: Axis) -> f64 {
        match axis {
            Axis::Geo => self.geo,
            Axis::Text => self.text,
            Axis::User => self.user,
            Axis::Image => self.image,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ThresholdVector {
    pub geo_min: f64,
    pub text_min: f64,
    pub user_min: f64,
    pub image_min: f64,
}

impl ThresholdVector {
    /// Geo 50, text 30, user 85, image 85.
    pub const RECOMMENDED: ThresholdVector = ThresholdVector { geo_min: 50.0, text_min: 30.0, user_min: 85.0, image_min: 85.0 };

    pub fn new(geo_min: f64, text_min: f64, user_min: f64, image_min: f64) -> Result<Self, FusionError> {
        let t = ThresholdVector { geo_min, text_min, user_min, image_min };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), FusionError> {
        for a in Axis::ALL {
            if !in_range(self.get(a)) {
                return Err(FusionError::Threshold { axis: a, value: self.get(a) });
            }
        }
        Ok(())
    }

    pub fn get(&self, axis: Axis) -> f64 {
        match axis {
            Axis::Geo => self.geo_min,
            Axis::Text => self.text_min,
            Axis::User => self.user_min,
            Axis::Image => self.image_min,
        }
    }

    /// Zero on every axis except `axis`.
    pub fn single(axis: Axis, value: f64) -> Self {
        let mut t = ThresholdVector::default();
        match axis {
            Axis::Geo => t.geo_min = value,
            Axis::Text => t.text_min = value,
            Axis::User => t.user_min = value,
            Axis::Image => t.image_min = value,
        }
        t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredTweet {
    pub tweet: TweetRecord,
    pub scores: ScoreVector,
    pub tags: Option<TagProbabilities>,
    pub passed: bool,
}

impl ScoredTweet {
    pub fn new(tweet: TweetRecord, scores: ScoreVector, tags: Option<TagProbabilities>, t: &ThresholdVector) -> Self {
        let passed = passes_thresholds(&scores, t);
        ScoredTweet { tweet, scores, tags, passed }
    }
}

/// True iff every score is at least its threshold.
pub fn passes_thresholds(s: &ScoreVector, t: &ThresholdVector) -> bool {
    s.geo >= t.geo_min && s.text >= t.text_min && s.user >= t.user_min && s.image >= t.image_min
}

/// The passing messages in input order, with `passed` set.
pub fn filter_stream(scored: &[ScoredTweet], t: &ThresholdVector) -> Vec<ScoredTweet> {
    scored
        .par_iter()
        .filter(|s| passes_thresholds(&s.scores, t))
        .map(|s| ScoredTweet { passed: true, ..s.clone() })
        .collect()
}

/// Recomputes `passed` on every message against `t`.
pub fn mark_passed(scored: &mut [ScoredTweet], t: &ThresholdVector) {
    scored.par_iter_mut().for_each(|s| s.passed = passes_thresholds(&s.scores, t));
}

/// Integer thresholds `0..=100`.
pub fn default_thresholds() -> Vec<f64> {
    (0..=100).map(f64::from).collect()
}

/// Fraction of score vectors whose `axis` score is at least each threshold.
pub fn cdf_pass_rate(scores: &[ScoreVector], axis: Axis, thresholds: &[f64]) -> Result<Vec<(f64, f64)>, FusionError> {
    if scores.is_empty() {
        return Err(FusionError::Empty);
    }
    let mut values: Vec<f64> = scores.iter().map(|s| s.get(axis)).collect();
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    Ok(thresholds
        .iter()
        .map(|&th| {
            let below = values.partition_point(|&v| v < th);
            (th, (values.len() - below) as f64 / n)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfRow {
    pub threshold: f64,
    pub geo: f64,
    pub text: f64,
    pub user: f64,
    pub image: f64,
}

/// One row per threshold with the pass rate on each axis alone.
pub fn cdf_table(scores: &[ScoreVector], thresholds: &[f64]) -> Result<Vec<CdfRow>, FusionError> {
    let cols = Axis::ALL.map(|a| cdf_pass_rate(scores, a, thresholds));
    let [g, t, u, i] = cols;
    let (g, t, u, i) = (g?, t?, u?, i?);
    Ok((0..thresholds.len())
        .map(|k| CdfRow { threshold: thresholds[k], geo: g[k].1, text: t[k].1, user: u[k].1, image: i[k].1 })
        .collect())
}

/// `threshold,geo,text,user,image` with a header row.
pub fn write_cdf_csv<W: Write>(out: W, rows: &[CdfRow]) -> Result<(), FusionError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| std::io::Error::other(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Line format of the scored output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredRecord {
    pub id: String,
    pub geo: f64,
    pub text: f64,
    pub user: f64,
    pub image: f64,
    pub tags: Option<TagProbabilities>,
    pub passed: bool,
}

impl From<&ScoredTweet> for ScoredRecord {
    fn from(s: &ScoredTweet) -> Self {
        ScoredRecord {
            id: s.tweet.id.clone(),
            geo: round2(s.scores.geo),
            text: round2(s.scores.text),
            user: round2(s.scores.user),
            image: round2(s.scores.image),
            tags: s.tags.map(|t| TagProbabilities {
                flood: round2(t.flood),
                wind: round2(t.wind),
                destruction: round2(t.destruction),
            }),
            passed: s.passed,
        }
    }
}

/// One JSON object per line, scores rounded to two decimals.
pub fn write_scored_ndjson<W: Write>(mut out: W, scored: &[ScoredTweet]) -> Result<(), FusionError> {
    for s in scored {
        serde_json::to_writer(&mut out, &ScoredRecord::from(s))?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}
