use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ingest::{GeoLocation, SensorReading, TimeWindow, TrackPoint};

use super::spatial::{distance_to_eye, idw_interpolate, nearest_value};
use super::{GeoError, GeoParams};

/// Forcing conditions at one message's place and hour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoFeatures {
    pub wind: f64,
    pub rain: f64,
    /// Miles to the eye, already clamped to at least `d_min`.
    pub distance_mi: f64,
    pub window: TimeWindow,
}

impl GeoFeatures {
    pub fn new(wind: f64, rain: f64, distance_mi: f64, window: TimeWindow, d_min: f64) -> Result<Self, GeoError> {
        if !(wind.is_finite() && rain.is_finite() && distance_mi.is_finite()) || wind < 0.0 || rain < 0.0 {
            return Err(GeoError::InvalidFeatures { wind, rain, distance_mi });
        }
        Ok(GeoFeatures { wind, rain, distance_mi: distance_mi.max(d_min), window })
    }
}

/// The nine candidate relevance functions. Forcing (wind, rain or their
/// product) divided by a root of the distance to the eye.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GeoFunction {
    WindRainOverDistance,
    RainOverDistance,
    WindOverDistance,
    WindRainOverSqrtDistance,
    RainOverSqrtDistance,
    WindOverSqrtDistance,
    WindRainOverCbrtDistance,
    RainOverCbrtDistance,
    WindOverCbrtDistance,
}

impl GeoFunction {
    pub const ALL: [GeoFunction; 9] = [
        GeoFunction::WindRainOverDistance,
        GeoFunction::RainOverDistance,
        GeoFunction::WindOverDistance,
        GeoFunction::WindRainOverSqrtDistance,
        GeoFunction::RainOverSqrtDistance,
        GeoFunction::WindOverSqrtDistance,
        GeoFunction::WindRainOverCbrtDistance,
        GeoFunction::RainOverCbrtDistance,
        GeoFunction::WindOverCbrtDistance,
    ];

    pub fn id(self) -> &'static str {
        match self {
            GeoFunction::WindRainOverDistance => "wind*rain/d",
            GeoFunction::RainOverDistance => "rain/d",
            GeoFunction::WindOverDistance => "wind/d",
            GeoFunction::WindRainOverSqrtDistance => "wind*rain/sqrt(d)",
            GeoFunction::RainOverSqrtDistance => "rain/sqrt(d)",
            GeoFunction::WindOverSqrtDistance => "wind/sqrt(d)",
            GeoFunction::WindRainOverCbrtDistance => "wind*rain/cbrt(d)",
            GeoFunction::RainOverCbrtDistance => "rain/cbrt(d)",
            GeoFunction::WindOverCbrtDistance => "wind/cbrt(d)",
        }
    }

    pub fn eval(self, g: &GeoFeatures) -> f64 {
        let d = g.distance_mi;
        let (numerator, denominator) = match self {
            GeoFunction::WindRainOverDistance => (g.wind * g.rain, d),
            GeoFunction::RainOverDistance => (g.rain, d),
            GeoFunction::WindOverDistance => (g.wind, d),
            GeoFunction::WindRainOverSqrtDistance => (g.wind * g.rain, d.sqrt()),
            GeoFunction::RainOverSqrtDistance => (g.rain, d.sqrt()),
            GeoFunction::WindOverSqrtDistance => (g.wind, d.sqrt()),
            GeoFunction::WindRainOverCbrtDistance => (g.wind * g.rain, d.cbrt()),
            GeoFunction::RainOverCbrtDistance => (g.rain, d.cbrt()),
            GeoFunction::WindOverCbrtDistance => (g.wind, d.cbrt()),
        };
        numerator / denominator
    }
}

impl fmt::Display for GeoFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for GeoFunction {
    type Err = GeoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GeoFunction::ALL
            .into_iter()
            .find(|f| f.id() == s.trim())
            .ok_or_else(|| GeoError::Parse(format!("unknown geo function {s:?}")))
    }
}

pub fn eval_geo_function(f: GeoFunction, g: &GeoFeatures) -> f64 {
    f.eval(g)
}

/// Hourly station readings and eye positions indexed for per-message
/// feature lookup.
#[derive(Debug, Clone)]
pub struct ForcingField {
    wind: BTreeMap<u32, Vec<(GeoLocation, f64)>>,
    rain: BTreeMap<u32, Vec<(GeoLocation, f64)>>,
    eye: HashMap<u32, GeoLocation>,
    params: GeoParams,
}

impl ForcingField {
    pub fn new(sensors: &[SensorReading], track: &[TrackPoint], params: GeoParams) -> Self {
        let mut wind: BTreeMap<u32, Vec<(GeoLocation, f64)>> = BTreeMap::new();
        let mut rain: BTreeMap<u32, Vec<(GeoLocation, f64)>> = BTreeMap::new();
        for r in sensors {
            wind.entry(r.window.index).or_default().push((r.location, r.wind_mph));
            rain.entry(r.window.index).or_default().push((r.location, r.precip_inches));
        }
        let eye = track.iter().map(|t| (t.window.index, t.eye)).collect();
        ForcingField { wind, rain, eye, params }
    }

    pub fn params(&self) -> &GeoParams {
        &self.params
    }

    /// Wind by IDW; rain by IDW when enough stations report, otherwise the
    /// nearest station; distance to the eye for the same hour.
    pub fn features_at(&self, p: GeoLocation, window: TimeWindow) -> Result<GeoFeatures, GeoError> {
        let wind_readings = self.wind.get(&window.index).ok_or(GeoError::NoSensorData(window.index))?;
        let rain_readings = &self.rain[&window.index];
        let eye = self.eye.get(&window.index).ok_or(GeoError::NoTrackPoint(window.index))?;

        let wind = idw_interpolate(p, wind_readings, self.params.idw_power)?;
        let rain = if rain_readings.len() >= self.params.min_precip_stations {
            idw_interpolate(p, rain_readings, self.params.idw_power)?
        } else {
            nearest_value(p, rain_readings).ok_or(GeoError::NoReadings)?
        };
        let distance = distance_to_eye(p, *eye, self.params.d_min);
        GeoFeatures::new(wind, rain, distance, window, self.params.d_min)
    }
}
