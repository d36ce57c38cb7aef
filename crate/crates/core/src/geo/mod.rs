//! Geospatial forcing score.
//!
//! Wind and rain are interpolated from hourly station readings at each
//! message's location, combined with the distance to the storm eye through
//! one of nine candidate functions, normalized, and rescaled to `0..=100`.
//! The function and transform are chosen by Shapiro-Wilk normality ranking.

mod features;
mod normality;
mod select;
mod spatial;
mod transform;

use thiserror::Error;

pub use features::{eval_geo_function, ForcingField, GeoFeatures, GeoFunction};
pub use normality::{shapiro_wilk, SW_MAX_N, SW_MIN_N};
pub use select::{
    rank_and_choose, select_geo_model, CandidateReport, GeoCalibration, GeoModelSelection, TOP_K,
};
pub use spatial::{distance_to_eye, haversine_miles, idw_interpolate, nearest_value, EARTH_RADIUS_MI, SNAP_DISTANCE_MI};
pub use transform::{
    boxcox_log_likelihood, boxcox_value, fit_boxcox_lambda, transform_boxcox, transform_boxcox_with,
    transform_log10, transform_minmax, TransformKind, BOXCOX_LAMBDA_RANGE, BOXCOX_MIN_SAMPLES, BOXCOX_TOLERANCE,
    DEFAULT_EPSILON,
};

#[derive(Debug, Error)]
pub enum GeoError {
    #[error("no station readings to interpolate from")]
    NoReadings,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid features: wind={wind}, rain={rain}, distance={distance_mi}")]
    InvalidFeatures { wind: f64, rain: f64, distance_mi: f64 },
    #[error("no sensor readings for window {0}")]
    NoSensorData(u32),
    #[error("no track point for window {0}")]
    NoTrackPoint(u32),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("sample size {n} outside [{min}, {max}]")]
    SampleSize { n: usize, min: usize, max: usize },
    #[error("no usable function/transform combination")]
    NoViableCandidate,
    #[error("parse error: {0}")]
    Parse(String),
}

/// Interpolation and normalization settings.
#[derive(Debug, Clone, PartialEq)]
pub struct GeoParams {
    /// IDW power `k`.
    pub idw_power: f64,
    /// Lower clamp on the distance to the eye, in miles.
    pub d_min: f64,
    /// Floor applied before log and Box-Cox.
    pub epsilon: f64,
    /// Fewer stations than this reporting rain in an hour means the nearest
    /// station's value is used instead of IDW.
    pub min_precip_stations: usize,
}

impl Default for GeoParams {
    fn default() -> Self {
        GeoParams { idw_power: 2.0, d_min: 1.0, epsilon: DEFAULT_EPSILON, min_precip_stations: 3 }
    }
}

impl GeoParams {
    pub fn validate(&self) -> Result<(), GeoError> {
        if !(self.idw_power > 0.0 && self.idw_power.is_finite()) {
            return Err(GeoError::InvalidParameter(format!("idw_power must be positive, got {}", self.idw_power)));
        }
        if !(self.d_min > 0.0 && self.d_min.is_finite()) {
            return Err(GeoError::InvalidParameter(format!("d_min must be positive, got {}", self.d_min)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(GeoError::InvalidParameter(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.min_precip_stations == 0 {
            return Err(GeoError::InvalidParameter("min_precip_stations must be at least 1".into()));
        }
        Ok(())
    }
}
