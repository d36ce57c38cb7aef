//! Read-only HTTP API over the current snapshot.
//!
//! | route | response |
//! |---|---|
//! | `GET /snapshot/meta` | version, size, calibrations |
//! | `GET /tweets?geo_min=&text_min=&user_min=&image_min=&page=&page_size=` | passing records and total |
//! | `GET /cdf?axis=` | pass rate per integer threshold (all axes when `axis` is absent) |
//! | `GET /tweet/{id}` | full record, scores, tags and map context |
//! | `GET /config` | effective configuration as `key: value` |
//!
//! Missing thresholds default to 0, `page` is zero-based and defaults to 0,
//! `page_size` defaults to 100. Scores and tag probabilities carry two
//! decimals.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use stormsift_core::fusion::{cdf_pass_rate, cdf_table, default_thresholds, round2, Axis, CdfRow, ScoredTweet, ThresholdVector};
use stormsift_core::image::TagProbabilities;
use stormsift_core::ingest::{LocationKind, MediaRef};

use crate::config::PipelineConfig;
use crate::mapctx::{MapContext, MapProvider};
use crate::snapshot::{Calibrations, Store};

pub const DEFAULT_PAGE_SIZE: usize = 100;

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<Store>,
    pub config: Arc<PipelineConfig>,
    pub provider: Arc<dyn MapProvider>,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    fn bad_request(message: impl ToString) -> Self {
        ApiError { status: StatusCode::BAD_REQUEST, message: message.to_string() }
    }
}

#[derive(Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(ErrorBody { error: self.message })).into_response()
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MetaResponse {
    pub version: u64,
    pub size: usize,
    pub calibrations: Calibrations,
}

#[derive(Debug, Default, Deserialize)]
pub struct TweetsQuery {
    pub geo_min: Option<f64>,
    pub text_min: Option<f64>,
    pub user_min: Option<f64>,
    pub image_min: Option<f64>,
    pub page: Option<usize>,
    pub page_size: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub geo: f64,
    pub text: f64,
    pub user: f64,
    pub image: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TweetRow {
    pub id: String,
    pub created_at: String,
    pub lat: f64,
    pub lon: f64,
    pub message: String,
    pub scores: Scores,
    pub has_media: bool,
    pub tags: Option<TagProbabilities>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TweetsResponse {
    pub version: u64,
    pub thresholds: ThresholdVector,
    pub total: usize,
    pub page: usize,
    pub page_size: usize,
    pub records: Vec<TweetRow>,
}

#[derive(Debug, Deserialize)]
pub struct CdfQuery {
    pub axis: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub threshold: f64,
    pub pass_rate: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CdfResponse {
    Axis { version: u64, axis: Axis, points: Vec<CdfPoint> },
    All { version: u64, rows: Vec<CdfRow> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuthorView {
    pub user_id: String,
    pub account_created_at: String,
    pub friends_count: u64,
    pub followers_count: u64,
    pub statuses_count: u64,
    pub verified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TweetDetail {
    pub version: u64,
    pub id: String,
    pub created_at: String,
    pub lat: f64,
    pub lon: f64,
    pub location_kind: LocationKind,
    pub message: String,
    pub hashtags: Vec<String>,
    pub weblinks: Vec<String>,
    pub media: Vec<MediaRef>,
    pub has_media: bool,
    pub author: AuthorView,
    pub scores: Scores,
    pub tags: Option<TagProbabilities>,
    pub map_context: MapContext,
}

fn scores_of(s: &ScoredTweet) -> Scores {
    Scores {
        geo: round2(s.scores.geo),
        text: round2(s.scores.text),
        user: round2(s.scores.user),
        image: round2(s.scores.image),
    }
}

fn tags_of(s: &ScoredTweet) -> Option<TagProbabilities> {
    s.tags.map(|t| TagProbabilities { flood: round2(t.flood), wind: round2(t.wind), destruction: round2(t.destruction) })
}

pub fn row_of(s: &ScoredTweet) -> TweetRow {
    TweetRow {
        id: s.tweet.id.clone(),
        created_at: s.tweet.created_at.to_iso(),
        lat: s.tweet.location.lat,
        lon: s.tweet.location.lon,
        message: s.tweet.text.clone(),
        scores: scores_of(s),
        has_media: !s.tweet.media.is_empty(),
        tags: tags_of(s),
    }
}

async fn meta(State(st): State<AppState>) -> Json<MetaResponse> {
    let snap = st.store.current();
    Json(MetaResponse { version: snap.version(), size: snap.len(), calibrations: snap.calibrations().clone() })
}

async fn tweets(State(st): State<AppState>, Query(q): Query<TweetsQuery>) -> Result<Json<TweetsResponse>, ApiError> {
    let t = ThresholdVector::new(
        q.geo_min.unwrap_or(0.0),
        q.text_min.unwrap_or(0.0),
        q.user_min.unwrap_or(0.0),
        q.image_min.unwrap_or(0.0),
    )
    .map_err(ApiError::bad_request)?;
    let snap = st.store.current();
    let page = snap
        .query(&t, q.page.unwrap_or(0), q.page_size.unwrap_or(DEFAULT_PAGE_SIZE))
        .map_err(ApiError::bad_request)?;
    Ok(Json(TweetsResponse {
        version: page.version,
        thresholds: t,
        total: page.total,
        page: page.page,
        page_size: page.page_size,
        records: page.items.iter().map(row_of).collect(),
    }))
}

async fn cdf(State(st): State<AppState>, Query(q): Query<CdfQuery>) -> Result<Json<CdfResponse>, ApiError> {
    let snap = st.store.current();
    let scores: Vec<_> = snap.tweets().iter().map(|s| s.scores).collect();
    let thresholds = default_thresholds();
    if scores.is_empty() {
        return Err(ApiError { status: StatusCode::NOT_FOUND, message: "snapshot is empty".into() });
    }
    match q.axis {
        Some(a) => {
            let axis: Axis = a.parse().map_err(ApiError::bad_request)?;
            let points = cdf_pass_rate(&scores, axis, &thresholds)
                .map_err(ApiError::bad_request)?
                .into_iter()
                .map(|(threshold, pass_rate)| CdfPoint { threshold, pass_rate })
                .collect();
            Ok(Json(CdfResponse::Axis { version: snap.version(), axis, points }))
        }
        None => {
            let rows = cdf_table(&scores, &thresholds).map_err(ApiError::bad_request)?;
            Ok(Json(CdfResponse::All { version: snap.version(), rows }))
        }
    }
}

async fn tweet(State(st): State<AppState>, Path(id): Path<String>) -> Result<Json<TweetDetail>, ApiError> {
    let snap = st.store.current();
    let s = snap
        .get(&id)
        .ok_or_else(|| ApiError { status: StatusCode::NOT_FOUND, message: format!("no message with id {id:?}") })?;
    let map_context = st
        .provider
        .context(s.tweet.location)
        .map_err(|e| ApiError { status: StatusCode::INTERNAL_SERVER_ERROR, message: e.to_string() })?;
    let t = &s.tweet;
    Ok(Json(TweetDetail {
        version: snap.version(),
        id: t.id.clone(),
        created_at: t.created_at.to_iso(),
        lat: t.location.lat,
        lon: t.location.lon,
        location_kind: t.location_kind,
        message: t.text.clone(),
        hashtags: t.hashtags.clone(),
        weblinks: t.weblinks.clone(),
        media: t.media.clone(),
        has_media: !t.media.is_empty(),
        author: AuthorView {
            user_id: t.author.user_id.clone(),
            account_created_at: t.author.account_created_at.to_iso(),
            friends_count: t.author.friends_count,
            followers_count: t.author.followers_count,
            statuses_count: t.author.statuses_count,
            verified: t.author.verified,
        },
        scores: scores_of(s),
        tags: tags_of(s),
        map_context,
    }))
}

async fn config(State(st): State<AppState>) -> Json<BTreeMap<String, String>> {
    Json(st.config.entries().into_iter().map(|(k, v)| (k.to_string(), v)).collect())
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/snapshot/meta", get(meta))
        .route("/tweets", get(tweets))
        .route("/cdf", get(cdf))
        .route("/tweet/{id}", get(tweet))
        .route("/config", get(config))
        .with_state(state)
}

pub async fn serve(state: AppState, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state)).await
}
