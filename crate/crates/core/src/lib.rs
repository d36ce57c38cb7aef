//! Multi-modal relevance scoring for geolocated social-media messages
//! posted during a hurricane.
//!
//! Each message is scored on four independent axes, each normalized to
//! `0..=100`:
//!
//! * [`geo`]: forcing conditions (interpolated wind and rain, distance to the
//!   storm eye) at the message's place and hour.
//! * [`text`]: similarity of the message tokens to a seed term under
//!   per-window skip-gram embeddings.
//! * [`user`]: a credibility proxy trained to predict the platform's
//!   verified flag.
//! * [`image`]: two-stage image relevance (related, then incident tags).
//!
//! [`fusion`] combines the four scores under an AND threshold filter and
//! [`eval`] holds the shared metrics.

pub mod eval;
pub mod fusion;
pub mod geo;
pub mod image;
pub mod ingest;
pub mod kvdoc;
pub mod text;
pub mod user;

pub(crate) mod stats;
