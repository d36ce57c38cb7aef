//! Pipeline orchestration, immutable snapshot store, query API and
//! operator commands for storm relevance filtering.

pub mod api;
pub mod commands;
pub mod config;
pub mod mapctx;
pub mod pipeline;
pub mod scenario;
pub mod snapshot;
