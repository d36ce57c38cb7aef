use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ingest::{LocationKind, Timestamp, TweetRecord};

use super::UserError;

pub const FEATURE_NAMES: [&str; 9] = [
    "account_age_days",
    "friends_count",
    "followers_count",
    "statuses_count",
    "has_weblinks",
    "hashtag_count",
    "has_media",
    "is_geolocated",
    "message_frequency",
];

/// Author credibility features aggregated over an author's messages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserFeatures {
    pub account_age_days: f64,
    pub friends_count: u64,
    pub followers_count: u64,
    pub statuses_count: u64,
    pub has_weblinks: bool,
    pub hashtag_count: u64,
    pub has_media: bool,
    pub is_geolocated: bool,
    /// `statuses_count / max(account_age_days, 1)`.
    pub message_frequency: f64,
}

impl UserFeatures {
    pub fn to_vec(&self) -> Vec<f64> {
        let b = |v: bool| if v { 1.0 } else { 0.0 };
        vec![
            self.account_age_days,
            self.friends_count as f64,
            self.followers_count as f64,
            self.statuses_count as f64,
            b(self.has_weblinks),
            self.hashtag_count as f64,
            b(self.has_media),
            b(self.is_geolocated),
            self.message_frequency,
        ]
    }
}

pub fn message_frequency(statuses: u64, account_age_days: f64) -> f64 {
    statuses as f64 / account_age_days.max(1.0)
}

/// Features for one author from all of that author's messages. Profile
/// counts come from the most recent message; the boolean features are true
/// if any message has the property.
pub fn extract_user_features(tweets: &[&TweetRecord], event_time: Timestamp) -> Result<UserFeatures, UserError> {
    let latest = tweets
        .iter()
        .max_by(|a, b| a.created_at.cmp(&b.created_at).then_with(|| b.id.cmp(&a.id)))
        .ok_or(UserError::NoTweets)?;
    let author = &latest.author;
    if tweets.iter().any(|t| t.author.user_id != author.user_id) {
        return Err(UserError::MixedAuthors);
    }
    let age_days = ((event_time.0 - author.account_created_at.0) as f64 / 86_400.0).max(0.0);
    Ok(UserFeatures {
        account_age_days: age_days,
        friends_count: author.friends_count,
        followers_count: author.followers_count,
        statuses_count: author.statuses_count,
        has_weblinks: tweets.iter().any(|t| !t.weblinks.is_empty()),
        hashtag_count: tweets.iter().map(|t| t.hashtags.len() as u64).sum(),
        has_media: tweets.iter().any(|t| !t.media.is_empty()),
        is_geolocated: tweets.iter().any(|t| t.location_kind == LocationKind::Coordinates),
        message_frequency: message_frequency(author.statuses_count, age_days),
    })
}

/// Features and verified flag per author id, in id order.
pub fn extract_all(tweets: &[TweetRecord], event_time: Timestamp) -> Result<BTreeMap<String, (UserFeatures, bool)>, UserError> {
    let mut by_author: BTreeMap<&str, Vec<&TweetRecord>> = BTreeMap::new();
    for t in tweets {
        by_author.entry(t.author.user_id.as_str()).or_default().push(t);
    }
    by_author
        .into_iter()
        .map(|(id, ts)| {
            let f = extract_user_features(&ts, event_time)?;
            let verified = ts.iter().max_by_key(|t| t.created_at).map(|t| t.author.verified).unwrap_or(false);
            Ok((id.to_string(), (f, verified)))
        })
        .collect()
}
