use std::collections::HashSet;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::ingest::TimeWindow;

const BUNDLED_STOPWORDS: &str = include_str!("stopwords.txt");

/// The bundled English stopword list (one word per line, lowercase).
pub fn default_stopwords() -> &'static HashSet<String> {
    static SET: OnceLock<HashSet<String>> = OnceLock::new();
    SET.get_or_init(|| parse_stopwords(BUNDLED_STOPWORDS))
}

pub fn parse_stopwords(text: &str) -> HashSet<String> {
    text.lines().map(|l| l.trim().to_lowercase()).filter(|l| !l.is_empty()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenizedTweet {
    pub tweet_id: String,
    pub tokens: Vec<String>,
    pub window: TimeWindow,
}

fn is_url(chunk: &str) -> bool {
    let lower = chunk.to_lowercase();
    lower.starts_with("http://") || lower.starts_with("https://") || lower.starts_with("www.")
}

/// Lowercases, drops URLs, `@mentions`, punctuation, digits and stopwords,
/// and keeps hashtags with their `#` prefix.
///
/// Words are maximal runs of alphabetic characters, so `"don't"` yields
/// `"don"` and `"t"` and `"13:00"` yields nothing. A hashtag keeps the
/// letters of its leading word-character run: `"#Irma2017!"` becomes
/// `"#irma"`.
pub fn clean_tokenize(text: &str, stopwords: &HashSet<String>) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        if is_url(chunk) || chunk.starts_with('@') {
            continue;
        }
        if let Some(body) = chunk.strip_prefix('#') {
            let tag: String = body
                .chars()
                .take_while(|c| c.is_alphanumeric() || *c == '_')
                .filter(|c| c.is_alphabetic())
                .flat_map(char::to_lowercase)
                .collect();
            if !tag.is_empty() {
                out.push(format!("#{tag}"));
            }
            continue;
        }
        let lower = chunk.to_lowercase();
        for word in lower.split(|c: char| !c.is_alphabetic()) {
            if !word.is_empty() && !stopwords.contains(word) {
                out.push(word.to_string());
            }
        }
    }
    out
}

pub fn tokenize_tweet(tweet_id: &str, text: &str, window: TimeWindow, stopwords: &HashSet<String>) -> TokenizedTweet {
    TokenizedTweet { tweet_id: tweet_id.to_string(), tokens: clean_tokenize(text, stopwords), window }
}
