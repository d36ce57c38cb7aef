use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::embed::{cosine, dot, train_embeddings, EmbeddingTable, TextModelParams};
use super::tokenize::TokenizedTweet;
use super::TextError;

/// Tweet-versus-seed-term similarity formulas. All are oriented so that a
/// larger value means more related.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TextScoreFormula {
    /// Cosine between the seed vector and the sum of token vectors.
    Cstvs,
    /// Dot product of the seed vector and the sum of token vectors.
    Dp,
    /// Mean of per-token cosines.
    Mcs,
    /// Sum of per-token cosines over the square root of the token count.
    Scssc,
}

impl TextScoreFormula {
    pub const ALL: [TextScoreFormula; 4] =
        [TextScoreFormula::Cstvs, TextScoreFormula::Dp, TextScoreFormula::Mcs, TextScoreFormula::Scssc];

    pub fn name(self) -> &'static str {
        match self {
            TextScoreFormula::Cstvs => "CSTVS",
            TextScoreFormula::Dp => "DP",
            TextScoreFormula::Mcs => "MCS",
            TextScoreFormula::Scssc => "SCSSC",
        }
    }
}

impl fmt::Display for TextScoreFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TextScoreFormula {
    type Err = TextError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TextScoreFormula::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| TextError::InvalidParams(format!("unknown formula {s:?}")))
    }
}

/// Raw score of a set of token vectors against `alpha`; `None` when there
/// are no vectors.
pub fn score_vectors(formula: TextScoreFormula, alpha: &[f64], taus: &[&[f64]]) -> Option<f64> {
    let n = taus.len();
    if n == 0 {
        return None;
    }
    let sum = || {
        let mut s = vec![0.0; alpha.len()];
        for t in taus {
            for (acc, x) in s.iter_mut().zip(t.iter()) {
                *acc += x;
            }
        }
        s
    };
    let cos_sum = || taus.iter().map(|t| cosine(alpha, t)).sum::<f64>();
    Some(match formula {
        TextScoreFormula::Cstvs => cosine(alpha, &sum()),
        TextScoreFormula::Dp => dot(alpha, &sum()),
        TextScoreFormula::Mcs => cos_sum() / n as f64,
        TextScoreFormula::Scssc => cos_sum() / (n as f64).sqrt(),
    })
}

/// Raw score of one tweet. Out-of-vocabulary tokens are skipped; `None`
/// when no token is in the table.
pub fn score_tweet(
    formula: TextScoreFormula,
    alpha: &[f64],
    tweet: &TokenizedTweet,
    table: &EmbeddingTable,
) -> Option<f64> {
    let taus: Vec<&[f64]> = tweet.tokens.iter().filter_map(|t| table.get(t)).collect();
    score_vectors(formula, alpha, &taus)
}

/// Min-max scaling of one window's raw scores onto `[0, 100]`.
///
/// Tweets without a raw score take the window minimum. A window with a
/// single distinct value (including a single tweet) scores 50; a window
/// where no tweet has a raw score scores 0.
pub fn text_score(raw: &[Option<f64>]) -> Vec<f64> {
    let present = raw.iter().flatten().copied();
    let lo = present.clone().fold(f64::INFINITY, f64::min);
    let hi = present.fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() {
        return vec![0.0; raw.len()];
    }
    raw.iter()
        .map(|r| {
            let x = r.unwrap_or(lo);
            if hi > lo {
                ((x - lo) / (hi - lo) * 100.0).clamp(0.0, 100.0)
            } else {
                50.0
            }
        })
        .collect()
}

/// The `k` tokens with the highest cosine to `term`, ties broken by token
/// order; `term` itself is excluded.
pub fn top_k_neighbors(term: &str, table: &EmbeddingTable, k: usize) -> Result<Vec<(String, f64)>, TextError> {
    let alpha = table.get(term).ok_or_else(|| TextError::UnknownTerm(term.to_string()))?;
    let mut all: Vec<(String, f64)> =
        table.iter().filter(|(t, _)| *t != term).map(|(t, v)| (t.to_string(), cosine(alpha, v))).collect();
    all.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    all.truncate(k);
    Ok(all)
}

pub fn write_neighbors_csv<W: Write>(out: W, neighbors: &[(String, f64)]) -> Result<(), TextError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["rank", "token", "cosine"]).map_err(|e| TextError::Format(e.to_string()))?;
    for (i, (t, c)) in neighbors.iter().enumerate() {
        w.write_record([(i + 1).to_string(), t.clone(), c.to_string()])
            .map_err(|e| TextError::Format(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Segment id of an hourly window for a given segment length in hours.
pub fn segment_of(window_index: u32, segment_hours: u32) -> u32 {
    window_index / segment_hours.max(1)
}

/// Per-segment seed, independent of every other segment.
pub fn segment_seed(seed: u64, segment: u32) -> u64 {
    seed ^ (u64::from(segment) + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSummary {
    pub segment: u32,
    pub tweets: usize,
    pub vocab_size: usize,
    pub seed_term_present: bool,
    pub warning: Option<String>,
}

/// Trained tables for every segment of a corpus.
#[derive(Debug, Clone)]
pub struct SegmentedEmbeddings {
    pub segment_hours: u32,
    pub tables: BTreeMap<u32, EmbeddingTable>,
    pub summaries: Vec<SegmentSummary>,
    /// Segment id of each input tweet, aligned with the corpus.
    pub assignment: Vec<u32>,
}

/// Trains one table per time segment. Each segment uses only its own tweets
/// and a seed derived from `params.seed` and the segment id, so segments
/// never influence each other.
pub fn train_segments(
    corpus: &[TokenizedTweet],
    params: &TextModelParams,
    seed_term: &str,
    segment_hours: u32,
) -> Result<SegmentedEmbeddings, TextError> {
    params.validate()?;
    if segment_hours == 0 {
        return Err(TextError::InvalidParams("segment_hours must be positive".into()));
    }
    let assignment: Vec<u32> = corpus.iter().map(|t| segment_of(t.window.index, segment_hours)).collect();
    let mut groups: BTreeMap<u32, Vec<TokenizedTweet>> = BTreeMap::new();
    for (t, &s) in corpus.iter().zip(&assignment) {
        groups.entry(s).or_default().push(t.clone());
    }
    let trained: Vec<(u32, usize, Result<EmbeddingTable, TextError>)> = groups
        .into_par_iter()
        .map(|(s, tweets)| {
            let p = TextModelParams { seed: segment_seed(params.seed, s), ..params.clone() };
            (s, tweets.len(), train_embeddings(s, &tweets, &p))
        })
        .collect();

    let mut tables = BTreeMap::new();
    let mut summaries = Vec::new();
    for (segment, n, result) in trained {
        match result {
            Ok(table) => {
                let present = table.contains(seed_term);
                summaries.push(SegmentSummary {
                    segment,
                    tweets: n,
                    vocab_size: table.len(),
                    seed_term_present: present,
                    warning: (!present).then(|| format!("seed term {seed_term:?} absent from segment {segment}")),
                });
                tables.insert(segment, table);
            }
            Err(TextError::EmptyVocabulary) => summaries.push(SegmentSummary {
                segment,
                tweets: n,
                vocab_size: 0,
                seed_term_present: false,
                warning: Some(format!("segment {segment} has an empty vocabulary after pruning")),
            }),
            Err(e) => return Err(e),
        }
    }
    if tables.is_empty() {
        return Err(TextError::EmptyVocabulary);
    }
    Ok(SegmentedEmbeddings { segment_hours, tables, summaries, assignment })
}

impl SegmentedEmbeddings {
    /// Raw scores aligned with `corpus`. Tweets in a segment lacking the
    /// seed term get `None`, as do tweets with no in-vocabulary token.
    pub fn raw_scores(&self, corpus: &[TokenizedTweet], formula: TextScoreFormula, seed_term: &str) -> Vec<Option<f64>> {
        corpus
            .par_iter()
            .zip(&self.assignment)
            .map(|(t, s)| {
                let table = self.tables.get(s)?;
                let alpha = table.get(seed_term)?;
                score_tweet(formula, alpha, t, table)
            })
            .collect()
    }

    /// Scores in `[0, 100]`, min-max scaled within each segment. Segments
    /// without the seed term score 0 throughout.
    pub fn scores(&self, corpus: &[TokenizedTweet], formula: TextScoreFormula, seed_term: &str) -> Vec<f64> {
        let raw = self.raw_scores(corpus, formula, seed_term);
        let mut out = vec![0.0; corpus.len()];
        let mut members: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for (i, &s) in self.assignment.iter().enumerate() {
            members.entry(s).or_default().push(i);
        }
        for (s, idx) in members {
            let usable = self.tables.get(&s).is_some_and(|t| t.contains(seed_term));
            if !usable {
                continue;
            }
            let window_raw: Vec<Option<f64>> = idx.iter().map(|&i| raw[i]).collect();
            for (&i, v) in idx.iter().zip(text_score(&window_raw)) {
                out[i] = v;
            }
        }
        out
    }
}
