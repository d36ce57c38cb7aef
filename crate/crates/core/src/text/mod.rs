//! Text score: similarity of a message's tokens to a seed term under word
//! embeddings trained separately for each time segment.

mod embed;
mod score;
mod sweep;
mod tokenize;

use thiserror::Error;

pub use embed::{cosine, dot, norm, train_embeddings, EmbeddingTable, TextModelParams};
pub use score::{
    score_tweet, score_vectors, segment_of, segment_seed, text_score, top_k_neighbors, train_segments,
    write_neighbors_csv, SegmentSummary, SegmentedEmbeddings, TextScoreFormula,
};
pub use sweep::{sweep_hyperparameters, SweepCell, SweepReport};
pub use tokenize::{clean_tokenize, default_stopwords, parse_stopwords, tokenize_tweet, TokenizedTweet};

#[derive(Debug, Error)]
pub enum TextError {
    #[error("vocabulary is empty after pruning")]
    EmptyVocabulary,
    #[error("term {0:?} is not in the vocabulary")]
    UnknownTerm(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("malformed embedding table: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
