//! User credibility score: classifiers trained from scratch to predict the
//! platform's verified flag from author features, with the log-probability
//! rescaled to `0..=100`.

mod cv;
mod features;
mod model;
mod tree;

use thiserror::Error;

pub use cv::{
    cross_validate, grid_search, stratified_split, CvReport, FoldMetrics, GridResult, GridSpec, MeanStd, CV_REPEATS,
    DECISION_THRESHOLD, TEST_FRACTION,
};
pub use features::{extract_all, extract_user_features, message_frequency, UserFeatures, FEATURE_NAMES};
pub use model::{ClassifierKind, Hyperparams, ModelBody, TrainedUserModel, PROBABILITY_FLOOR};
pub use tree::{Node, Tree, TreeParams};

#[derive(Debug, Error)]
pub enum UserError {
    #[error("author has no messages")]
    NoTweets,
    #[error("messages belong to more than one author")]
    MixedAuthors,
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("{features} feature rows but {labels} labels")]
    LengthMismatch { features: usize, labels: usize },
    #[error("feature rows have inconsistent or zero width")]
    FeatureWidth,
    #[error("non-finite feature value")]
    NonFinite,
    #[error("training data contains a single class")]
    SingleClass,
    #[error("cross-validation needs at least 10 samples and 2 of each class")]
    TooFewSamples,
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error("grid has an axis without values")]
    EmptyGrid,
    #[error("feature importance needs a tree ensemble")]
    NotATreeEnsemble,
    #[error("ensemble has no splits")]
    NoSplits,
    #[error("evaluation failed: {0}")]
    Eval(String),
    #[error("model text line {line}: {message}")]
    Format { line: usize, message: String },
}
