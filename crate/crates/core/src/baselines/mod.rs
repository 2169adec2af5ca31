//! Comparison methods: gaze heuristics, a feature-based logistic
//! regression and n-gram memorization of training labels.

mod heuristics;
mod logistic;
mod ngram;

pub use heuristics::{calibrate_grid, distance_heuristic, fixation_heuristic, Direction, GridThreshold};
pub use logistic::{logistic_features, LogisticModel, LOGISTIC_FEATURES};
pub use ngram::{DocText, NGramPredictor, SENTENCE_START};
