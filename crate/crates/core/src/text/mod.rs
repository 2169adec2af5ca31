//! Page layout, tokenization, candidate selection and word-level
//! knowledge features.

pub mod embed;
pub mod knowledge;
pub mod labels;
pub mod layout;
pub mod lexicon;
pub mod vocab;

pub use embed::cooccurrence_embeddings;
pub use knowledge::{knowledge_features, FrequencyTable, KnowledgeVector, NerTag, PosTag, TF_BINS};
pub use labels::{read_labels, write_labels, Label, LabelSet};
pub use layout::{candidate_words, normalize, DocumentLayout, LayoutWord};
pub use vocab::{build_vocabulary, tokenize, TokenSpan, VocabConfig, Vocabulary};
