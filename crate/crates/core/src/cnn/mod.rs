//! Windowed neural tagger: a lookup table, a K-token window, one hardtanh
//! layer and two linear output heads (part of speech and coarse LOC/ORG
//! entities) sharing the hidden layer.

pub mod boost;
pub mod corpus;
pub mod model;
pub mod train;

pub use boost::boost_location;
pub use corpus::{normalize_word, read_pos_corpus, PosSentence};
pub use model::{hardtanh, CnnModel, CNN_FORMAT, SYNTACTIC_VIEW_DIM};
pub use train::{train, train_with_report, CnnTrainConfig, CnnTrainReport};

/// Universal part-of-speech tags, in output-head order.
pub const UPOS: [&str; 17] = [
    "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM", "PART", "PRON", "PROPN", "PUNCT", "SCONJ",
    "SYM", "VERB", "X",
];

/// Auxiliary entity head tags, in output-head order.
pub const ENTITY_TAGS: [&str; 5] = ["O", "B-LOC", "I-LOC", "B-ORG", "I-ORG"];

pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";

pub fn pos_index(tag: &str) -> Option<usize> {
    UPOS.iter().position(|t| t.eq_ignore_ascii_case(tag.trim()))
}

pub fn entity_index(tag: &str) -> Option<usize> {
    ENTITY_TAGS.iter().position(|t| t.eq_ignore_ascii_case(tag.trim()))
}
