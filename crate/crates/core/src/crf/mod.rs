//! Linear-chain CRF sequence tagger over the 17 BIO event/location tags.

pub mod features;
pub mod lattice;
pub mod model;
pub mod train;

pub use features::FeatureExtractor;
pub use model::{semantic_view_from_tags, CrfModel, CRF_FORMAT, SEMANTIC_VIEW_DIM};
pub use train::{build_vocab, objective_with_gradient, train, train_with_report, CrfTrainConfig, CrfTrainReport};

use crate::error::{Error, Result};
use crate::text::{tokenize, AnnotatedTweet, BioTag, Token};

/// A token sequence with one gold tag per token.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggedSentence {
    pub tokens: Vec<Token>,
    pub tags: Vec<BioTag>,
}

impl TaggedSentence {
    pub fn from_annotated(a: &AnnotatedTweet) -> Result<Self> {
        let tags = a
            .token_tags
            .clone()
            .ok_or_else(|| Error::invalid("tags", format!("tweet {} has no token tags", a.tweet.id)))?;
        let tokens = tokenize(&a.tweet.text)?;
        if tokens.len() != tags.len() {
            return Err(Error::Shape {
                expected: tokens.len(),
                actual: tags.len(),
            });
        }
        Ok(TaggedSentence { tokens, tags })
    }
}
