//! Shared text model: tokens, event classes, BIO tags, dictionaries and the
//! annotated-corpus format.

pub mod corpus;
pub mod dictionary;
pub mod tags;
pub mod token;

pub use corpus::{AnnotatedTweet, Tweet, TweetRecord};
pub use dictionary::{load_dictionaries, ClassDictionary, DictionarySet};
pub use tags::{full_tag_set, spans_from_tags, tags_from_spans, BioTag, EventClass, NerSpan};
pub use token::{detokenize, tokenize, tokenize_words, Token, TokenKind};
