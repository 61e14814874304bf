//! Streaming city-event extraction from short informal texts.
//!
//! Tweets are tagged twice: a linear-chain CRF assigns BIO event/location
//! tags (the semantic view) and a windowed neural tagger assigns part-of-speech
//! and coarse LOC/ORG tags (the syntactic view). A multi-view energy-model
//! classifier fuses both views into event labels. Located events are scored
//! for impact and compared against authority records spatially.

pub mod cnn;
pub mod crf;
pub mod error;
pub mod fusion;
pub mod geo;
pub mod impact;
pub mod ingest;
pub mod pipeline;
pub mod similarity;
pub mod synth;
pub mod text;

pub use error::{Error, Result};
pub use geo::{CartesianPoint, CityFrame, GeoPoint};
pub use impact::{EventAnnotation, Gazetteer};
pub use pipeline::{Pipeline, PipelineConfig, WindowSnapshot};
pub use similarity::{AuthorityKind, AuthorityRecord, LocatedEvent, SimilarityReport};
pub use text::{AnnotatedTweet, BioTag, EventClass, NerSpan, Token, Tweet, TweetRecord};
