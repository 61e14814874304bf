//! Collectors: tweet stream replay, road-disruption feeds and scheduled-event
//! listings. Everything leaves this module with UTC timestamps.

pub mod disruptions;
pub mod listings;
pub mod stream;

pub use disruptions::{parse_disruptions, DisruptionMapping, DisruptionOutcome};
pub use listings::{parse_listings, ListingsOutcome, ParseWarning, ParserRules, UnlocatedListing};
pub use stream::{replay_reader, replay_tweets, BoundingBox, StreamConfig};
