use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::GeoPoint;
use crate::text::corpus::{read_jsonl, Lines};
use crate::text::Tweet;

pub const MAX_FOLLOW: usize = 5000;
pub const MAX_TRACK: usize = 400;
pub const MAX_LOCATIONS: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub sw: GeoPoint,
    pub ne: GeoPoint,
}

impl BoundingBox {
    pub fn contains(&self, p: GeoPoint) -> bool {
        p.lat >= self.sw.lat && p.lat <= self.ne.lat && p.lon >= self.sw.lon && p.lon <= self.ne.lon
    }
}

/// Stream filter. A tweet passes when it matches any clause; an empty
/// filter passes everything.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StreamConfig {
    pub follow: Vec<String>,
    pub track: Vec<String>,
    pub locations: Vec<BoundingBox>,
}

impl StreamConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, n: usize, max: usize| {
            if n > max {
                Err(Error::Config(format!("{name}: {n} entries exceed the limit of {max}")))
            } else {
                Ok(())
            }
        };
        check("follow", self.follow.len(), MAX_FOLLOW)?;
        check("track", self.track.len(), MAX_TRACK)?;
        check("locations", self.locations.len(), MAX_LOCATIONS)
    }

    pub fn is_empty(&self) -> bool {
        self.follow.is_empty() && self.track.is_empty() && self.locations.is_empty()
    }

    pub fn matches(&self, t: &Tweet) -> bool {
        if self.is_empty() {
            return true;
        }
        let text = t.text.to_lowercase();
        let tracked = self.track.iter().any(|k| text.contains(&k.to_lowercase()));
        let located = t.geo.is_some_and(|p| self.locations.iter().any(|b| b.contains(p)));
        let followed = t.user_id.as_ref().is_some_and(|u| self.follow.iter().any(|f| f == u));
        tracked || located || followed
    }
}

/// Tweets of a JSON Lines file that pass `filter`, in file order. Malformed
/// lines are skipped and reported.
pub fn replay_tweets(path: impl AsRef<Path>, filter: &StreamConfig) -> Result<Lines<Tweet>> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::file(path, e))?;
    replay_reader(BufReader::new(f), filter)
}

pub fn replay_reader(reader: impl std::io::BufRead, filter: &StreamConfig) -> Result<Lines<Tweet>> {
    filter.validate()?;
    let all = read_jsonl(reader, |r| r.to_tweet())?;
    Ok(Lines {
        items: all.items.into_iter().filter(|t| filter.matches(t)).collect(),
        skipped: all.skipped,
    })
}
