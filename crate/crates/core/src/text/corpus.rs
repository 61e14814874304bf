//! Tweets, annotated tweets and their JSON Lines representation.
//!
//! One object per line:
//! `{"id","text","created_at","lat","lon","labels":[..],"tags":[..]}`
//! with `lat`/`lon`/`tags` (and `labels` for plain tweets) optional.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use chrono::{DateTime, NaiveDateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use super::tags::{BioTag, EventClass};
use super::token::tokenize;
use crate::error::{Error, Result};
use crate::geo::GeoPoint;

pub const MAX_TWEET_CHARS: usize = 280;

#[derive(Debug, Clone, PartialEq)]
pub struct Tweet {
    pub id: String,
    pub text: String,
    pub created_at: DateTime<Utc>,
    pub geo: Option<GeoPoint>,
    /// Author id; only consulted by the stream `follow` filter.
    pub user_id: Option<String>,
}

impl Tweet {
    pub fn new(
        id: impl Into<String>,
        text: impl Into<String>,
        created_at: DateTime<Utc>,
        geo: Option<GeoPoint>,
    ) -> Result<Self> {
        let tweet = Tweet {
            id: id.into(),
            text: text.into(),
            created_at,
            geo,
            user_id: None,
        };
        tweet.validate()?;
        Ok(tweet)
    }

    pub fn validate(&self) -> Result<()> {
        if self.text.trim().is_empty() {
            return Err(Error::invalid("text", "must not be empty"));
        }
        if self.text.chars().count() > MAX_TWEET_CHARS {
            return Err(Error::invalid(
                "text",
                format!("longer than {MAX_TWEET_CHARS} characters"),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedTweet {
    pub tweet: Tweet,
    pub labels: BTreeSet<EventClass>,
    pub token_tags: Option<Vec<BioTag>>,
}

impl AnnotatedTweet {
    pub fn new(tweet: Tweet, labels: BTreeSet<EventClass>, token_tags: Option<Vec<BioTag>>) -> Result<Self> {
        validate_labels(&labels)?;
        if let Some(tags) = &token_tags {
            let n = tokenize(&tweet.text)?.len();
            if tags.len() != n {
                return Err(Error::invalid("tags", format!("{} tags for {} tokens", tags.len(), n)));
            }
        }
        Ok(AnnotatedTweet {
            tweet,
            labels,
            token_tags,
        })
    }
}

pub fn validate_labels(labels: &BTreeSet<EventClass>) -> Result<()> {
    if labels.is_empty() {
        return Err(Error::invalid("labels", "at least one label is required"));
    }
    if labels.contains(&EventClass::Location) {
        return Err(Error::invalid("labels", "Location is a span tag, not a tweet label"));
    }
    if labels.contains(&EventClass::Other) && labels.len() > 1 {
        return Err(Error::invalid("labels", "Other cannot be combined with other labels"));
    }
    Ok(())
}

/// Flat wire form shared by tweets and annotated tweets.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TweetRecord {
    pub id: String,
    pub text: String,
    pub created_at: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tags: Option<Vec<String>>,
}

pub fn parse_timestamp(s: &str) -> Result<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Ok(t.with_timezone(&Utc));
    }
    // Twitter's legacy created_at format.
    if let Ok(t) = DateTime::parse_from_str(s, "%a %b %d %H:%M:%S %z %Y") {
        return Ok(t.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(t.and_utc());
        }
    }
    Err(Error::invalid("created_at", format!("unparseable timestamp {s:?}")))
}

pub fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Secs, true)
}

impl TweetRecord {
    pub fn to_tweet(&self) -> Result<Tweet> {
        if self.id.trim().is_empty() {
            return Err(Error::invalid("id", "must not be empty"));
        }
        let created_at = parse_timestamp(&self.created_at)?;
        let geo = match (self.lat, self.lon) {
            (Some(lat), Some(lon)) => Some(GeoPoint::new(lat, lon).map_err(|e| Error::invalid("lat", e.to_string()))?),
            (None, None) => None,
            (Some(_), None) => return Err(Error::invalid("lon", "lat given without lon")),
            (None, Some(_)) => return Err(Error::invalid("lat", "lon given without lat")),
        };
        let tweet = Tweet {
            id: self.id.clone(),
            text: self.text.clone(),
            created_at,
            geo,
            user_id: self.user.clone(),
        };
        tweet.validate()?;
        Ok(tweet)
    }

    pub fn to_annotated(&self) -> Result<AnnotatedTweet> {
        let tweet = self.to_tweet()?;
        let labels = self
            .labels
            .as_ref()
            .ok_or_else(|| Error::invalid("labels", "missing"))?
            .iter()
            .map(|l| {
                l.parse::<EventClass>()
                    .map_err(|_| Error::invalid("labels", format!("unknown label {l:?}")))
            })
            .collect::<Result<BTreeSet<_>>>()?;
        let token_tags = self
            .tags
            .as_ref()
            .map(|tags| {
                tags.iter()
                    .map(|t| {
                        t.parse::<BioTag>()
                            .map_err(|_| Error::invalid("tags", format!("malformed tag {t:?}")))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .transpose()?;
        AnnotatedTweet::new(tweet, labels, token_tags)
    }

    pub fn from_tweet(t: &Tweet) -> Self {
        TweetRecord {
            id: t.id.clone(),
            text: t.text.clone(),
            created_at: format_timestamp(&t.created_at),
            lat: t.geo.map(|g| g.lat),
            lon: t.geo.map(|g| g.lon),
            user: t.user_id.clone(),
            labels: None,
            tags: None,
        }
    }

    pub fn from_annotated(a: &AnnotatedTweet) -> Self {
        let mut r = Self::from_tweet(&a.tweet);
        r.labels = Some(a.labels.iter().map(|c| c.name().to_string()).collect());
        r.tags = a
            .token_tags
            .as_ref()
            .map(|tags| tags.iter().map(|t| t.to_string()).collect());
        r
    }
}

/// Outcome of reading a JSON Lines file where bad lines are skipped.
#[derive(Debug, Clone)]
pub struct Lines<T> {
    pub items: Vec<T>,
    /// `(1-based line number, reason)` for every skipped line.
    pub skipped: Vec<(usize, String)>,
}

pub fn read_jsonl<T, R, F>(reader: R, mut convert: F) -> Result<Lines<T>>
where
    R: BufRead,
    F: FnMut(TweetRecord) -> Result<T>,
{
    let mut items = Vec::new();
    let mut skipped = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<TweetRecord>(&line)
            .map_err(Error::from)
            .and_then(&mut convert);
        match parsed {
            Ok(item) => items.push(item),
            Err(e) => skipped.push((i + 1, e.to_string())),
        }
    }
    Ok(Lines { items, skipped })
}

pub fn read_annotated(reader: impl BufRead) -> Result<Lines<AnnotatedTweet>> {
    read_jsonl(reader, |r| r.to_annotated())
}

pub fn write_jsonl<W: Write>(mut w: W, records: &[TweetRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
