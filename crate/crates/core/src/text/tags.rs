use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// City-event classes. `Location` only ever tags spans; `Other` only ever
/// labels whole tweets and never co-occurs with another label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventClass {
    Crime,
    Cultural,
    Food,
    Social,
    Sport,
    Weather,
    Transportation,
    Location,
    Other,
}

impl EventClass {
    pub const ALL: [EventClass; 9] = [
        EventClass::Crime,
        EventClass::Cultural,
        EventClass::Food,
        EventClass::Social,
        EventClass::Sport,
        EventClass::Weather,
        EventClass::Transportation,
        EventClass::Location,
        EventClass::Other,
    ];

    /// Classes that carry B-/I- span tags (everything but `Other`).
    pub const SPAN: [EventClass; 8] = [
        EventClass::Crime,
        EventClass::Cultural,
        EventClass::Food,
        EventClass::Social,
        EventClass::Sport,
        EventClass::Weather,
        EventClass::Transportation,
        EventClass::Location,
    ];

    /// Final tweet-level event labels (the fusion classifier's output space).
    pub const EVENTS: [EventClass; 7] = [
        EventClass::Crime,
        EventClass::Cultural,
        EventClass::Food,
        EventClass::Social,
        EventClass::Sport,
        EventClass::Weather,
        EventClass::Transportation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EventClass::Crime => "Crime",
            EventClass::Cultural => "Cultural",
            EventClass::Food => "Food",
            EventClass::Social => "Social",
            EventClass::Sport => "Sport",
            EventClass::Weather => "Weather",
            EventClass::Transportation => "Transportation",
            EventClass::Location => "Location",
            EventClass::Other => "Other",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn event_index(self) -> Option<usize> {
        Self::EVENTS.iter().position(|c| *c == self)
    }
}

impl fmt::Display for EventClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EventClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let c = match s.trim().to_ascii_lowercase().as_str() {
            "crime" | "criminal" => EventClass::Crime,
            "cultural" => EventClass::Cultural,
            "food" => EventClass::Food,
            "social" => EventClass::Social,
            "sport" => EventClass::Sport,
            "weather" => EventClass::Weather,
            "transportation" | "transport" | "trans" => EventClass::Transportation,
            "location" => EventClass::Location,
            "other" => EventClass::Other,
            _ => return Err(Error::invalid("class", format!("unknown event class {s:?}"))),
        };
        Ok(c)
    }
}

impl Serialize for EventClass {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for EventClass {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BioTag {
    Outside,
    Begin(EventClass),
    Inside(EventClass),
}

impl BioTag {
    pub fn class(self) -> Option<EventClass> {
        match self {
            BioTag::Outside => None,
            BioTag::Begin(c) | BioTag::Inside(c) => Some(c),
        }
    }

    pub fn is_outside(self) -> bool {
        self == BioTag::Outside
    }
}

impl fmt::Display for BioTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BioTag::Outside => f.write_str("O"),
            BioTag::Begin(c) => write!(f, "B-{c}"),
            BioTag::Inside(c) => write!(f, "I-{c}"),
        }
    }
}

impl FromStr for BioTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "O" {
            return Ok(BioTag::Outside);
        }
        let bad = || Error::invalid("tag", format!("malformed BIO tag {s:?}"));
        let (prefix, class) = s.split_once('-').ok_or_else(bad)?;
        let class: EventClass = class.parse().map_err(|_| bad())?;
        if class == EventClass::Other {
            return Err(bad());
        }
        match prefix {
            "B" => Ok(BioTag::Begin(class)),
            "I" => Ok(BioTag::Inside(class)),
            _ => Err(bad()),
        }
    }
}

impl Serialize for BioTag {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BioTag {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The full 17-tag inventory in its fixed order: `O`, then `B-X`, `I-X` for
/// each span class. Decoding ties resolve towards the front of this list.
pub fn full_tag_set() -> Vec<BioTag> {
    let mut tags = vec![BioTag::Outside];
    for c in EventClass::SPAN {
        tags.push(BioTag::Begin(c));
        tags.push(BioTag::Inside(c));
    }
    tags
}

/// A labelled token range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NerSpan {
    pub class: EventClass,
    pub start: usize,
    pub end: usize,
}

impl NerSpan {
    pub fn new(class: EventClass, start: usize, end: usize) -> Self {
        NerSpan { class, start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }

    pub fn contains(&self, pos: usize) -> bool {
        self.start <= pos && pos < self.end
    }
}

/// Rewrites orphan `I-X` tags (not preceded by `B-X`/`I-X`) as `B-X`.
pub fn repair(tags: &[BioTag]) -> Vec<BioTag> {
    let mut out = Vec::with_capacity(tags.len());
    let mut prev: Option<EventClass> = None;
    for &t in tags {
        let fixed = match t {
            BioTag::Inside(c) if prev != Some(c) => BioTag::Begin(c),
            other => other,
        };
        prev = fixed.class();
        out.push(fixed);
    }
    out
}

pub fn is_valid_bio(tags: &[BioTag]) -> bool {
    let mut prev: Option<EventClass> = None;
    for &t in tags {
        if let BioTag::Inside(c) = t {
            if prev != Some(c) {
                return false;
            }
        }
        prev = t.class();
    }
    true
}

/// Groups maximal `B-X (I-X)*` runs into spans, after orphan repair.
pub fn spans_from_tags(tags: &[BioTag]) -> Vec<NerSpan> {
    let tags = repair(tags);
    let mut spans: Vec<NerSpan> = Vec::new();
    for (i, t) in tags.iter().enumerate() {
        match *t {
            BioTag::Outside => {}
            BioTag::Begin(c) => spans.push(NerSpan::new(c, i, i + 1)),
            BioTag::Inside(_) => {
                if let Some(last) = spans.last_mut() {
                    last.end = i + 1;
                }
            }
        }
    }
    spans
}

/// Inverse of [`spans_from_tags`] for non-overlapping spans.
pub fn tags_from_spans(len: usize, spans: &[NerSpan]) -> Vec<BioTag> {
    let mut tags = vec![BioTag::Outside; len];
    for s in spans {
        for (k, pos) in (s.start..s.end.min(len)).enumerate() {
            tags[pos] = if k == 0 {
                BioTag::Begin(s.class)
            } else {
                BioTag::Inside(s.class)
            };
        }
    }
    tags
}
