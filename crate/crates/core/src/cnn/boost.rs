use std::ops::Range;

use crate::text::tags::repair;
use crate::text::{BioTag, EventClass};

/// Merges the neural tagger's LOC ranges into CRF tags.
///
/// Every token inside a LOC range becomes part of a Location span unless the
/// CRF already put it inside a span of another class; those spans are kept
/// untouched. A new Location run starts after a non-Location token or where
/// the CRF itself began a Location span. The result is always valid BIO.
pub fn boost_location(crf_tags: &[BioTag], loc_spans: &[Range<usize>]) -> Vec<BioTag> {
    let tags = repair(crf_tags);
    let n = tags.len();
    let mut is_loc: Vec<bool> = tags.iter().map(|t| t.class() == Some(EventClass::Location)).collect();
    for r in loc_spans {
        for j in r.start.min(n)..r.end.min(n) {
            if tags[j].class().is_none() {
                is_loc[j] = true;
            }
        }
    }
    (0..n)
        .map(|j| {
            if !is_loc[j] {
                tags[j]
            } else if j == 0 || !is_loc[j - 1] || tags[j] == BioTag::Begin(EventClass::Location) {
                BioTag::Begin(EventClass::Location)
            } else {
                BioTag::Inside(EventClass::Location)
            }
        })
        .collect()
}
