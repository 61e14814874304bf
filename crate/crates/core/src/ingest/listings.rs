//! Scheduled-event listings scraped from HTML with CSS selectors.

use chrono::{DateTime, NaiveDate, NaiveDateTime, TimeZone, Utc};
use chrono_tz::Tz;
use scraper::{ElementRef, Html, Selector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::GeoPoint;
use crate::impact::Gazetteer;
use crate::similarity::{AuthorityKind, AuthorityRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParserRules {
    pub record_selector: String,
    pub name_selector: String,
    pub venue_selector: String,
    pub date_selector: String,
    /// Element carrying `data-lat`/`data-lon` attributes or `lat,lon` text.
    pub coords_selector: Option<String>,
    pub category_selector: Option<String>,
    /// Prefixed to relative `href`s of the name element to form source ids.
    pub base_url: String,
    /// IANA zone that listing times are written in.
    pub timezone: String,
}

impl Default for ParserRules {
    fn default() -> Self {
        ParserRules {
            record_selector: "article.listing".into(),
            name_selector: ".listing-title".into(),
            venue_selector: ".venue".into(),
            date_selector: "time".into(),
            coords_selector: None,
            category_selector: Some(".category".into()),
            base_url: String::new(),
            timezone: "Europe/London".into(),
        }
    }
}

/// A listing whose venue could not be located.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnlocatedListing {
    pub title: String,
    pub venue: String,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParseWarning {
    /// The record selector matched nothing.
    EmptyParse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ListingsOutcome {
    pub records: Vec<AuthorityRecord>,
    pub unlocated: Vec<UnlocatedListing>,
    /// `(record index, reason)` for listings without a usable name or date.
    pub dropped: Vec<(usize, String)>,
    pub warning: Option<ParseWarning>,
}

fn selector(s: &str) -> Result<Selector> {
    Selector::parse(s).map_err(|e| Error::Config(format!("bad selector {s:?}: {e}")))
}

fn text_of(el: ElementRef<'_>) -> String {
    el.text()
        .collect::<Vec<_>>()
        .join(" ")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// Parses a listing time written in `tz`, or an absolute RFC 3339 stamp.
pub fn parse_local_time(s: &str, tz: Tz) -> Option<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    const FORMATS: [&str; 5] = [
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
        "%d %B %Y %H:%M",
        "%A %d %B %Y %H:%M",
    ];
    let naive = FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .or_else(|| {
            ["%Y-%m-%d", "%d %B %Y"]
                .iter()
                .find_map(|f| NaiveDate::parse_from_str(s, f).ok())
                .and_then(|d| d.and_hms_opt(0, 0, 0))
        })?;
    // ambiguous wall-clock times (clocks going back) take the earlier instant
    tz.from_local_datetime(&naive).earliest().map(|t| t.with_timezone(&Utc))
}

fn coords(el: ElementRef<'_>) -> Option<GeoPoint> {
    let v = el.value();
    if let (Some(lat), Some(lon)) = (v.attr("data-lat"), v.attr("data-lon")) {
        return GeoPoint::new(lat.trim().parse().ok()?, lon.trim().parse().ok()?).ok();
    }
    let t = text_of(el);
    let (a, b) = t.split_once(',')?;
    GeoPoint::new(a.trim().parse().ok()?, b.trim().parse().ok()?).ok()
}

pub fn parse_listings(html: &str, rules: &ParserRules, gazetteer: &Gazetteer) -> Result<ListingsOutcome> {
    if rules.record_selector.trim().is_empty() {
        return Err(Error::Config("record_selector must not be empty".into()));
    }
    let tz: Tz = rules
        .timezone
        .parse()
        .map_err(|_| Error::Config(format!("unknown timezone {:?}", rules.timezone)))?;
    let record_sel = selector(&rules.record_selector)?;
    let name_sel = selector(&rules.name_selector)?;
    let venue_sel = selector(&rules.venue_selector)?;
    let date_sel = selector(&rules.date_selector)?;
    let coords_sel = rules.coords_selector.as_deref().map(selector).transpose()?;
    let cat_sel = rules.category_selector.as_deref().map(selector).transpose()?;
    let link_sel = selector("a")?;

    let doc = Html::parse_document(html);
    let mut out = ListingsOutcome {
        records: Vec::new(),
        unlocated: Vec::new(),
        dropped: Vec::new(),
        warning: None,
    };
    for (i, rec) in doc.select(&record_sel).enumerate() {
        let Some(name_el) = rec.select(&name_sel).next() else {
            out.dropped.push((i, "no name".into()));
            continue;
        };
        let title = text_of(name_el);
        let venue = rec.select(&venue_sel).next().map(text_of).unwrap_or_default();
        let date_raw = rec.select(&date_sel).next().map(|d| {
            d.value()
                .attr("datetime")
                .map(str::to_string)
                .unwrap_or_else(|| text_of(d))
        });
        let Some(timestamp) = date_raw.as_deref().and_then(|d| parse_local_time(d, tz)) else {
            out.dropped.push((i, format!("unparseable date {date_raw:?}")));
            continue;
        };
        let location = coords_sel
            .as_ref()
            .and_then(|s| rec.select(s).next())
            .and_then(coords)
            .or_else(|| gazetteer.lookup(&venue));
        let Some(location) = location else {
            out.unlocated.push(UnlocatedListing {
                title,
                venue,
                timestamp,
            });
            continue;
        };
        let href = name_el
            .value()
            .attr("href")
            .or_else(|| name_el.select(&link_sel).next().and_then(|a| a.value().attr("href")));
        let source_id = match href {
            Some(h) if h.starts_with("http") => h.to_string(),
            Some(h) => format!("{}{}", rules.base_url, h),
            None => format!("listing-{i}"),
        };
        let category = cat_sel
            .as_ref()
            .and_then(|s| rec.select(s).next())
            .map(text_of)
            .unwrap_or_else(|| "listing".into());
        out.records.push(AuthorityRecord {
            kind: AuthorityKind::Sociocultural,
            location,
            timestamp,
            category,
            source_id,
            title,
        });
    }
    if out.records.is_empty() && out.unlocated.is_empty() && out.dropped.is_empty() {
        out.warning = Some(ParseWarning::EmptyParse);
    }
    Ok(out)
}
