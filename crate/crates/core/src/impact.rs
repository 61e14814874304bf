//! Event impact: severity from spatio-temporal thematic coherence, likelihood
//! from geodesic distance to the city centre, and their product.

use std::collections::{BTreeSet, HashMap};
use std::io::Read;
use std::path::Path;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{vincenty, CityFrame, GeoPoint};
use crate::text::{tokenize_words, EventClass};

pub const DEFAULT_CELL_SIZE_DEG: f64 = 0.01;

pub fn default_delta_t() -> Duration {
    Duration::minutes(5)
}

/// One extracted event: what happened, where and when, and how much it
/// matters. Severity, likelihood and impact stay empty until
/// [`score_impacts`] runs, and stay empty for annotations without a location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventAnnotation {
    pub id: String,
    pub text: String,
    pub event_types: BTreeSet<EventClass>,
    /// Coordinates resolved from an extracted Location span.
    #[serde(default)]
    pub event_location: Option<GeoPoint>,
    /// Surface text of the first Location span, resolved or not.
    #[serde(default)]
    pub location_text: Option<String>,
    #[serde(default)]
    pub tweet_geo: Option<GeoPoint>,
    pub tweet_time: DateTime<Utc>,
    #[serde(default)]
    pub severity: Option<u32>,
    #[serde(default)]
    pub likelihood: Option<f64>,
    #[serde(default)]
    pub impact: Option<f64>,
}

impl EventAnnotation {
    /// Extracted location when available, otherwise the tweet geotag.
    pub fn resolved_location(&self) -> Option<GeoPoint> {
        self.event_location.or(self.tweet_geo)
    }
}

pub fn impact(severity: u32, likelihood: f64) -> f64 {
    severity as f64 * likelihood
}

/// `1 - d(location, centre) / d(bbox_sw, bbox_ne)` by Vincenty, clamped to `[0, 1]`.
pub fn likelihood(frame: &CityFrame, location: GeoPoint) -> f64 {
    let d = vincenty(location, frame.centre).meters;
    (1.0 - d / frame.diagonal_m()).clamp(0.0, 1.0)
}

type CellKey = (i64, i64, EventClass);

/// Annotations bucketed by grid cell and event class.
#[derive(Debug, Clone)]
pub struct GridIndex {
    pub cell_size_deg: f64,
    cells: HashMap<CellKey, Vec<(usize, DateTime<Utc>)>>,
}

impl GridIndex {
    pub fn new(cell_size_deg: f64) -> Result<Self> {
        if !(cell_size_deg > 0.0 && cell_size_deg.is_finite()) {
            return Err(Error::Config(format!(
                "grid cell size must be positive, got {cell_size_deg}"
            )));
        }
        Ok(GridIndex {
            cell_size_deg,
            cells: HashMap::new(),
        })
    }

    pub fn cell(&self, p: GeoPoint) -> (i64, i64) {
        (
            (p.lon / self.cell_size_deg).floor() as i64,
            (p.lat / self.cell_size_deg).floor() as i64,
        )
    }

    /// Indexes `a` under `id`. Unlocated annotations are ignored.
    pub fn insert(&mut self, id: usize, a: &EventAnnotation) {
        let Some(p) = a.resolved_location() else {
            return;
        };
        let (cx, cy) = self.cell(p);
        for &c in &a.event_types {
            self.cells.entry((cx, cy, c)).or_default().push((id, a.tweet_time));
        }
    }

    pub fn build(annotations: &[EventAnnotation], cell_size_deg: f64) -> Result<Self> {
        let mut idx = Self::new(cell_size_deg)?;
        for (i, a) in annotations.iter().enumerate() {
            idx.insert(i, a);
        }
        Ok(idx)
    }

    /// Number of distinct indexed annotations in `a`'s cell that share an
    /// event class with it and lie within `delta_t` of it. An indexed `a`
    /// counts itself, so the result is at least 1.
    pub fn severity(&self, a: &EventAnnotation, delta_t: Duration) -> Result<u32> {
        let p = a.resolved_location().ok_or(Error::LocationUnresolved)?;
        let (cx, cy) = self.cell(p);
        let mut members = BTreeSet::new();
        for &c in &a.event_types {
            if let Some(bucket) = self.cells.get(&(cx, cy, c)) {
                for &(id, t) in bucket {
                    if (t - a.tweet_time).abs() <= delta_t {
                        members.insert(id);
                    }
                }
            }
        }
        Ok((members.len() as u32).max(1))
    }
}

/// Fills severity, likelihood and impact on every located annotation that
/// carries an event label. Other-only annotations are not events and stay
/// unscored.
pub fn score_impacts(
    annotations: &mut [EventAnnotation],
    frame: &CityFrame,
    cell_size_deg: f64,
    delta_t: Duration,
) -> Result<()> {
    let index = GridIndex::build(annotations, cell_size_deg)?;
    for a in annotations.iter_mut() {
        if !a.event_types.iter().any(|c| c.event_index().is_some()) {
            a.severity = None;
            a.likelihood = None;
            a.impact = None;
            continue;
        }
        match index.severity(a, delta_t) {
            Ok(s) => {
                let l = likelihood(frame, a.resolved_location().expect("located"));
                a.severity = Some(s);
                a.likelihood = Some(l);
                a.impact = Some(impact(s, l));
            }
            Err(Error::LocationUnresolved) => {
                a.severity = None;
                a.likelihood = None;
                a.impact = None;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(())
}

/// Place-name lookup: lowercase, whitespace-normalised names to coordinates.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gazetteer {
    entries: HashMap<String, GeoPoint>,
}

#[derive(Deserialize)]
struct GazetteerRow {
    name: String,
    lat: f64,
    lon: f64,
}

fn normalize_name(name: &str) -> String {
    tokenize_words(name)
        .map(|w| w.join(" "))
        .unwrap_or_else(|_| name.trim().to_lowercase())
}

impl Gazetteer {
    pub fn from_reader(r: impl Read) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut entries = HashMap::new();
        for row in rdr.deserialize::<GazetteerRow>() {
            let row = row?;
            let p = GeoPoint::new(row.lat, row.lon)
                .map_err(|e| Error::invalid("gazetteer", format!("{}: {e}", row.name)))?;
            entries.insert(normalize_name(&row.name), p);
        }
        Ok(Gazetteer { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
        Self::from_reader(f)
    }

    pub fn insert(&mut self, name: &str, p: GeoPoint) {
        self.entries.insert(normalize_name(name), p);
    }

    pub fn lookup(&self, name: &str) -> Option<GeoPoint> {
        self.entries.get(&normalize_name(name)).copied()
    }

    /// Resolves `span` itself, or failing that the longest run of its
    /// words that names a gazetteer entry (leftmost on ties). Tagger spans
    /// often pick up a neighbouring word, as in "kensington again".
    pub fn lookup_within(&self, span: &str) -> Option<(String, GeoPoint)> {
        let words: Vec<&str> = span.split_whitespace().collect();
        for len in (1..=words.len()).rev() {
            for w in words.windows(len) {
                let name = w.join(" ");
                if let Some(p) = self.lookup(&name) {
                    return Some((name, p));
                }
            }
        }
        None
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
