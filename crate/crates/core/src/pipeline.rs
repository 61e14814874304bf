//! End-to-end orchestration: configuration, tweet annotation with impact
//! scoring, trailing-window snapshots and their GeoJSON form.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::cnn::{CnnModel, CnnTrainConfig};
use crate::crf::{CrfModel, CrfTrainConfig};
use crate::error::{Error, Result};
use crate::fusion::{classify, FusionModel, FusionTrainConfig};
use crate::geo::{CityFrame, CityFrameConfig, CoordOrder};
use crate::impact::{score_impacts, EventAnnotation, Gazetteer, DEFAULT_CELL_SIZE_DEG};
use crate::ingest::{DisruptionMapping, ParserRules, StreamConfig};
use crate::similarity::LocatedEvent;
use crate::text::corpus::format_timestamp;
use crate::text::{load_dictionaries, DictionarySet, EventClass, Tweet};

pub const CONFIG_ENV: &str = "URBANPULSE_CONFIG";
/// Longest trailing window the service will serve.
pub const MAX_WINDOW_MINUTES: i64 = 60;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelPaths {
    pub crf: PathBuf,
    pub cnn: PathBuf,
    pub fusion: PathBuf,
}

impl Default for ModelPaths {
    fn default() -> Self {
        ModelPaths {
            crf: "models/crf.json".into(),
            cnn: "models/cnn.json".into(),
            fusion: "models/fusion.json".into(),
        }
    }
}

/// Training corpora, each optional until the matching command needs it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusPaths {
    /// Annotated JSON Lines with token tags.
    pub crf: Option<PathBuf>,
    /// Part-of-speech JSON Lines.
    pub cnn: Option<PathBuf>,
    /// Annotated JSON Lines; labels are required, tags are not.
    pub fusion: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub bind: String,
    /// Tweet stream replayed by the service.
    pub replay: Option<PathBuf>,
    /// Append-only ground-truth file written by `POST /annotations`.
    pub annotations_out: PathBuf,
    /// Replay-clock seconds advanced per refresh.
    pub replay_step_seconds: i64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind: "127.0.0.1:8080".into(),
            replay: None,
            annotations_out: "data/ground_truth.jsonl".into(),
            replay_step_seconds: 60,
        }
    }
}

fn london_config() -> CityFrameConfig {
    let f = CityFrame::london();
    CityFrameConfig {
        centre: [f.centre.lat, f.centre.lon],
        bbox_sw: [f.bbox_sw.lat, f.bbox_sw.lon],
        bbox_ne: [f.bbox_ne.lat, f.bbox_ne.lon],
        order: CoordOrder::LatLon,
    }
}

/// The single JSON configuration document. Relative paths are resolved
/// against the directory of the file they were read from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub dictionaries: PathBuf,
    pub gazetteer: PathBuf,
    pub models: ModelPaths,
    pub corpora: CorpusPaths,
    pub city: CityFrameConfig,
    pub delta_t_seconds: i64,
    pub grid_cell_deg: f64,
    pub tau: f64,
    pub window_seconds: u64,
    pub seed: u64,
    pub crf_train: CrfTrainConfig,
    pub cnn_train: CnnTrainConfig,
    pub fusion_train: FusionTrainConfig,
    pub stream: StreamConfig,
    pub disruptions: DisruptionMapping,
    pub listings: ParserRules,
    pub service: ServiceConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            dictionaries: "dictionaries".into(),
            gazetteer: "gazetteer.csv".into(),
            models: ModelPaths::default(),
            corpora: CorpusPaths::default(),
            city: london_config(),
            delta_t_seconds: 300,
            grid_cell_deg: DEFAULT_CELL_SIZE_DEG,
            tau: crate::fusion::DEFAULT_TAU,
            window_seconds: 60,
            seed: 0,
            crf_train: CrfTrainConfig::default(),
            cnn_train: CnnTrainConfig::default(),
            fusion_train: FusionTrainConfig::default(),
            stream: StreamConfig::default(),
            disruptions: DisruptionMapping::default(),
            listings: ParserRules::default(),
            service: ServiceConfig::default(),
        }
    }
}

fn rebase(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl PipelineConfig {
    /// Parses, resolves paths against `base` and validates.
    pub fn from_json(body: &str, base: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig = serde_json::from_str(body).map_err(|e| Error::Config(format!("config: {e}")))?;
        for p in [
            &mut cfg.dictionaries,
            &mut cfg.gazetteer,
            &mut cfg.models.crf,
            &mut cfg.models.cnn,
            &mut cfg.models.fusion,
            &mut cfg.service.annotations_out,
        ] {
            rebase(base, p);
        }
        for p in [
            &mut cfg.corpora.crf,
            &mut cfg.corpora.cnn,
            &mut cfg.corpora.fusion,
            &mut cfg.service.replay,
        ]
        .into_iter()
        .flatten()
        {
            rebase(base, p);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads `path`, or the file named by `URBANPULSE_CONFIG` when `path` is
    /// `None`.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let path = match path {
            Some(p) => p.to_path_buf(),
            None => std::env::var_os(CONFIG_ENV)
                .map(PathBuf::from)
                .ok_or_else(|| Error::Config(format!("no --config given and {CONFIG_ENV} is unset")))?,
        };
        let body = std::fs::read_to_string(&path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_json(&body, base)
    }

    /// Checks value ranges and that the dictionary directory and gazetteer
    /// exist. Model files are checked when they are loaded, since training
    /// commands create them.
    pub fn validate(&self) -> Result<()> {
        if self.delta_t_seconds <= 0 {
            return Err(Error::Config("delta_t_seconds must be positive".into()));
        }
        if self.window_seconds == 0 {
            return Err(Error::Config("window_seconds must be positive".into()));
        }
        if !(self.grid_cell_deg > 0.0 && self.grid_cell_deg.is_finite()) {
            return Err(Error::Config("grid_cell_deg must be positive".into()));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::Config(format!("tau {} outside (0, 1)", self.tau)));
        }
        self.city.to_frame().map_err(|e| Error::Config(e.to_string()))?;
        self.stream.validate()?;
        if !self.dictionaries.is_dir() {
            return Err(Error::Config(format!(
                "dictionaries: {} is not a directory",
                self.dictionaries.display()
            )));
        }
        if !self.gazetteer.is_file() {
            return Err(Error::Config(format!(
                "gazetteer: {} does not exist",
                self.gazetteer.display()
            )));
        }
        Ok(())
    }

    pub fn frame(&self) -> Result<CityFrame> {
        self.city.to_frame()
    }

    pub fn delta_t(&self) -> Duration {
        Duration::seconds(self.delta_t_seconds)
    }

    pub fn load_dictionaries(&self) -> Result<DictionarySet> {
        load_dictionaries(&self.dictionaries)
    }

    pub fn load_gazetteer(&self) -> Result<Gazetteer> {
        Gazetteer::load(&self.gazetteer)
    }
}

/// Trained models plus everything needed to turn tweets into scored
/// annotations.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub crf: CrfModel,
    pub cnn: CnnModel,
    pub fusion: FusionModel,
    pub gazetteer: Gazetteer,
    pub frame: CityFrame,
    pub delta_t: Duration,
    pub cell_size_deg: f64,
}

impl Pipeline {
    pub fn from_config(cfg: &PipelineConfig) -> Result<Self> {
        let mut fusion = FusionModel::load(&cfg.models.fusion)?;
        fusion.tau = cfg.tau;
        Ok(Pipeline {
            crf: CrfModel::load(&cfg.models.crf)?,
            cnn: CnnModel::load(&cfg.models.cnn)?,
            fusion,
            gazetteer: cfg.load_gazetteer()?,
            frame: cfg.frame()?,
            delta_t: cfg.delta_t(),
            cell_size_deg: cfg.grid_cell_deg,
        })
    }

    /// Classifies one tweet and resolves its location; impact stays empty.
    /// The first Location span found in the gazetteer supplies the event
    /// location; failing that, the first Location span's text is kept.
    pub fn annotate(&self, tweet: &Tweet) -> Result<EventAnnotation> {
        let c = classify(&self.crf, &self.cnn, &self.fusion, &tweet.text)?;
        let spans: Vec<String> = c.tagged.location_spans().map(|s| c.tagged.span_text(s)).collect();
        let resolved = spans.iter().find_map(|s| self.gazetteer.lookup_within(s));
        let (location_text, event_location) = match resolved {
            Some((s, p)) => (Some(s), Some(p)),
            None => (spans.first().cloned(), None),
        };
        Ok(EventAnnotation {
            id: tweet.id.clone(),
            text: tweet.text.clone(),
            event_types: c.labels,
            event_location,
            location_text,
            tweet_geo: tweet.geo,
            tweet_time: tweet.created_at,
            severity: None,
            likelihood: None,
            impact: None,
        })
    }

    /// Annotates every tweet, then scores impacts over the whole batch.
    pub fn annotate_all(&self, tweets: &[Tweet]) -> Result<Vec<EventAnnotation>> {
        let mut out = tweets.iter().map(|t| self.annotate(t)).collect::<Result<Vec<_>>>()?;
        self.score(&mut out)?;
        Ok(out)
    }

    pub fn score(&self, annotations: &mut [EventAnnotation]) -> Result<()> {
        score_impacts(annotations, &self.frame, self.cell_size_deg, self.delta_t)
    }
}

/// Located annotations carrying at least one event label, in the form the
/// similarity analysis consumes. Other labels are dropped.
pub fn located_events(annotations: &[EventAnnotation]) -> Vec<LocatedEvent> {
    annotations
        .iter()
        .filter_map(|a| {
            let classes: BTreeSet<EventClass> = a
                .event_types
                .iter()
                .copied()
                .filter(|c| c.event_index().is_some())
                .collect();
            let location = a.resolved_location()?;
            (!classes.is_empty()).then_some(LocatedEvent {
                classes,
                location,
                time: a.tweet_time,
            })
        })
        .collect()
}

/// Label counts, one per label of each annotation.
pub fn class_histogram<'a>(annotations: impl IntoIterator<Item = &'a EventAnnotation>) -> BTreeMap<EventClass, usize> {
    let mut h: BTreeMap<EventClass, usize> = EventClass::ALL
        .iter()
        .filter(|c| **c != EventClass::Location)
        .map(|c| (*c, 0))
        .collect();
    for a in annotations {
        for c in &a.event_types {
            *h.entry(*c).or_insert(0) += 1;
        }
    }
    h
}

/// Annotations whose tweet time falls in `(window_end - length, window_end]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowSnapshot {
    pub window_start: DateTime<Utc>,
    pub window_end: DateTime<Utc>,
    pub annotations: Vec<EventAnnotation>,
    pub class_histogram: BTreeMap<EventClass, usize>,
}

impl WindowSnapshot {
    pub fn build(all: &[EventAnnotation], window_end: DateTime<Utc>, length: Duration) -> Result<Self> {
        if length <= Duration::zero() || length > Duration::minutes(MAX_WINDOW_MINUTES) {
            return Err(Error::invalid(
                "minutes",
                format!("window must be 1..={MAX_WINDOW_MINUTES} minutes"),
            ));
        }
        let window_start = window_end - length;
        let annotations: Vec<EventAnnotation> = all
            .iter()
            .filter(|a| a.tweet_time > window_start && a.tweet_time <= window_end)
            .cloned()
            .collect();
        let class_histogram = class_histogram(&annotations);
        Ok(WindowSnapshot {
            window_start,
            window_end,
            annotations,
            class_histogram,
        })
    }
}

/// Replaces the name after every `@` that starts a mention with `▮`.
pub fn mask_mentions(text: &str) -> String {
    let is_word = |c: char| c.is_alphanumeric() || c == '_';
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars().peekable();
    let mut prev: Option<char> = None;
    while let Some(c) = chars.next() {
        let starts_mention = c == '@' && !prev.is_some_and(is_word) && chars.peek().is_some_and(|&n| is_word(n));
        out.push(c);
        prev = Some(c);
        if starts_mention {
            out.push('▮');
            while chars.peek().is_some_and(|&n| is_word(n)) {
                prev = chars.next();
            }
        }
    }
    out
}

/// Properties shared by GeoJSON features, the sidecar and the timeline.
pub fn annotation_properties(a: &EventAnnotation) -> Value {
    json!({
        "id": a.id,
        "classes": a.event_types,
        "impact": a.impact,
        "severity": a.severity,
        "likelihood": a.likelihood,
        "time": format_timestamp(&a.tweet_time),
        "text": mask_mentions(&a.text),
        "location_text": a.location_text,
    })
}

/// One Point feature per located annotation; unlocated annotations go to
/// the `unlocated` sidecar array. Coordinates are `[lon, lat]`.
pub fn emit_geojson(snapshot: &WindowSnapshot) -> Value {
    let mut features = Vec::new();
    let mut unlocated = Vec::new();
    for a in &snapshot.annotations {
        match a.resolved_location() {
            Some(p) => features.push(json!({
                "type": "Feature",
                "id": a.id,
                "geometry": {"type": "Point", "coordinates": [p.lon, p.lat]},
                "properties": annotation_properties(a),
            })),
            None => unlocated.push(annotation_properties(a)),
        }
    }
    json!({
        "type": "FeatureCollection",
        "window_start": format_timestamp(&snapshot.window_start),
        "window_end": format_timestamp(&snapshot.window_end),
        "features": features,
        "unlocated": unlocated,
    })
}

/// Flat CSV export of annotations, one row per annotation with labels
/// joined by `|`.
pub fn annotations_csv(annotations: &[EventAnnotation]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "id",
        "time",
        "classes",
        "lat",
        "lon",
        "location_text",
        "severity",
        "likelihood",
        "impact",
        "text",
    ])?;
    let opt = |x: Option<String>| x.unwrap_or_default();
    for a in annotations {
        let p = a.resolved_location();
        let classes: Vec<&str> = a.event_types.iter().map(|c| c.name()).collect();
        w.write_record([
            a.id.clone(),
            format_timestamp(&a.tweet_time),
            classes.join("|"),
            opt(p.map(|p| p.lat.to_string())),
            opt(p.map(|p| p.lon.to_string())),
            opt(a.location_text.clone()),
            opt(a.severity.map(|s| s.to_string())),
            opt(a.likelihood.map(|l| l.to_string())),
            opt(a.impact.map(|i| i.to_string())),
            a.text.clone(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}
