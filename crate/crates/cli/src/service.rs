//! HTTP service over immutable snapshots of the annotated stream.
//!
//! A replay thread owns all mutable state. Every `window_seconds` it moves
//! the replay clock forward, classifies the tweets that became due, rescores
//! impacts and publishes a fresh [`Snapshot`]. Handlers clone the current
//! snapshot pointer once per request, so a response never mixes two
//! refreshes.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fs::OpenOptions;
use std::io::Write;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Duration, NaiveDate, Utc};
use serde_json::{json, Value};
use urbanpulse_core::pipeline::{annotation_properties, class_histogram, emit_geojson, MAX_WINDOW_MINUTES};
use urbanpulse_core::text::corpus::format_timestamp;
use urbanpulse_core::{Error, EventAnnotation, Pipeline, Result, Tweet, TweetRecord, WindowSnapshot};

pub const DEFAULT_TIMELINE_LIMIT: usize = 20;
pub const MAX_TIMELINE_LIMIT: usize = 500;

/// Everything classified up to `clock`, in tweet-time order.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub clock: DateTime<Utc>,
    pub annotations: Vec<EventAnnotation>,
}

#[derive(Debug)]
pub struct AppState {
    current: RwLock<Arc<Snapshot>>,
    annotations_out: PathBuf,
    append_lock: std::sync::Mutex<()>,
    window_seconds: u64,
}

impl AppState {
    pub fn new(initial: Snapshot, annotations_out: PathBuf, window_seconds: u64) -> Self {
        AppState {
            current: RwLock::new(Arc::new(initial)),
            annotations_out,
            append_lock: std::sync::Mutex::new(()),
            window_seconds,
        }
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.current.read().expect("snapshot lock").clone()
    }

    pub fn publish(&self, next: Snapshot) {
        *self.current.write().expect("snapshot lock") = Arc::new(next);
    }
}

/// Feeds a recorded tweet stream through the pipeline on a moving clock.
pub struct ReplayEngine {
    pipeline: Pipeline,
    pending: VecDeque<Tweet>,
    annotations: Vec<EventAnnotation>,
    clock: DateTime<Utc>,
}

impl ReplayEngine {
    /// The clock starts at `start`, or at the first tweet, or now when the
    /// stream is empty.
    pub fn new(pipeline: Pipeline, mut tweets: Vec<Tweet>, start: Option<DateTime<Utc>>) -> Self {
        tweets.sort_by(|a, b| a.created_at.cmp(&b.created_at).then_with(|| a.id.cmp(&b.id)));
        let clock = start
            .or_else(|| tweets.first().map(|t| t.created_at))
            .unwrap_or_else(Utc::now);
        ReplayEngine {
            pipeline,
            pending: tweets.into(),
            annotations: Vec::new(),
            clock,
        }
    }

    pub fn clock(&self) -> DateTime<Utc> {
        self.clock
    }

    pub fn is_drained(&self) -> bool {
        self.pending.is_empty()
    }

    /// Classifies every pending tweet up to `t` and rescores all impacts.
    pub fn advance_to(&mut self, t: DateTime<Utc>) -> Result<Snapshot> {
        self.clock = self.clock.max(t);
        while self.pending.front().is_some_and(|tw| tw.created_at <= self.clock) {
            let tweet = self.pending.pop_front().expect("checked front");
            self.annotations.push(self.pipeline.annotate(&tweet)?);
        }
        self.pipeline.score(&mut self.annotations)?;
        Ok(Snapshot {
            clock: self.clock,
            annotations: self.annotations.clone(),
        })
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/events", get(events))
        .route("/histogram", get(histogram))
        .route("/timeline", get(timeline))
        .route("/annotations", post(post_annotation))
        .route("/health", get(health))
        .with_state(state)
}

fn bad_request(field: &str, message: impl Into<String>) -> Response {
    (
        StatusCode::BAD_REQUEST,
        Json(json!({"error": message.into(), "field": field})),
    )
        .into_response()
}

// a ready 400 response is the natural error here
#[allow(clippy::result_large_err)]
fn int_param<T: std::str::FromStr + PartialOrd + Copy>(
    q: &HashMap<String, String>,
    name: &str,
    default: T,
    lo: T,
    hi: T,
) -> std::result::Result<T, Response> {
    let Some(raw) = q.get(name) else {
        return Ok(default);
    };
    match raw.trim().parse::<T>() {
        Ok(v) if v >= lo && v <= hi => Ok(v),
        _ => Err(bad_request(
            name,
            format!("{name} must be an integer in the allowed range, got {raw:?}"),
        )),
    }
}

async fn events(State(st): State<Arc<AppState>>, Query(q): Query<HashMap<String, String>>) -> Response {
    let minutes = match int_param(&q, "minutes", MAX_WINDOW_MINUTES, 1, MAX_WINDOW_MINUTES) {
        Ok(m) => m,
        Err(r) => return r,
    };
    let snap = st.snapshot();
    match WindowSnapshot::build(&snap.annotations, snap.clock, Duration::minutes(minutes)) {
        Ok(w) => (
            [(header::CONTENT_TYPE, "application/geo+json")],
            emit_geojson(&w).to_string(),
        )
            .into_response(),
        Err(e) => bad_request("minutes", e.to_string()),
    }
}

fn counts_json(h: &BTreeMap<urbanpulse_core::EventClass, usize>) -> Value {
    Value::Object(h.iter().map(|(c, n)| (c.name().to_string(), json!(n))).collect())
}

/// Daily class counts for `date` (UTC, default: the replay clock's day), or
/// counts over the trailing `minutes` window matching `/events`.
async fn histogram(State(st): State<Arc<AppState>>, Query(q): Query<HashMap<String, String>>) -> Response {
    let snap = st.snapshot();
    if q.contains_key("minutes") {
        if q.contains_key("date") {
            return bad_request("date", "give either date or minutes, not both");
        }
        let minutes = match int_param(&q, "minutes", MAX_WINDOW_MINUTES, 1, MAX_WINDOW_MINUTES) {
            Ok(m) => m,
            Err(r) => return r,
        };
        let w = match WindowSnapshot::build(&snap.annotations, snap.clock, Duration::minutes(minutes)) {
            Ok(w) => w,
            Err(e) => return bad_request("minutes", e.to_string()),
        };
        return Json(json!({
            "window_start": format_timestamp(&w.window_start),
            "window_end": format_timestamp(&w.window_end),
            "counts": counts_json(&w.class_histogram),
            "annotations": w.annotations.len(),
        }))
        .into_response();
    }
    let date = match q.get("date") {
        None => snap.clock.date_naive(),
        Some(d) => match NaiveDate::parse_from_str(d.trim(), "%Y-%m-%d") {
            Ok(d) => d,
            Err(_) => return bad_request("date", format!("expected YYYY-MM-DD, got {d:?}")),
        },
    };
    let day: Vec<&EventAnnotation> = snap
        .annotations
        .iter()
        .filter(|a| a.tweet_time.date_naive() == date)
        .collect();
    Json(json!({
        "date": date.format("%Y-%m-%d").to_string(),
        "counts": counts_json(&class_histogram(day.iter().copied())),
        "annotations": day.len(),
    }))
    .into_response()
}

async fn timeline(State(st): State<Arc<AppState>>, Query(q): Query<HashMap<String, String>>) -> Response {
    let limit = match int_param(&q, "limit", DEFAULT_TIMELINE_LIMIT, 1, MAX_TIMELINE_LIMIT) {
        Ok(l) => l,
        Err(r) => return r,
    };
    let snap = st.snapshot();
    let items: Vec<Value> = snap
        .annotations
        .iter()
        .rev()
        .take(limit)
        .map(annotation_properties)
        .collect();
    Json(json!({"clock": format_timestamp(&snap.clock), "items": items})).into_response()
}

/// Field named in a serde error such as "missing field `text`".
fn serde_field(msg: &str) -> String {
    msg.split('`').nth(1).unwrap_or("body").to_string()
}

async fn post_annotation(State(st): State<Arc<AppState>>, body: Bytes) -> Response {
    let record: TweetRecord = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => {
            let msg = e.to_string();
            return bad_request(&serde_field(&msg), msg);
        }
    };
    let annotated = match record.to_annotated() {
        Ok(a) => a,
        Err(Error::Invalid { field, message }) => return bad_request(&field, message),
        Err(e) => return bad_request("body", e.to_string()),
    };
    let stored = TweetRecord::from_annotated(&annotated);
    let line = match serde_json::to_string(&stored) {
        Ok(l) => l,
        Err(e) => return (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
    };
    if let Err(e) = append_line(&st, &line) {
        return (StatusCode::INTERNAL_SERVER_ERROR, Json(json!({"error": e.to_string()}))).into_response();
    }
    (StatusCode::CREATED, Json(stored)).into_response()
}

fn append_line(st: &AppState, line: &str) -> std::io::Result<()> {
    let _guard = st.append_lock.lock().expect("append lock");
    if let Some(dir) = st.annotations_out.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut f = OpenOptions::new().create(true).append(true).open(&st.annotations_out)?;
    writeln!(f, "{line}")
}

async fn health(State(st): State<Arc<AppState>>) -> Json<Value> {
    let snap = st.snapshot();
    Json(json!({
        "status": "ok",
        "clock": format_timestamp(&snap.clock),
        "annotations": snap.annotations.len(),
        "window_seconds": st.window_seconds,
    }))
}

/// Advances the replay clock by `step_seconds` every `window_seconds` on a
/// background thread and publishes each result. Stops on the first error.
pub fn spawn_replay(
    mut engine: ReplayEngine,
    state: Arc<AppState>,
    window_seconds: u64,
    step_seconds: i64,
) -> std::thread::JoinHandle<()> {
    std::thread::spawn(move || loop {
        std::thread::sleep(std::time::Duration::from_secs(window_seconds));
        let next = engine.clock() + Duration::seconds(step_seconds);
        match engine.advance_to(next) {
            Ok(snap) => state.publish(snap),
            Err(e) => {
                eprintln!("replay stopped: {e}");
                break;
            }
        }
    })
}
