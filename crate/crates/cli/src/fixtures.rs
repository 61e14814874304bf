//! Writes the synthetic fixture tree used by the tests, the benches and the
//! README walkthrough, and optionally trains its three models.

use std::fs;
use std::path::Path;

use chrono::{Duration, TimeZone, Utc};
use serde_json::json;
use urbanpulse_core::cnn::{self, corpus::write_pos_corpus};
use urbanpulse_core::crf::{self, FeatureExtractor, TaggedSentence};
use urbanpulse_core::fusion::{self, FusionModel};
use urbanpulse_core::synth::{self, TweetStreamConfig};
use urbanpulse_core::text::corpus::{format_timestamp, write_jsonl};
use urbanpulse_core::{AnnotatedTweet, Error, EventClass, PipelineConfig, Result, TweetRecord};

pub const REPLAY_TWEETS: usize = 200;
const CRF_REPORTS: usize = 300;
const CRF_TWEETS: usize = 300;
const FUSION_TWEETS: usize = 600;
const POS_SENTENCES: usize = 400;

fn write(path: &Path, body: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::File {
            path: dir.into(),
            source: e,
        })?;
    }
    fs::write(path, body).map_err(|e| Error::File {
        path: path.into(),
        source: e,
    })
}

fn records(tweets: &[AnnotatedTweet], keep_tags: bool) -> Vec<TweetRecord> {
    tweets
        .iter()
        .map(|a| {
            let mut r = TweetRecord::from_annotated(a);
            if !keep_tags {
                r.tags = None;
            }
            r
        })
        .collect()
}

fn jsonl(records: &[TweetRecord]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_jsonl(&mut buf, records)?;
    Ok(buf)
}

/// Road disruptions near the replay's transport tweets, most of them
/// reported after the tweet, plus one object without coordinates.
fn disruptions_payload(replay: &[AnnotatedTweet]) -> String {
    let mut items = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for (i, a) in replay.iter().enumerate() {
        if !a.labels.contains(&EventClass::Transportation) {
            continue;
        }
        let Some(geo) = a.tweet.geo else { continue };
        let key = ((geo.lat * 100.0).round() as i64, (geo.lon * 100.0).round() as i64);
        if !seen.insert(key) {
            continue;
        }
        let lag = if i % 4 == 0 { -15 } else { 20 + (i as i64 % 7) * 10 };
        items.push(json!({
            "id": format!("TIMS-{:05}", 10_000 + i),
            "category": if i % 3 == 0 { "Collisions" } else { "Works" },
            "location": format!("near tweet {}", a.tweet.id),
            "point": format!("[{:.4},{:.4}]", geo.lon + 0.0004, geo.lat - 0.0003),
            "startDateTime": format_timestamp(&(a.tweet.created_at + Duration::minutes(lag))),
        }));
    }
    items.push(json!({
        "id": "TIMS-99999",
        "category": "Works",
        "location": "Strand",
        "startDateTime": "2016-02-03T09:00:00Z",
    }));
    serde_json::to_string_pretty(&items).expect("json values serialize")
}

/// Five listings in London wall-clock time; the last venue is not in the
/// gazetteer.
const LISTINGS_HTML: &str = r#"<!DOCTYPE html>
<html lang="en">
<head><meta charset="utf-8"><title>What's on</title></head>
<body>
<section id="listings">
  <article class="listing">
    <a class="listing-title" href="/events/jazz-at-the-barbican">Late jazz session</a>
    <span class="venue">Barbican</span>
    <time datetime="2016-02-03T19:30">Wed 3 Feb, 7.30pm</time>
    <span class="category">Music</span>
  </article>
  <article class="listing">
    <a class="listing-title" href="/events/covent-garden-opera">Opera in the piazza</a>
    <span class="venue">Covent Garden</span>
    <time datetime="2016-02-03T18:00">Wed 3 Feb, 6pm</time>
    <span class="category">Opera</span>
  </article>
  <article class="listing">
    <a class="listing-title" href="/events/soho-comedy">Comedy night</a>
    <span class="venue">Soho</span>
    <time datetime="2016-02-03T21:00">Wed 3 Feb, 9pm</time>
    <span class="category">Comedy</span>
  </article>
  <article class="listing">
    <a class="listing-title" href="/events/greenwich-market">Food market</a>
    <span class="venue">Greenwich</span>
    <time datetime="2016-02-03T10:00">Wed 3 Feb, 10am</time>
    <span class="category">Food</span>
  </article>
  <article class="listing">
    <a class="listing-title" href="/events/warehouse-rave">Warehouse party</a>
    <span class="venue">The Unmarked Warehouse</span>
    <time datetime="2016-02-03T23:00">Wed 3 Feb, 11pm</time>
    <span class="category">Club</span>
  </article>
</section>
</body>
</html>
"#;

fn config_json() -> String {
    let cfg = json!({
        "dictionaries": "dictionaries",
        "gazetteer": "gazetteer.csv",
        "models": {"crf": "models/crf.json", "cnn": "models/cnn.json", "fusion": "models/fusion.json"},
        "corpora": {
            "crf": "corpora/crf_train.jsonl",
            "cnn": "corpora/pos_train.jsonl",
            "fusion": "corpora/fusion_train.jsonl"
        },
        "city": {"centre": [51.5077, -0.128], "bbox_sw": [51.2868, -0.5103], "bbox_ne": [51.6923, 0.334], "order": "lat_lon"},
        "delta_t_seconds": 300,
        "grid_cell_deg": 0.01,
        "tau": 0.3,
        "window_seconds": 60,
        "seed": 7,
        "crf_train": {"l2_lambda": 0.01, "learning_rate": 1.0, "epochs": 150, "seed": 7, "tolerance": 1e-9},
        "cnn_train": {"dim": 16, "window": 5, "hidden": 32, "learning_rate": 0.05, "epochs": 30, "batch_size": 8, "seed": 7},
        "fusion_train": {"learning_rate": 0.5, "epochs": 200, "seed": 7, "other_subsample_ratio": 1.0, "tau": 0.3, "l2_lambda": 0.0, "calibrate_other": true},
        "stream": {"follow": [], "track": [], "locations": []},
        "disruptions": {
            "id_path": "id", "point_path": "point", "point_order": "lon_lat",
            "time_path": "startDateTime", "category_path": "category", "title_path": "location"
        },
        "listings": {
            "record_selector": "article.listing", "name_selector": ".listing-title", "venue_selector": ".venue",
            "date_selector": "time", "category_selector": ".category",
            "base_url": "https://listings.example.org", "timezone": "Europe/London"
        },
        "service": {
            "bind": "127.0.0.1:8080",
            "replay": "tweets.jsonl",
            "annotations_out": "../data/ground_truth.jsonl",
            "replay_step_seconds": 60
        }
    });
    serde_json::to_string_pretty(&cfg).expect("json values serialize") + "\n"
}

const PROVENANCE: &str = "# Fixtures

Everything in this directory is synthetic and regenerated by

    urbanpulse gen-fixtures --out-dir fixtures --seed 7

No real tweets, user ids or authority feeds are included.

| Path | Contents |
| --- | --- |
| `dictionaries/*.txt` | One phrase per line for each span class, hand-written for this project. |
| `gazetteer.csv` | Approximate coordinates of London districts and four fictional venues. |
| `corpora/crf_train.jsonl` | Templated incident reports and tweets with gold BIO tags. |
| `corpora/pos_train.jsonl` | Sentences from a small templated grammar with gold part-of-speech and LOC/ORG tags. |
| `corpora/fusion_train.jsonl` | Labelled templated tweets for the fusion classifier. |
| `tweets.jsonl` | The 200-tweet replay stream, with its generating labels. |
| `authority/disruptions.json` | Road disruptions in the transport operator's feed shape, placed near the replay's transport tweets. One object lacks coordinates on purpose. |
| `authority/listings.html` | Five event listings; the last venue is deliberately missing from the gazetteer. |
| `config.json` | Pipeline configuration wired to the files above. |
| `models/*.json` | Models trained from the corpora above with the seeds in `config.json`. |

The disruption ids, listing URLs and venue names are invented.
";

/// Writes the fixture tree under `dir`. With `train`, also trains the CRF,
/// windowed tagger and fusion models in that order.
pub fn generate(dir: &Path, seed: u64, train: bool) -> Result<()> {
    for class in EventClass::SPAN {
        write(
            &dir.join("dictionaries")
                .join(format!("{}.txt", class.name().to_lowercase())),
            synth::dictionary_file(class),
        )?;
    }
    write(&dir.join("gazetteer.csv"), synth::gazetteer_csv())?;

    let start = Utc.with_ymd_and_hms(2016, 2, 3, 8, 0, 0).unwrap();
    let stream = |n, s| {
        synth::annotated_tweets(&TweetStreamConfig {
            n,
            seed: s,
            start: start - Duration::days(30),
            ..Default::default()
        })
    };
    let mut crf_set = synth::annotated_reports(CRF_REPORTS, seed, start - Duration::days(60))?;
    crf_set.extend(stream(CRF_TWEETS, seed + 1)?);
    write(&dir.join("corpora/crf_train.jsonl"), jsonl(&records(&crf_set, true))?)?;
    let fusion_set = stream(FUSION_TWEETS, seed + 2)?;
    write(
        &dir.join("corpora/fusion_train.jsonl"),
        jsonl(&records(&fusion_set, true))?,
    )?;
    let pos = synth::pos_corpus(POS_SENTENCES, seed + 3)?;
    let mut buf = Vec::new();
    write_pos_corpus(&mut buf, &pos)?;
    write(&dir.join("corpora/pos_train.jsonl"), buf)?;

    let replay = synth::annotated_tweets(&TweetStreamConfig {
        n: REPLAY_TWEETS,
        seed: seed + 4,
        start,
        ..Default::default()
    })?;
    write(&dir.join("tweets.jsonl"), jsonl(&records(&replay, false))?)?;
    write(
        &dir.join("authority/disruptions.json"),
        disruptions_payload(&replay) + "\n",
    )?;
    write(&dir.join("authority/listings.html"), LISTINGS_HTML)?;
    write(&dir.join("config.json"), config_json())?;
    write(&dir.join("README.md"), PROVENANCE)?;

    if train {
        let cfg = PipelineConfig::load(Some(&dir.join("config.json")))?;
        let models = dir.join("models");
        fs::create_dir_all(&models).map_err(|e| Error::File {
            path: models,
            source: e,
        })?;
        train_models(&cfg, &crf_set, &pos, &fusion_set)?;
    }
    Ok(())
}

/// Trains and saves all three models to the paths named in `cfg`.
pub fn train_models(
    cfg: &PipelineConfig,
    crf_set: &[AnnotatedTweet],
    pos: &[cnn::PosSentence],
    fusion_set: &[AnnotatedTweet],
) -> Result<()> {
    let sentences = crf_set
        .iter()
        .map(TaggedSentence::from_annotated)
        .collect::<Result<Vec<_>>>()?;
    let crf = crf::train(
        &sentences,
        FeatureExtractor::new(cfg.load_dictionaries()?),
        &cfg.crf_train,
    )?;
    crf.save(&cfg.models.crf)?;
    let cnn = cnn::train(pos, &cfg.cnn_train)?;
    cnn.save(&cfg.models.cnn)?;
    let items = fusion_set
        .iter()
        .map(|a| fusion::fusion_item(&crf, &cnn, &a.tweet.text, a.labels.clone()))
        .collect::<Result<Vec<_>>>()?;
    let mut fc = cfg.fusion_train.clone();
    fc.tau = cfg.tau;
    let (model, _) = fusion::train_model(FusionModel::for_views(), &items, &fc)?;
    model.save(&cfg.models.fusion)
}
