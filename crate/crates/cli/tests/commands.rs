//! The `urbanpulse` binary against the shipped fixtures.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use urbanpulse_core::ingest::parse_disruptions;
use urbanpulse_core::pipeline::located_events;
use urbanpulse_core::similarity::{build_graph, similarity_report};
use urbanpulse_core::{EventAnnotation, EventClass, Pipeline, PipelineConfig, Tweet};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn config_path() -> PathBuf {
    fixtures().join("config.json")
}

fn urbanpulse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_urbanpulse"))
        .args(args)
        .env_remove("URBANPULSE_CONFIG")
        .output()
        .expect("binary runs")
}

fn classify_replay() -> Vec<u8> {
    let cfg = config_path();
    let tweets = fixtures().join("tweets.jsonl");
    let out = urbanpulse(&[
        "--config",
        cfg.to_str().unwrap(),
        "classify",
        "--in",
        tweets.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

#[test]
fn exit_codes_follow_usage_and_data_errors() {
    let code = |args: &[&str]| urbanpulse(args).status.code().unwrap();
    assert_eq!(code(&["no-such-command"]), 1);
    assert!(!urbanpulse(&["no-such-command"]).stderr.is_empty());
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["--version"]), 0);
    assert_eq!(code(&["classify"]), 1);
    assert_eq!(code(&["classify", "--in", "x.jsonl"]), 1, "no config anywhere");
    assert_eq!(
        code(&["--config", "/no/such/config.json", "classify", "--in", "x.jsonl"]),
        1
    );

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"id\": 1\n").unwrap();
    let cfg = config_path();
    let cfg = cfg.to_str().unwrap();
    assert_eq!(code(&["--config", cfg, "impact", "--in", bad.to_str().unwrap()]), 2);
    assert_eq!(code(&["--config", cfg, "classify", "--in", "/no/such/tweets.jsonl"]), 2);
    assert_eq!(
        code(&["--config", cfg, "correlate", "--events", bad.to_str().unwrap()]),
        1
    );
}

#[test]
fn classify_is_byte_identical_across_runs() {
    let a = classify_replay();
    let b = classify_replay();
    assert_eq!(a.iter().filter(|&&c| c == b'\n').count(), 200);
    assert_eq!(a, b);
}

#[test]
fn impact_recomputation_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let classified = dir.path().join("annotations.jsonl");
    std::fs::write(&classified, classify_replay()).unwrap();
    let cfg = config_path();
    let out = urbanpulse(&[
        "--config",
        cfg.to_str().unwrap(),
        "impact",
        "--in",
        classified.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert_eq!(out.stdout, std::fs::read(&classified).unwrap());
}

#[test]
fn crf_training_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("small.jsonl");
    let full = std::fs::read_to_string(fixtures().join("corpora/crf_train.jsonl")).unwrap();
    std::fs::write(&corpus, full.lines().take(40).collect::<Vec<_>>().join("\n")).unwrap();
    let cfg = config_path();
    let train = |name: &str| {
        let out = dir.path().join(name);
        let o = urbanpulse(&[
            "--config",
            cfg.to_str().unwrap(),
            "train-crf",
            "--corpus",
            corpus.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "7",
            "--epochs",
            "5",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(out).unwrap()
    };
    assert_eq!(train("a.json"), train("b.json"));
}

#[test]
fn correlate_matches_the_library_report() {
    let dir = tempfile::tempdir().unwrap();
    let classified = dir.path().join("annotations.jsonl");
    let bytes = classify_replay();
    std::fs::write(&classified, &bytes).unwrap();
    let disruptions = fixtures().join("authority/disruptions.json");
    let cfg_path = config_path();
    let out = urbanpulse(&[
        "--config",
        cfg_path.to_str().unwrap(),
        "correlate",
        "--events",
        classified.to_str().unwrap(),
        "--disruptions",
        disruptions.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dropped"));

    let cfg = PipelineConfig::load(Some(&cfg_path)).unwrap();
    let annotations: Vec<EventAnnotation> = String::from_utf8(bytes)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let feed = std::fs::read_to_string(&disruptions).unwrap();
    let records = parse_disruptions(&feed, &cfg.disruptions).unwrap().records;
    let graph = build_graph(&records, cfg.frame().unwrap().centre).unwrap();
    let report = similarity_report(&located_events(&annotations), &graph, &EventClass::EVENTS, None);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), report.to_csv_string().unwrap());
}

#[test]
fn listings_with_unknown_venue_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let classified = dir.path().join("annotations.jsonl");
    std::fs::write(&classified, classify_replay()).unwrap();
    let cfg = config_path();
    let listings = fixtures().join("authority/listings.html");
    let out = urbanpulse(&[
        "--config",
        cfg.to_str().unwrap(),
        "correlate",
        "--events",
        classified.to_str().unwrap(),
        "--listings",
        listings.to_str().unwrap(),
        "--classes",
        "Cultural,Food",
        "--format",
        "json",
    ]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("The Unmarked Warehouse"));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let classes: Vec<&str> = report["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["class"].as_str().unwrap())
        .collect();
    assert_eq!(classes, ["Cultural", "Food"]);
}

#[test]
fn shipped_models_read_rainbow_food_as_food() {
    let cfg = PipelineConfig::load(Some(&config_path())).unwrap();
    let pipeline = Pipeline::from_config(&cfg).unwrap();
    let tweet = Tweet::new(
        "rainbow",
        "Rainbow food @ The Good Life Eatery",
        chrono::Utc::now(),
        None,
    )
    .unwrap();
    let a = pipeline.annotate(&tweet).unwrap();
    assert_eq!(a.event_types, BTreeSet::from([EventClass::Food]));
    assert!(a.event_location.is_some(), "venue resolves through the gazetteer");
}

#[test]
fn tag_prints_one_record_per_text() {
    let cfg = config_path();
    let out = urbanpulse(&[
        "--config",
        cfg.to_str().unwrap(),
        "tag",
        "--text",
        "Heavy rain at Camden Town",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let n = v["tokens"].as_array().unwrap().len();
    for key in ["crf_tags", "tags", "pos", "entities"] {
        assert_eq!(v[key].as_array().unwrap().len(), n, "{key}");
    }
}

#[test]
fn fixture_generation_reproduces_the_shipped_corpora() {
    let dir = tempfile::tempdir().unwrap();
    let out = urbanpulse(&[
        "gen-fixtures",
        "--out-dir",
        dir.path().to_str().unwrap(),
        "--seed",
        "7",
        "--no-train",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in [
        "tweets.jsonl",
        "gazetteer.csv",
        "config.json",
        "corpora/crf_train.jsonl",
        "corpora/pos_train.jsonl",
        "corpora/fusion_train.jsonl",
        "authority/disruptions.json",
        "authority/listings.html",
        "dictionaries/weather.txt",
    ] {
        assert_eq!(
            std::fs::read(dir.path().join(f)).unwrap(),
            std::fs::read(fixtures().join(f)).unwrap(),
            "{f}"
        );
    }
    assert!(!dir.path().join("models").exists());
}
