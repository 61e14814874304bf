//! Held-out quality of both taggers on the synthetic corpora.

use std::time::Instant;

use urbanpulse_core::cnn::{self, CnnTrainConfig};
use urbanpulse_core::crf::{self, CrfTrainConfig, FeatureExtractor};
use urbanpulse_core::synth;

#[test]
fn crf_reaches_token_f1_on_held_out_reports() {
    let t0 = Instant::now();
    let corpus = synth::report_corpus(500, 17).unwrap();
    let (train, test) = corpus.split_at(400);
    let model = crf::train(
        train,
        FeatureExtractor::new(synth::dictionary_set()),
        &CrfTrainConfig::default(),
    )
    .unwrap();
    let gold: Vec<_> = test.iter().map(|s| s.tags.clone()).collect();
    let pred: Vec<_> = test.iter().map(|s| model.decode(&s.tokens).unwrap()).collect();
    let f1 = synth::token_f1(&gold, &pred);
    let secs = t0.elapsed().as_secs_f64();
    eprintln!("crf held-out token F1 {f1:.4} in {secs:.1}s");
    assert!(f1 >= 0.90, "{f1}");
    assert!(secs < 60.0);
}

#[test]
fn cnn_reaches_tag_accuracy_on_held_out_grammar() {
    let t0 = Instant::now();
    let corpus = synth::pos_corpus(150, 5).unwrap();
    let (train, test) = corpus.split_at(120);
    let model = cnn::train(
        train,
        &CnnTrainConfig {
            seed: 5,
            ..Default::default()
        },
    )
    .unwrap();
    let (mut right, mut total) = (0, 0);
    for s in test {
        let (pos, _) = model.tag(&s.tokens);
        right += pos.iter().zip(&s.pos).filter(|(a, b)| a == b).count();
        total += s.pos.len();
    }
    let acc = right as f64 / total as f64;
    let secs = t0.elapsed().as_secs_f64();
    eprintln!("cnn held-out accuracy {acc:.4} over {total} tokens in {secs:.1}s");
    assert!(acc >= 0.95, "{acc}");
    assert!(secs < 60.0);
}
