//! Brute-force and closed-form oracles for the scoring arithmetic.

// span lists with a single range are deliberate fixture data
#![allow(clippy::single_range_in_vec_init)]

use std::collections::BTreeMap;
use std::time::Instant;

use chrono::{TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use urbanpulse_core::cnn::boost::boost_location;
use urbanpulse_core::crf::{self, CrfModel, FeatureExtractor, TaggedSentence};
use urbanpulse_core::geo::{haversine, vincenty, CartesianPoint, CityFrame, GeoPoint};
use urbanpulse_core::impact::{impact, likelihood};
use urbanpulse_core::similarity::{build_graph, dissimilarity_points, lead_times, similarities, EventGraph, GraphNode};
use urbanpulse_core::synth;
use urbanpulse_core::text::tags::{is_valid_bio, spans_from_tags};
use urbanpulse_core::text::{tokenize, BioTag, EventClass};

const VOCAB: [&str; 3] = ["fire", "soho", "rain"];
const TAGS: [&str; 5] = ["O", "B-Crime", "B-Weather", "B-Location", "I-Location"];

fn all_sentences(max_len: usize) -> Vec<Vec<&'static str>> {
    let mut out = Vec::new();
    let mut layer: Vec<Vec<&str>> = vec![vec![]];
    for _ in 0..max_len {
        layer = layer
            .iter()
            .flat_map(|s| {
                VOCAB.iter().map(move |w| {
                    let mut t = s.clone();
                    t.push(*w);
                    t
                })
            })
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}

fn random_model(seed: u64, sentences: &[Vec<&str>]) -> CrfModel {
    let tags: Vec<BioTag> = TAGS.iter().map(|t| t.parse().unwrap()).collect();
    let corpus: Vec<TaggedSentence> = sentences
        .iter()
        .map(|s| TaggedSentence {
            tokens: tokenize(&s.join(" ")).unwrap(),
            tags: vec![tags[0]; s.len()],
        })
        .collect();
    let ex = FeatureExtractor::default();
    let vocab = crf::build_vocab(&ex, &corpus);
    let mut model = CrfModel::zeros(tags, vocab, ex);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for w in model
        .emission_weights
        .iter_mut()
        .chain(model.transition_weights.iter_mut())
    {
        *w = rng.random_range(-2.0..2.0);
    }
    model
}

/// Scores every tag sequence directly from the weights and returns the best
/// path and log Z by enumeration.
fn enumerate(model: &CrfModel, emissions: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let n = model.n_tags();
    let len = emissions.len();
    let start = model.start_weights();
    let pair = &model.transition_weights[..n * n];
    let mut scores = Vec::with_capacity(n.pow(len as u32));
    let mut best = (Vec::new(), f64::NEG_INFINITY);
    let mut path = vec![0usize; len];
    loop {
        let mut s = start[path[0]] + emissions[0][path[0]];
        for j in 1..len {
            s += pair[path[j - 1] * n + path[j]] + emissions[j][path[j]];
        }
        if s > best.1 {
            best = (path.clone(), s);
        }
        scores.push(s);
        let mut k = len;
        loop {
            if k == 0 {
                let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let z = m + scores.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
                return (best.0, z);
            }
            k -= 1;
            path[k] += 1;
            if path[k] < n {
                break;
            }
            path[k] = 0;
        }
    }
}

#[test]
fn crf_viterbi_and_partition_match_enumeration() {
    let t0 = Instant::now();
    let sentences = all_sentences(6);
    assert_eq!(sentences.len(), 3 + 9 + 27 + 81 + 243 + 729);
    let model = random_model(42, &sentences);
    let mut worst: f64 = 0.0;
    for s in &sentences {
        let tokens = tokenize(&s.join(" ")).unwrap();
        let (best, log_z) = enumerate(&model, &model.emission_scores(&tokens));
        let decoded: Vec<usize> = model
            .decode(&tokens)
            .unwrap()
            .iter()
            .map(|t| model.tag_index(*t).unwrap())
            .collect();
        assert_eq!(decoded, best, "{s:?}");
        let z = model.partition(&tokens).unwrap();
        worst = worst.max((z - log_z).abs() / log_z.abs());
    }
    assert!(worst < 1e-8, "worst relative error {worst}");
    assert!(t0.elapsed().as_secs_f64() < 10.0);
}

#[test]
fn adding_a_constant_to_one_positions_emissions_keeps_the_argmax() {
    let sentences = all_sentences(4);
    let model = random_model(9, &sentences);
    let tokens = tokenize("fire soho rain soho").unwrap();
    let em = model.emission_scores(&tokens);
    let (best, z) = enumerate(&model, &em);
    let mut shifted = em.clone();
    shifted[2].iter_mut().for_each(|x| *x += 3.25);
    let (best2, z2) = enumerate(&model, &shifted);
    assert_eq!(best, best2);
    assert!((z2 - z - 3.25).abs() < 1e-9);
}

#[test]
fn l2_term_is_half_lambda_squared_norm() {
    let sentences = all_sentences(2);
    let model = random_model(5, &sentences);
    let corpus: Vec<TaggedSentence> = sentences
        .iter()
        .map(|s| TaggedSentence {
            tokens: tokenize(&s.join(" ")).unwrap(),
            tags: vec!["O".parse().unwrap(); s.len()],
        })
        .collect();
    let (plain, _) = crf::objective_with_gradient(&model, &corpus, 0.0).unwrap();
    let (reg, _) = crf::objective_with_gradient(&model, &corpus, 0.3).unwrap();
    let norm: f64 = model
        .emission_weights
        .iter()
        .chain(&model.transition_weights)
        .map(|w| w * w)
        .sum();
    assert!((reg - plain - 0.15 * norm).abs() < 1e-9);
}

#[test]
fn model_survives_json_round_trip() {
    let sentences = all_sentences(3);
    let model = random_model(1, &sentences);
    let back = CrfModel::from_json(&model.to_json().unwrap()).unwrap();
    for s in &sentences {
        let tokens = tokenize(&s.join(" ")).unwrap();
        assert_eq!(back.decode(&tokens).unwrap(), model.decode(&tokens).unwrap());
        assert_eq!(back.partition(&tokens).unwrap(), model.partition(&tokens).unwrap());
    }
}

fn cp(x: f64, y: f64, z: f64) -> CartesianPoint {
    CartesianPoint { x, y, z }
}

fn graph(points: &[CartesianPoint], centre: CartesianPoint) -> EventGraph {
    let t = Utc.with_ymd_and_hms(2016, 1, 1, 0, 0, 0).unwrap();
    let nodes = points
        .iter()
        .map(|&point| GraphNode {
            point,
            timestamp: t,
            category: String::new(),
        })
        .collect();
    EventGraph::from_nodes(nodes, centre).unwrap()
}

fn five_by_three() -> (Vec<CartesianPoint>, Vec<CartesianPoint>, CartesianPoint) {
    let events = vec![
        cp(1.0, 0.0, 0.0),
        cp(0.0, 2.0, 0.0),
        cp(3.0, 3.0, 1.0),
        cp(-1.0, 0.5, 2.0),
        cp(4.0, -2.0, 0.0),
    ];
    let nodes = vec![cp(2.0, 0.0, 0.0), cp(0.0, 4.0, 0.0), cp(0.0, 0.0, 3.0)];
    (events, nodes, cp(0.0, 0.0, 0.0))
}

#[test]
fn similarity_matches_brute_force_on_five_by_three() {
    let (events, nodes, centre) = five_by_three();
    let g = graph(&nodes, centre);
    assert_eq!(g.lambda, vec![2.0, 4.0, 3.0]);
    let mins: Vec<f64> = events
        .iter()
        .map(|e| {
            nodes
                .iter()
                .map(|n| {
                    let (dx, dy, dz) = (e.x - n.x, e.y - n.y, e.z - n.z);
                    let lambda = (n.x * n.x + n.y * n.y + n.z * n.z).sqrt();
                    (dx * dx + dy * dy + dz * dz).sqrt() / lambda
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mu = mins.iter().sum::<f64>() / 5.0;
    let var = mins.iter().map(|m| (m - mu).powi(2)).sum::<f64>() / 5.0;
    assert_eq!(dissimilarity_points(&events, &g), Some((mu, var)));
}

#[test]
fn similarity_is_scale_homogeneous() {
    let (events, nodes, centre) = five_by_three();
    let (mu, var) = dissimilarity_points(&events, &graph(&nodes, centre)).unwrap();
    // scales below 1 would push the unit-sized weights under the metre floor
    for k in [1.0, 7.0, 6.371e6] {
        let s = |p: &CartesianPoint| cp(p.x * k, p.y * k, p.z * k);
        let ev: Vec<_> = events.iter().map(s).collect();
        let nd: Vec<_> = nodes.iter().map(s).collect();
        let (mu_k, var_k) = dissimilarity_points(&ev, &graph(&nd, s(&centre))).unwrap();
        assert!((mu_k - mu).abs() < 1e-9 * mu, "{k}");
        assert!((var_k - var).abs() < 1e-9 * var.max(1e-12), "{k}");
    }
    let mut m = BTreeMap::new();
    m.insert(EventClass::Crime, 1.5);
    m.insert(EventClass::Food, 3.0);
    let scaled: BTreeMap<_, _> = m.iter().map(|(c, v)| (*c, v * 1e4)).collect();
    for (a, b) in similarities(&m).values().zip(similarities(&scaled).values()) {
        assert!((a - b).abs() < 1e-9);
    }
}

/// Reference mean dissimilarities for one city and the similarities they
/// rescale to.
pub const REFERENCE_ROW: [(f64, f64); 7] = [
    (1.73, 0.67),
    (2.00, 0.60),
    (2.95, 0.44),
    (3.00, 0.41),
    (3.60, 0.32),
    (3.77, 0.28),
    (5.26, 0.00),
];

#[test]
fn rescaling_reproduces_reference_row() {
    let mu: BTreeMap<EventClass, f64> = EventClass::EVENTS
        .iter()
        .copied()
        .zip(REFERENCE_ROW.map(|r| r.0))
        .collect();
    let s = similarities(&mu);
    for (c, (_, want)) in EventClass::EVENTS.iter().zip(REFERENCE_ROW) {
        assert!((s[c] - want).abs() <= 0.03, "{c:?}: {} vs {want}", s[c]);
    }
}

#[test]
fn lead_time_generator_is_reproduced_exactly() {
    let (records, events) = synth::lead_time_fixture().unwrap();
    let g = build_graph(&records, CityFrame::london().centre).unwrap();
    let stats = lead_times(&events, &g);
    assert_eq!(stats.n_events, 200);
    assert_eq!(stats.n_early, 99);
    assert_eq!(stats.fraction_early, 0.495);
    assert_eq!(stats.mean_lead_minutes, Some(297.5));
}

fn tags(s: &str) -> Vec<BioTag> {
    s.split_whitespace().map(|t| t.parse().unwrap()).collect()
}

/// (CRF output, windowed-tagger LOC runs, gold tags)
type BoostCase = (Vec<BioTag>, Vec<std::ops::Range<usize>>, Vec<BioTag>);

fn boost_fixture() -> Vec<BoostCase> {
    vec![
        (tags("B-Crime O O O"), vec![3..4], tags("B-Crime O O B-Location")),
        (tags("O B-Location O"), vec![1..3], tags("O B-Location I-Location")),
        (tags("B-Weather O O"), vec![], tags("B-Weather O B-Location")),
        (tags("O O O O"), vec![0..2], tags("B-Location I-Location O O")),
        (tags("B-Location O B-Food"), vec![0..1], tags("B-Location O B-Food")),
        (
            tags("O B-Sport O O O"),
            vec![3..5],
            tags("O B-Sport O B-Location I-Location"),
        ),
    ]
}

fn location_recall(gold: &[Vec<BioTag>], pred: &[Vec<BioTag>]) -> f64 {
    let (mut hit, mut total) = (0, 0);
    for (g, p) in gold.iter().zip(pred) {
        let ps = spans_from_tags(p);
        for s in spans_from_tags(g)
            .into_iter()
            .filter(|s| s.class == EventClass::Location)
        {
            total += 1;
            hit += ps.contains(&s) as usize;
        }
    }
    hit as f64 / total as f64
}

#[test]
fn boost_raises_location_recall_on_fixture() {
    let fx = boost_fixture();
    let gold: Vec<_> = fx.iter().map(|f| f.2.clone()).collect();
    let before: Vec<_> = fx.iter().map(|f| f.0.clone()).collect();
    let after: Vec<_> = fx.iter().map(|f| boost_location(&f.0, &f.1)).collect();
    assert!(after.iter().all(|t| is_valid_bio(t)));
    let (r0, r1) = (location_recall(&gold, &before), location_recall(&gold, &after));
    assert!(r1 >= r0, "{r0} -> {r1}");
    assert!((r0 - 1.0 / 6.0).abs() < 1e-12);
    assert!((r1 - 5.0 / 6.0).abs() < 1e-12);
}

#[test]
fn impact_arithmetic_and_radial_sweep() {
    assert_eq!(impact(3, 0.75), 2.25);
    assert!((impact(7, 0.93) - 6.51).abs() < 1e-12);
    assert!((impact(2, 0.82) - 1.64).abs() < 1e-12);
    let f = CityFrame::london();
    assert_eq!(likelihood(&f, f.centre), 1.0);
    let mut prev = 1.0;
    for i in 1..=100 {
        let t = i as f64 / 100.0;
        let p = GeoPoint::new(
            f.centre.lat + t * 2.5 * (f.bbox_ne.lat - f.centre.lat),
            f.centre.lon + t * 2.5 * (f.bbox_ne.lon - f.centre.lon),
        )
        .unwrap();
        let l = likelihood(&f, p);
        assert!(l <= prev, "step {i}: {l} > {prev}");
        assert!((0.0..=1.0).contains(&l));
        prev = l;
    }
    assert_eq!(prev, 0.0);
}

#[test]
fn geodesic_identity_symmetry_and_agreement() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..100 {
        let a = GeoPoint::new(rng.random_range(-80.0..0.0), rng.random_range(-170.0..170.0)).unwrap();
        let b = GeoPoint::new(rng.random_range(-80.0..0.0), rng.random_range(-170.0..170.0)).unwrap();
        assert_eq!(haversine(a, a), 0.0);
        assert_eq!(vincenty(a, a).meters, 0.0);
        assert_eq!(haversine(a, b), haversine(b, a));
        assert_eq!(vincenty(a, b).meters, vincenty(b, a).meters);
    }
}
