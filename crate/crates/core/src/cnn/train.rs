//! Mini-batch SGD on per-position softmax cross-entropy, summed over the
//! part-of-speech head and (where gold entity tags exist) the entity head.

use ndarray::{s, Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use super::corpus::PosSentence;
use super::model::{Activations, CnnModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CnnTrainConfig {
    pub dim: usize,
    pub window: usize,
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for CnnTrainConfig {
    fn default() -> Self {
        CnnTrainConfig {
            dim: 16,
            window: 5,
            hidden: 32,
            learning_rate: 0.05,
            epochs: 50,
            batch_size: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnnTrainReport {
    /// Mean per-position loss observed during each epoch.
    pub epoch_losses: Vec<f64>,
}

/// Gradient buffers shaped like the model's parameters.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub embed: Array2<f64>,
    pub m1: Array2<f64>,
    pub m2_pos: Array2<f64>,
    pub m2_ner: Array2<f64>,
}

impl Gradients {
    pub fn zeros_like(m: &CnnModel) -> Self {
        Gradients {
            embed: Array2::zeros(m.embed.dim()),
            m1: Array2::zeros(m.m1.dim()),
            m2_pos: Array2::zeros(m.m2_pos.dim()),
            m2_ner: Array2::zeros(m.m2_ner.dim()),
        }
    }
}

/// Returns `softmax(scores) - onehot(gold)` and the cross-entropy.
fn softmax_delta(scores: &Array1<f64>, gold: usize) -> (Array1<f64>, f64) {
    let m = scores.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let e = scores.mapv(|x| (x - m).exp());
    let z = e.sum();
    let mut p = e / z;
    let loss = -(p[gold].ln());
    p[gold] -= 1.0;
    (p, loss)
}

/// Cross-entropy at one position, accumulating its gradient into `grads`.
pub fn backprop<S: AsRef<str>>(
    model: &CnnModel,
    words: &[S],
    position: usize,
    pos_gold: usize,
    ner_gold: Option<usize>,
    grads: &mut Gradients,
) -> f64 {
    let Activations {
        indices,
        x,
        pre,
        hidden,
        pos_scores,
        ner_scores,
    } = model.forward(words, position);
    let (d_pos, mut loss) = softmax_delta(&pos_scores, pos_gold);
    let hcol = hidden.view().insert_axis(Axis(0));
    grads.m2_pos += &d_pos.view().insert_axis(Axis(1)).dot(&hcol);
    let mut d_hidden = model.m2_pos.t().dot(&d_pos);
    if let Some(g) = ner_gold {
        let (d_ner, l) = softmax_delta(&ner_scores, g);
        loss += l;
        grads.m2_ner += &d_ner.view().insert_axis(Axis(1)).dot(&hcol);
        d_hidden += &model.m2_ner.t().dot(&d_ner);
    }
    let d_pre = Array1::from_shape_fn(pre.len(), |i| if pre[i].abs() < 1.0 { d_hidden[i] } else { 0.0 });
    grads.m1 += &d_pre.view().insert_axis(Axis(1)).dot(&x.view().insert_axis(Axis(0)));
    let d_x = model.m1.t().dot(&d_pre);
    let d = model.dim();
    for (k, &idx) in indices.iter().enumerate() {
        let mut row = grads.embed.row_mut(idx);
        row += &d_x.slice(s![k * d..(k + 1) * d]);
    }
    loss
}

fn apply(model: &mut CnnModel, grads: &Gradients, eta: f64) {
    model.embed.scaled_add(-eta, &grads.embed);
    model.m1.scaled_add(-eta, &grads.m1);
    model.m2_pos.scaled_add(-eta, &grads.m2_pos);
    model.m2_ner.scaled_add(-eta, &grads.m2_ner);
}

fn init(model: &mut CnnModel, rng: &mut ChaCha8Rng) {
    let mut fill = |a: &mut Array2<f64>, scale: f64| {
        let u = Uniform::new_inclusive(-scale, scale).expect("valid range");
        a.iter_mut().for_each(|w| *w = u.sample(rng));
    };
    let fan_in = |a: &Array2<f64>| 1.0 / (a.ncols() as f64).sqrt();
    let s1 = fan_in(&model.m1);
    let s2 = fan_in(&model.m2_pos);
    fill(&mut model.embed, 0.5);
    fill(&mut model.m1, s1);
    fill(&mut model.m2_pos, s2);
    fill(&mut model.m2_ner, s2);
}

pub fn train(corpus: &[PosSentence], config: &CnnTrainConfig) -> Result<CnnModel> {
    train_with_report(corpus, config).map(|(m, _)| m)
}

pub fn train_with_report(corpus: &[PosSentence], config: &CnnTrainConfig) -> Result<(CnnModel, CnnTrainReport)> {
    if corpus.is_empty() {
        return Err(Error::invalid("corpus", "training corpus is empty"));
    }
    if !(config.learning_rate > 0.0 && config.learning_rate.is_finite()) || config.batch_size == 0 {
        return Err(Error::Config("learning_rate and batch_size must be positive".into()));
    }
    let mut words: Vec<&str> = corpus
        .iter()
        .flat_map(|s| s.tokens.iter().map(String::as_str))
        .collect();
    words.sort_unstable();
    words.dedup();
    let mut model = CnnModel::zeros(words, config.dim, config.window, config.hidden)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    init(&mut model, &mut rng);

    let positions: Vec<(usize, usize)> = corpus
        .iter()
        .enumerate()
        .flat_map(|(i, s)| (0..s.tokens.len()).map(move |j| (i, j)))
        .collect();
    let mut order = positions.clone();
    let mut grads = Gradients::zeros_like(&model);
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            grads.embed.fill(0.0);
            grads.m1.fill(0.0);
            grads.m2_pos.fill(0.0);
            grads.m2_ner.fill(0.0);
            for &(i, j) in batch {
                let s = &corpus[i];
                let ner = s.ner.as_ref().map(|n| n[j]);
                total += backprop(&model, &s.tokens, j, s.pos[j], ner, &mut grads);
            }
            apply(&mut model, &grads, config.learning_rate / batch.len() as f64);
        }
        let mean = total / positions.len() as f64;
        if !mean.is_finite() || model.m1.iter().any(|w| !w.is_finite()) {
            return Err(Error::Divergence { epoch });
        }
        epoch_losses.push(mean);
    }
    Ok((model, CnnTrainReport { epoch_losses }))
}

/// Corpus-level mean per-position loss; no gradient.
pub fn mean_loss(model: &CnnModel, corpus: &[PosSentence]) -> f64 {
    let mut grads = Gradients::zeros_like(model);
    let mut total = 0.0;
    let mut n = 0;
    for s in corpus {
        for j in 0..s.tokens.len() {
            total += backprop(model, &s.tokens, j, s.pos[j], s.ner.as_ref().map(|v| v[j]), &mut grads);
            n += 1;
        }
    }
    total / n.max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnn::pos_index;

    fn sentence(words: &[&str], pos: &[&str], ner: Option<&[usize]>) -> PosSentence {
        PosSentence::new(
            words.iter().map(|s| s.to_string()).collect(),
            pos.iter().map(|p| pos_index(p).unwrap()).collect(),
            ner.map(|n| n.to_vec()),
        )
        .unwrap()
    }

    #[test]
    fn backprop_matches_finite_differences() {
        let corpus = [sentence(
            &["the", "bus", "stops"],
            &["DET", "NOUN", "VERB"],
            Some(&[0, 3, 0]),
        )];
        let cfg = CnnTrainConfig {
            dim: 4,
            window: 3,
            hidden: 5,
            epochs: 0,
            seed: 11,
            ..Default::default()
        };
        let (model, _) = train_with_report(&corpus, &cfg).unwrap();
        let s = &corpus[0];
        let pos = 1;
        let loss_at = |m: &CnnModel| {
            let mut g = Gradients::zeros_like(m);
            backprop(m, &s.tokens, pos, s.pos[pos], Some(1), &mut g)
        };
        let mut g = Gradients::zeros_like(&model);
        backprop(&model, &s.tokens, pos, s.pos[pos], Some(1), &mut g);
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        type Pick = fn(&mut CnnModel) -> &mut Array2<f64>;
        let tensors: [(Pick, &Array2<f64>); 4] = [
            (|m| &mut m.embed, &g.embed),
            (|m| &mut m.m1, &g.m1),
            (|m| &mut m.m2_pos, &g.m2_pos),
            (|m| &mut m.m2_ner, &g.m2_ner),
        ];
        for (pick, analytic) in tensors {
            for (idx, &a) in analytic.indexed_iter() {
                let mut plus = model.clone();
                pick(&mut plus)[idx] += h;
                let mut minus = model.clone();
                pick(&mut minus)[idx] -= h;
                let fd = (loss_at(&plus) - loss_at(&minus)) / (2.0 * h);
                let scale = fd.abs().max(a.abs());
                if scale > 1e-7 {
                    worst = worst.max((fd - a).abs() / scale);
                }
            }
        }
        assert!(worst < 1e-4, "worst relative error {worst}");
    }

    #[test]
    fn memorises_one_sentence() {
        let corpus = [sentence(
            &["the", "red", "bus", "stops", "at", "victoria"],
            &["DET", "ADJ", "NOUN", "VERB", "ADP", "PROPN"],
            Some(&[0, 0, 0, 0, 0, 1]),
        )];
        let cfg = CnnTrainConfig {
            epochs: 200,
            learning_rate: 0.1,
            ..Default::default()
        };
        let (m, report) = train_with_report(&corpus, &cfg).unwrap();
        let (pos, ner) = m.tag(&corpus[0].tokens);
        assert_eq!(pos, corpus[0].pos);
        assert_eq!(ner, vec![0, 0, 0, 0, 0, 1]);
        assert!(report.epoch_losses.last().unwrap() < &report.epoch_losses[0]);
    }

    #[test]
    fn training_is_deterministic() {
        let corpus = [sentence(&["a", "dog", "runs"], &["DET", "NOUN", "VERB"], None)];
        let cfg = CnnTrainConfig {
            epochs: 3,
            ..Default::default()
        };
        assert_eq!(train(&corpus, &cfg).unwrap(), train(&corpus, &cfg).unwrap());
    }

    #[test]
    fn huge_learning_rate_diverges() {
        let corpus = [sentence(
            &["a", "dog", "runs"],
            &["DET", "NOUN", "VERB"],
            Some(&[0, 0, 0]),
        )];
        let cfg = CnnTrainConfig {
            learning_rate: 1e300,
            epochs: 20,
            ..Default::default()
        };
        assert!(matches!(train(&corpus, &cfg), Err(Error::Divergence { .. })));
    }
}
