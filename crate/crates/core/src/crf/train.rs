//! Full-batch training of the CRF on the L2-regularised conditional
//! log-likelihood.
//!
//! The minimised objective is the mean negative log-likelihood plus
//! `l2_lambda / 2 * |w|^2` over every emission and transition weight. Each
//! epoch takes one gradient step; the step is halved until the objective does
//! not increase, so the recorded loss curve is monotone.

use serde::{Deserialize, Serialize};

use super::features::FeatureExtractor;
use super::lattice::Lattice;
use super::model::CrfModel;
use super::TaggedSentence;
use crate::error::{Error, Result};
use crate::text::{full_tag_set, BioTag};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CrfTrainConfig {
    pub l2_lambda: f64,
    /// Initial step size; backtracking shrinks it as needed.
    pub learning_rate: f64,
    pub epochs: usize,
    /// Accepted for config uniformity; full-batch descent is deterministic
    /// without it.
    pub seed: u64,
    /// Stop once an epoch improves the objective by less than this.
    pub tolerance: f64,
}

impl Default for CrfTrainConfig {
    fn default() -> Self {
        CrfTrainConfig {
            l2_lambda: 0.01,
            learning_rate: 1.0,
            epochs: 200,
            seed: 0,
            tolerance: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrfTrainReport {
    /// Objective before training followed by its value after each epoch.
    pub losses: Vec<f64>,
    pub epochs_run: usize,
}

struct Prepared {
    ids: Vec<Vec<Vec<usize>>>,
    gold: Vec<Vec<usize>>,
}

fn prepare(model: &CrfModel, corpus: &[TaggedSentence]) -> Result<Prepared> {
    let mut ids = Vec::with_capacity(corpus.len());
    let mut gold = Vec::with_capacity(corpus.len());
    for s in corpus {
        let g = s
            .tags
            .iter()
            .map(|t| {
                model
                    .tag_index(*t)
                    .ok_or_else(|| Error::Model(format!("tag {t} is not in the tag set")))
            })
            .collect::<Result<Vec<_>>>()?;
        ids.push(model.feature_ids(&s.tokens));
        gold.push(g);
    }
    Ok(Prepared { ids, gold })
}

fn l2(model: &CrfModel) -> f64 {
    model
        .emission_weights
        .iter()
        .chain(&model.transition_weights)
        .map(|w| w * w)
        .sum()
}

/// Objective and its gradient laid out as `[emission_weights, transition_weights]`.
fn objective_and_gradient(model: &CrfModel, data: &Prepared, lambda: f64) -> (f64, Vec<f64>) {
    let n = model.n_tags();
    let ne = model.emission_weights.len();
    let mut grad = vec![0.0; ne + model.transition_weights.len()];
    let mut nll = 0.0;
    for (ids, gold) in data.ids.iter().zip(&data.gold) {
        let em = model.emissions_from_ids(ids);
        let lat: Lattice = model.lattice(&em);
        let marg = lat.marginals();
        nll += marg.log_z - lat.path_score(gold);
        for (j, fs) in ids.iter().enumerate() {
            let mut d = marg.unary[j].clone();
            d[gold[j]] -= 1.0;
            for &f in fs {
                for (g, x) in grad[f * n..(f + 1) * n].iter_mut().zip(&d) {
                    *g += x;
                }
            }
        }
        let start = ne + n * n;
        for t in 0..n {
            grad[start + t] += marg.unary[0][t];
        }
        grad[start + gold[0]] -= 1.0;
        for (j, pm) in marg.pairwise.iter().enumerate() {
            for (g, x) in grad[ne..ne + n * n].iter_mut().zip(pm) {
                *g += x;
            }
            grad[ne + gold[j] * n + gold[j + 1]] -= 1.0;
        }
    }
    let m = data.ids.len().max(1) as f64;
    let params = model.emission_weights.iter().chain(&model.transition_weights);
    for (g, w) in grad.iter_mut().zip(params) {
        *g = *g / m + lambda * w;
    }
    (nll / m + 0.5 * lambda * l2(model), grad)
}

fn objective(model: &CrfModel, data: &Prepared, lambda: f64) -> f64 {
    let mut nll = 0.0;
    for (ids, gold) in data.ids.iter().zip(&data.gold) {
        let em = model.emissions_from_ids(ids);
        let lat = model.lattice(&em);
        nll += lat.log_partition() - lat.path_score(gold);
    }
    nll / data.ids.len().max(1) as f64 + 0.5 * lambda * l2(model)
}

fn step(model: &CrfModel, grad: &[f64], eta: f64) -> CrfModel {
    let mut next = model.clone();
    let ne = next.emission_weights.len();
    for (w, g) in next.emission_weights.iter_mut().zip(grad) {
        *w -= eta * g;
    }
    for (w, g) in next.transition_weights.iter_mut().zip(&grad[ne..]) {
        *w -= eta * g;
    }
    next
}

/// Feature vocabulary in first-seen order over the corpus.
pub fn build_vocab(extractor: &FeatureExtractor, corpus: &[TaggedSentence]) -> Vec<String> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for s in corpus {
        for fs in extractor.extract_all(&s.tokens) {
            for f in fs {
                if seen.insert(f.clone()) {
                    out.push(f);
                }
            }
        }
    }
    out
}

pub fn train(corpus: &[TaggedSentence], extractor: FeatureExtractor, config: &CrfTrainConfig) -> Result<CrfModel> {
    train_with_report(corpus, extractor, full_tag_set(), config).map(|(m, _)| m)
}

pub fn train_with_report(
    corpus: &[TaggedSentence],
    extractor: FeatureExtractor,
    tag_set: Vec<BioTag>,
    config: &CrfTrainConfig,
) -> Result<(CrfModel, CrfTrainReport)> {
    if corpus.is_empty() {
        return Err(Error::invalid("corpus", "training corpus is empty"));
    }
    for (i, s) in corpus.iter().enumerate() {
        if s.tokens.is_empty() || s.tokens.len() != s.tags.len() {
            return Err(Error::invalid(
                "tags",
                format!("sentence {i}: {} tags for {} tokens", s.tags.len(), s.tokens.len()),
            ));
        }
    }
    if !(config.l2_lambda >= 0.0 && config.learning_rate > 0.0) {
        return Err(Error::Config("l2_lambda must be >= 0 and learning_rate > 0".into()));
    }
    let vocab = build_vocab(&extractor, corpus);
    let mut model = CrfModel::zeros(tag_set, vocab, extractor);
    model.l2_lambda = config.l2_lambda;
    let data = prepare(&model, corpus)?;

    let lambda = config.l2_lambda;
    let (mut loss, mut grad) = objective_and_gradient(&model, &data, lambda);
    let mut losses = vec![loss];
    let mut eta = config.learning_rate;
    let mut epochs_run = 0;
    for epoch in 0..config.epochs {
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        let mut accepted = None;
        let mut trial_eta = eta;
        for _ in 0..60 {
            let cand = step(&model, &grad, trial_eta);
            let l = objective(&cand, &data, lambda);
            if l.is_finite() && l <= loss {
                accepted = Some((cand, l));
                break;
            }
            trial_eta *= 0.5;
        }
        let Some((cand, new_loss)) = accepted else {
            if grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Divergence { epoch });
            }
            break;
        };
        epochs_run = epoch + 1;
        let improvement = loss - new_loss;
        model = cand;
        (loss, grad) = objective_and_gradient(&model, &data, lambda);
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        losses.push(loss);
        // let the step recover after a successful move
        eta = (trial_eta * 2.0).min(config.learning_rate * 8.0);
        if improvement < config.tolerance {
            break;
        }
    }
    Ok((model, CrfTrainReport { losses, epochs_run }))
}

/// Mean negative log-likelihood plus `lambda / 2 * |w|^2`, with its gradient
/// laid out as `[emission_weights, transition_weights]`.
pub fn objective_with_gradient(model: &CrfModel, corpus: &[TaggedSentence], lambda: f64) -> Result<(f64, Vec<f64>)> {
    let data = prepare(model, corpus)?;
    Ok(objective_and_gradient(model, &data, lambda))
}
