//! Full-batch gradient descent on the mean negative log-likelihood. An item
//! carrying several labels contributes one term per label.
//!
//! Items labelled Other have no class among the event labels. When
//! calibration is on, a subsample of them contributes one cross-entropy term
//! against the uniform distribution, which teaches the head to stay flat on
//! event-free text so the Other gate in classification can fire.

use std::collections::BTreeSet;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{log_softmax, FusionModel, DEFAULT_TAU};
use crate::error::{Error, Result};
use crate::text::EventClass;

/// One training example: both views and its gold labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionItem {
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    pub labels: BTreeSet<EventClass>,
}

impl FusionItem {
    pub fn is_other(&self) -> bool {
        self.labels.contains(&EventClass::Other)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionTrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Other items kept per item of the largest non-Other class.
    pub other_subsample_ratio: f64,
    pub tau: f64,
    pub l2_lambda: f64,
    /// Train Other items towards uniform class probabilities.
    pub calibrate_other: bool,
}

impl Default for FusionTrainConfig {
    fn default() -> Self {
        FusionTrainConfig {
            learning_rate: 0.5,
            epochs: 200,
            seed: 0,
            other_subsample_ratio: 1.0,
            tau: DEFAULT_TAU,
            l2_lambda: 0.0,
            calibrate_other: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionTrainReport {
    /// NLL before training then after every epoch.
    pub losses: Vec<f64>,
    pub items_used: usize,
    pub items_dropped: usize,
}

/// Keeps every non-Other item and at most `ratio` times the size of the
/// largest non-Other class of Other items, sampled with `seed`. Input order
/// is preserved.
pub fn subsample_other(items: &[FusionItem], ratio: f64, seed: u64) -> Vec<FusionItem> {
    let mut per_class = std::collections::BTreeMap::new();
    for it in items.iter().filter(|i| !i.is_other()) {
        for c in &it.labels {
            *per_class.entry(*c).or_insert(0usize) += 1;
        }
    }
    let largest = per_class.values().copied().max().unwrap_or(0);
    let quota = (ratio.max(0.0) * largest as f64).round() as usize;
    let mut others: Vec<usize> = (0..items.len()).filter(|&i| items[i].is_other()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    others.shuffle(&mut rng);
    let keep: BTreeSet<usize> = others.into_iter().take(quota).collect();
    items
        .iter()
        .enumerate()
        .filter(|(i, it)| !it.is_other() || keep.contains(i))
        .map(|(_, it)| it.clone())
        .collect()
}

/// `None` targets the uniform distribution.
struct Term {
    v: Array1<f64>,
    class: Option<usize>,
}

fn terms(model: &FusionModel, items: &[FusionItem], calibrate_other: bool) -> Result<(Vec<Term>, usize)> {
    let mut out = Vec::new();
    let mut used = 0;
    for it in items {
        let v = model.concat(&it.theta, &it.phi)?;
        if it.is_other() {
            if calibrate_other {
                out.push(Term { v, class: None });
                used += 1;
            }
            continue;
        }
        let mut any = false;
        for c in &it.labels {
            if let Some(idx) = model.classes.iter().position(|k| k == c) {
                out.push(Term {
                    v: v.clone(),
                    class: Some(idx),
                });
                any = true;
            }
        }
        used += any as usize;
    }
    Ok((out, used))
}

/// Loss and its gradients with respect to `(W, b, k)`.
pub type NllGradient = (f64, Array2<f64>, Array1<f64>, Array1<f64>);

/// Mean NLL and gradients with respect to `(W, b, k)`.
pub fn nll_and_gradient(model: &FusionModel, items: &[FusionItem], l2_lambda: f64) -> Result<NllGradient> {
    let (terms, _) = terms(model, items, true)?;
    Ok(nll_grad_terms(model, &terms, l2_lambda))
}

fn nll_grad_terms(model: &FusionModel, terms: &[Term], l2_lambda: f64) -> NllGradient {
    let mut gw = Array2::zeros(model.w.dim());
    let mut gb = Array1::zeros(model.b.len());
    let mut gk = Array1::zeros(model.k.len());
    let mut loss = 0.0;
    for t in terms {
        let scores = model.raw_scores(t.v.view()).expect("dims checked");
        let logp = log_softmax(scores.view());
        let mut delta = logp.mapv(f64::exp);
        match t.class {
            Some(c) => {
                loss -= logp[c];
                delta[c] -= 1.0;
            }
            None => {
                let u = 1.0 / logp.len() as f64;
                loss -= u * logp.sum();
                delta -= u;
            }
        }
        for (i, &vi) in t.v.iter().enumerate() {
            if vi != 0.0 {
                let mut row = gw.row_mut(i);
                row.scaled_add(vi, &delta);
            }
        }
        gk += &delta;
        // shared bias: d s_c / d b_i = v_i for every c
        gb.scaled_add(delta.sum(), &t.v);
    }
    let n = terms.len().max(1) as f64;
    gw /= n;
    gb /= n;
    gk /= n;
    loss /= n;
    if l2_lambda > 0.0 {
        loss += 0.5 * l2_lambda * model.w.iter().map(|x| x * x).sum::<f64>();
        gw.scaled_add(l2_lambda, &model.w);
    }
    (loss, gw, gb, gk)
}

pub fn train(items: &[FusionItem], config: &FusionTrainConfig) -> Result<(FusionModel, FusionTrainReport)> {
    let (d1, d2) = match items.first() {
        Some(it) => (it.theta.len(), it.phi.len()),
        None => return Err(Error::invalid("dataset", "no training items")),
    };
    train_model(FusionModel::untrained(d1, d2), items, config)
}

/// Trains starting from `model`'s shape and class order.
pub fn train_model(
    mut model: FusionModel,
    items: &[FusionItem],
    config: &FusionTrainConfig,
) -> Result<(FusionModel, FusionTrainReport)> {
    if !(config.tau > 0.0 && config.tau < 1.0) {
        return Err(Error::Config(format!("tau {} outside (0, 1)", config.tau)));
    }
    if config.learning_rate.is_nan() || config.learning_rate <= 0.0 {
        return Err(Error::Config("learning_rate must be positive".into()));
    }
    let total = items.len();
    let items = if config.calibrate_other {
        subsample_other(items, config.other_subsample_ratio, config.seed)
    } else {
        items.to_vec()
    };
    let (terms, used) = terms(&model, &items, config.calibrate_other)?;
    if terms.iter().all(|t| t.class.is_none()) {
        return Err(Error::invalid("dataset", "no item carries an event label"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    model.w.iter_mut().for_each(|w| *w = rng.random_range(-0.01..0.01));
    model.tau = config.tau;

    let (mut loss, mut gw, mut gb, mut gk) = nll_grad_terms(&model, &terms, config.l2_lambda);
    let mut losses = vec![loss];
    let eta = config.learning_rate;
    for epoch in 0..config.epochs {
        model.w.scaled_add(-eta, &gw);
        model.b.scaled_add(-eta, &gb);
        model.k.scaled_add(-eta, &gk);
        (loss, gw, gb, gk) = nll_grad_terms(&model, &terms, config.l2_lambda);
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        losses.push(loss);
    }
    model.trained = true;
    Ok((
        model,
        FusionTrainReport {
            losses,
            items_used: used,
            items_dropped: total - used,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};
    use EventClass::*;

    fn item(theta: Vec<f64>, phi: Vec<f64>, labels: &[EventClass]) -> FusionItem {
        FusionItem {
            theta,
            phi,
            labels: labels.iter().copied().collect(),
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let items: Vec<FusionItem> = (0..6)
            .map(|i| {
                let theta = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
                let phi = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
                let labels = if i == 0 {
                    vec![Food, Sport]
                } else {
                    vec![EventClass::EVENTS[i % 7]]
                };
                item(theta, phi, &labels)
            })
            .collect();
        let mut m = FusionModel::untrained(3, 2);
        m.w.iter_mut().for_each(|x| *x = rng.random_range(-1.0..1.0));
        m.b.iter_mut().for_each(|x| *x = rng.random_range(-1.0..1.0));
        m.k.iter_mut().for_each(|x| *x = rng.random_range(-1.0..1.0));
        let lambda = 0.05;
        let (_, gw, gb, gk) = nll_and_gradient(&m, &items, lambda).unwrap();
        let f = |m: &FusionModel| nll_and_gradient(m, &items, lambda).unwrap().0;
        let h = 1e-6;
        let check = |fd: f64, a: f64| {
            let scale = fd.abs().max(a.abs());
            if scale < 1e-9 {
                assert!((fd - a).abs() < 1e-8, "fd {fd} analytic {a}");
            } else {
                assert!((fd - a).abs() / scale < 1e-4, "fd {fd} analytic {a}");
            }
        };
        for ((i, j), &a) in gw.indexed_iter() {
            let (mut p, mut q) = (m.clone(), m.clone());
            p.w[[i, j]] += h;
            q.w[[i, j]] -= h;
            check((f(&p) - f(&q)) / (2.0 * h), a);
        }
        for (i, &a) in gk.iter().enumerate() {
            let (mut p, mut q) = (m.clone(), m.clone());
            p.k[i] += h;
            q.k[i] -= h;
            check((f(&p) - f(&q)) / (2.0 * h), a);
        }
        for (i, &a) in gb.iter().enumerate() {
            let (mut p, mut q) = (m.clone(), m.clone());
            p.b[i] += h;
            q.b[i] -= h;
            check((f(&p) - f(&q)) / (2.0 * h), a);
        }
    }

    #[test]
    fn separable_blobs_reach_high_accuracy() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let noise = Normal::new(0.0, 0.15).unwrap();
        let mut items = Vec::new();
        for (c, class) in EventClass::EVENTS.iter().enumerate() {
            for blob in 0..2 {
                for _ in 0..20 {
                    let mut theta = vec![0.0; 7];
                    let mut phi = vec![0.0; 7];
                    theta[c] = 1.0 + noise.sample(&mut rng);
                    phi[(c + blob) % 7] = 1.0 + noise.sample(&mut rng);
                    theta.iter_mut().for_each(|x| *x += noise.sample(&mut rng));
                    items.push(item(theta, phi, &[*class]));
                }
            }
        }
        let (m, report) = train(&items, &FusionTrainConfig::default()).unwrap();
        assert!(report.losses.last().unwrap() < &report.losses[0]);
        let correct = items
            .iter()
            .filter(|it| {
                let v = m.concat(&it.theta, &it.phi).unwrap();
                let s = m.class_scores(v.view()).unwrap();
                it.labels.contains(&s.classes[s.argmax()])
            })
            .count();
        let acc = correct as f64 / items.len() as f64;
        assert!(acc >= 0.95, "accuracy {acc}");
    }

    #[test]
    fn memorises_single_example() {
        let items = vec![item(vec![0.2, 0.9], vec![1.0], &[Weather])];
        let (m, _) = train(&items, &FusionTrainConfig::default()).unwrap();
        let s = m
            .class_scores(m.concat(&items[0].theta, &items[0].phi).unwrap().view())
            .unwrap();
        assert_eq!(s.classes[s.argmax()], Weather);
        assert!(m.trained);
    }

    #[test]
    fn other_items_are_dropped_without_calibration() {
        let items = vec![
            item(vec![1.0], vec![0.0], &[Food]),
            item(vec![0.0], vec![1.0], &[Other]),
        ];
        let cfg = FusionTrainConfig {
            calibrate_other: false,
            ..Default::default()
        };
        let (_, report) = train(&items, &cfg).unwrap();
        assert_eq!((report.items_used, report.items_dropped), (1, 1));
        let only_other = vec![item(vec![1.0], vec![0.0], &[Other])];
        assert!(train(&only_other, &FusionTrainConfig::default()).is_err());
    }

    #[test]
    fn calibration_flattens_other_inputs() {
        let mut items = Vec::new();
        for (c, class) in EventClass::EVENTS.iter().enumerate() {
            let mut theta = vec![0.0; 8];
            theta[c] = 1.0;
            items.push(item(theta, vec![0.0], &[*class]));
        }
        let mut other = vec![0.0; 8];
        other[7] = 1.0;
        items.push(item(other.clone(), vec![0.0], &[Other]));
        let (m, report) = train(
            &items,
            &FusionTrainConfig {
                epochs: 500,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(report.items_used, 8);
        let s = m.class_scores(m.concat(&other, &[0.0]).unwrap().view()).unwrap();
        assert!(s.max_prob() < 0.3, "{:?}", s.probs);
        let mut food = vec![0.0; 8];
        food[Food.event_index().unwrap()] = 1.0;
        let s = m.class_scores(m.concat(&food, &[0.0]).unwrap().view()).unwrap();
        assert_eq!(s.classes[s.argmax()], Food);
    }

    #[test]
    fn subsampling_balances_other() {
        let mut items = Vec::new();
        for _ in 0..5 {
            items.push(item(vec![0.0], vec![0.0], &[Food]));
        }
        for _ in 0..3 {
            items.push(item(vec![0.0], vec![0.0], &[Sport]));
        }
        for i in 0..40 {
            items.push(item(vec![i as f64], vec![0.0], &[Other]));
        }
        let out = subsample_other(&items, 1.0, 7);
        assert_eq!(out.iter().filter(|i| i.is_other()).count(), 5);
        assert_eq!(out.len(), 13);
        assert_eq!(subsample_other(&items, 1.0, 7), out);
        assert_eq!(subsample_other(&items, 2.0, 7).len(), 18);
    }

    #[test]
    fn divergence_is_reported() {
        let items = vec![
            item(vec![1e200], vec![0.0], &[Food]),
            item(vec![-1e200], vec![0.0], &[Sport]),
        ];
        let cfg = FusionTrainConfig {
            learning_rate: 1e200,
            epochs: 5,
            ..Default::default()
        };
        assert!(matches!(train(&items, &cfg), Err(Error::Divergence { .. })));
    }
}
