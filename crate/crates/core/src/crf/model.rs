use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::features::FeatureExtractor;
use super::lattice::{Lattice, Marginals};
use crate::error::{Error, Result};
use crate::text::tags::{repair, spans_from_tags};
use crate::text::{full_tag_set, BioTag, EventClass, NerSpan, Token};

pub const CRF_FORMAT: &str = "URBANPULSE-CRF-v1";

/// Length of [`CrfModel::semantic_view`]: per-class tag mass then span flags.
pub const SEMANTIC_VIEW_DIM: usize = 2 * EventClass::ALL.len();

/// Linear-chain CRF over a fixed tag inventory.
///
/// Emission weights are dense `n_features x n_tags`, row-major by feature.
/// Transition weights are `(n_tags + 1) x n_tags`: rows `0..n_tags` are
/// indexed by the previous tag and the final row is the null previous tag
/// used at the first position.
#[derive(Debug, Clone, PartialEq)]
pub struct CrfModel {
    pub tag_set: Vec<BioTag>,
    pub feature_vocab: HashMap<String, usize>,
    pub emission_weights: Vec<f64>,
    pub transition_weights: Vec<f64>,
    pub l2_lambda: f64,
    pub extractor: FeatureExtractor,
}

impl CrfModel {
    /// All-zero model over `tag_set` with the given feature vocabulary.
    pub fn zeros(tag_set: Vec<BioTag>, features: Vec<String>, extractor: FeatureExtractor) -> Self {
        let n = tag_set.len();
        let feature_vocab: HashMap<String, usize> = features.into_iter().enumerate().map(|(i, f)| (f, i)).collect();
        CrfModel {
            emission_weights: vec![0.0; feature_vocab.len() * n],
            transition_weights: vec![0.0; (n + 1) * n],
            tag_set,
            feature_vocab,
            l2_lambda: 0.0,
            extractor,
        }
    }

    /// Zero model over the full 17-tag inventory with an empty vocabulary.
    pub fn empty() -> Self {
        Self::zeros(full_tag_set(), Vec::new(), FeatureExtractor::default())
    }

    pub fn n_tags(&self) -> usize {
        self.tag_set.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_vocab.len()
    }

    pub fn tag_index(&self, tag: BioTag) -> Option<usize> {
        self.tag_set.iter().position(|t| *t == tag)
    }

    pub fn start_weights(&self) -> &[f64] {
        let n = self.n_tags();
        &self.transition_weights[n * n..]
    }

    pub fn start_weight_mut(&mut self, tag: usize) -> &mut f64 {
        let n = self.n_tags();
        &mut self.transition_weights[n * n + tag]
    }

    pub fn transition_mut(&mut self, prev: usize, cur: usize) -> &mut f64 {
        let n = self.n_tags();
        &mut self.transition_weights[prev * n + cur]
    }

    /// Mutable emission weight, adding the feature to the vocabulary if new.
    pub fn emission_mut(&mut self, feature: &str, tag: usize) -> &mut f64 {
        let n = self.n_tags();
        let next = self.feature_vocab.len();
        let id = *self.feature_vocab.entry(feature.to_string()).or_insert(next);
        if id == next {
            self.emission_weights.extend(std::iter::repeat_n(0.0, n));
        }
        &mut self.emission_weights[id * n + tag]
    }

    /// Known feature ids per position; unseen features are dropped.
    pub fn feature_ids(&self, tokens: &[Token]) -> Vec<Vec<usize>> {
        self.extractor
            .extract_all(tokens)
            .into_iter()
            .map(|fs| fs.iter().filter_map(|f| self.feature_vocab.get(f).copied()).collect())
            .collect()
    }

    pub(crate) fn emissions_from_ids(&self, ids: &[Vec<usize>]) -> Vec<Vec<f64>> {
        let n = self.n_tags();
        ids.iter()
            .map(|fs| {
                let mut row = vec![0.0; n];
                for &f in fs {
                    let w = &self.emission_weights[f * n..(f + 1) * n];
                    for (r, x) in row.iter_mut().zip(w) {
                        *r += x;
                    }
                }
                row
            })
            .collect()
    }

    pub(crate) fn lattice<'a>(&'a self, emissions: &'a [Vec<f64>]) -> Lattice<'a> {
        let n = self.n_tags();
        Lattice {
            emissions,
            start: &self.transition_weights[n * n..],
            pair: &self.transition_weights[..n * n],
        }
    }

    pub fn emission_scores(&self, tokens: &[Token]) -> Vec<Vec<f64>> {
        self.emissions_from_ids(&self.feature_ids(tokens))
    }

    fn tag_indices(&self, tags: &[BioTag]) -> Result<Vec<usize>> {
        tags.iter()
            .map(|t| {
                self.tag_index(*t)
                    .ok_or_else(|| Error::Model(format!("tag {t} is not in the model's tag set")))
            })
            .collect()
    }

    /// Unnormalised log-potential of a tagging.
    pub fn log_score(&self, tokens: &[Token], tags: &[BioTag]) -> Result<f64> {
        if tags.len() != tokens.len() {
            return Err(Error::Shape {
                expected: tokens.len(),
                actual: tags.len(),
            });
        }
        if tokens.is_empty() {
            return Ok(0.0);
        }
        let path = self.tag_indices(tags)?;
        let em = self.emission_scores(tokens);
        Ok(self.lattice(&em).path_score(&path))
    }

    /// `log Z(tokens)`.
    pub fn partition(&self, tokens: &[Token]) -> Result<f64> {
        if tokens.is_empty() {
            return Err(Error::EmptyText);
        }
        let em = self.emission_scores(tokens);
        Ok(self.lattice(&em).log_partition())
    }

    /// Viterbi decode. Ties resolve to the earliest tag in `tag_set`.
    pub fn decode(&self, tokens: &[Token]) -> Result<Vec<BioTag>> {
        if tokens.is_empty() {
            return Err(Error::EmptyText);
        }
        let em = self.emission_scores(tokens);
        let (path, _) = self.lattice(&em).viterbi();
        Ok(path.into_iter().map(|i| self.tag_set[i]).collect())
    }

    pub fn marginals(&self, tokens: &[Token]) -> Result<Marginals> {
        if tokens.is_empty() {
            return Err(Error::EmptyText);
        }
        let em = self.emission_scores(tokens);
        Ok(self.lattice(&em).marginals())
    }

    /// Decoded tags repaired to valid BIO, and the spans they form.
    pub fn spans(&self, tokens: &[Token]) -> Result<(Vec<BioTag>, Vec<NerSpan>)> {
        let tags = repair(&self.decode(tokens)?);
        let spans = spans_from_tags(&tags);
        Ok((tags, spans))
    }

    pub fn semantic_view(&self, tokens: &[Token]) -> Result<Vec<f64>> {
        Ok(semantic_view_from_tags(&self.decode(tokens)?))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let body = serde_json::to_string(&CrfFile::from(self))?;
        fs::write(path, body).map_err(|e| Error::file(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let body = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::from_json(&body)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&CrfFile::from(self))?)
    }

    pub fn from_json(body: &str) -> Result<Self> {
        let file: CrfFile = serde_json::from_str(body)?;
        file.into_model()
    }
}

/// Pools a tag sequence into `[mass; 9] ++ [has_span; 9]`, both indexed by
/// [`EventClass::index`]. `O` mass goes to the `Other` slot; the `Other`
/// span flag is therefore always 0.
pub fn semantic_view_from_tags(tags: &[BioTag]) -> Vec<f64> {
    let k = EventClass::ALL.len();
    let mut v = vec![0.0; SEMANTIC_VIEW_DIM];
    if tags.is_empty() {
        return v;
    }
    let inv = 1.0 / tags.len() as f64;
    for t in tags {
        let slot = t.class().unwrap_or(EventClass::Other).index();
        v[slot] += inv;
    }
    for s in spans_from_tags(tags) {
        v[k + s.class.index()] = 1.0;
    }
    v
}

#[derive(Serialize, Deserialize)]
struct CrfFile {
    format: String,
    tag_set: Vec<BioTag>,
    /// Feature strings in id order.
    features: Vec<String>,
    emission_weights: Vec<f64>,
    transition_weights: Vec<f64>,
    l2_lambda: f64,
    extractor: FeatureExtractor,
}

impl From<&CrfModel> for CrfFile {
    fn from(m: &CrfModel) -> Self {
        let mut features = vec![String::new(); m.feature_vocab.len()];
        for (f, &i) in &m.feature_vocab {
            features[i] = f.clone();
        }
        CrfFile {
            format: CRF_FORMAT.to_string(),
            tag_set: m.tag_set.clone(),
            features,
            emission_weights: m.emission_weights.clone(),
            transition_weights: m.transition_weights.clone(),
            l2_lambda: m.l2_lambda,
            extractor: m.extractor.clone(),
        }
    }
}

impl CrfFile {
    fn into_model(self) -> Result<CrfModel> {
        if self.format != CRF_FORMAT {
            return Err(Error::Format(format!("expected {CRF_FORMAT}, found {:?}", self.format)));
        }
        let n = self.tag_set.len();
        if n == 0 {
            return Err(Error::Format("empty tag set".into()));
        }
        let shape = |expected: usize, actual: usize| {
            if expected == actual {
                Ok(())
            } else {
                Err(Error::Shape { expected, actual })
            }
        };
        shape(self.features.len() * n, self.emission_weights.len())?;
        shape((n + 1) * n, self.transition_weights.len())?;
        if !self
            .emission_weights
            .iter()
            .chain(&self.transition_weights)
            .all(|w| w.is_finite())
        {
            return Err(Error::Format("non-finite weight".into()));
        }
        Ok(CrfModel {
            tag_set: self.tag_set,
            feature_vocab: self.features.into_iter().enumerate().map(|(i, f)| (f, i)).collect(),
            emission_weights: self.emission_weights,
            transition_weights: self.transition_weights,
            l2_lambda: self.l2_lambda,
            extractor: self.extractor,
        })
    }
}
