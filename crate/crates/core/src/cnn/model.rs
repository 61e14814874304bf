use std::collections::HashMap;
use std::fs;
use std::ops::Range;
use std::path::Path;

use ndarray::{s, Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use super::{ENTITY_TAGS, PAD, UNK, UPOS};
use crate::error::{Error, Result};
use crate::text::token::{NUMBER_TOKEN, URL_TOKEN};

pub const CNN_FORMAT: &str = "URBANPULSE-CNN-v1";

/// Part-of-speech histogram followed by the LOC and ORG span flags.
pub const SYNTACTIC_VIEW_DIM: usize = UPOS.len() + 2;

pub fn hardtanh(u: f64) -> f64 {
    u.clamp(-1.0, 1.0)
}

/// Reserved vocabulary entries, always at these indices.
pub const RESERVED: [&str; 4] = [PAD, UNK, NUMBER_TOKEN, URL_TOKEN];
pub const PAD_INDEX: usize = 0;
pub const UNK_INDEX: usize = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel {
    pub vocab: HashMap<String, usize>,
    /// `|vocab| x dim` lookup table.
    pub embed: Array2<f64>,
    /// `hidden x (window * dim)`.
    pub m1: Array2<f64>,
    /// `|UPOS| x hidden`.
    pub m2_pos: Array2<f64>,
    /// `|ENTITY_TAGS| x hidden`.
    pub m2_ner: Array2<f64>,
    pub window: usize,
}

/// Intermediate values of one position's forward pass.
#[derive(Debug, Clone)]
pub struct Activations {
    pub indices: Vec<usize>,
    pub x: Array1<f64>,
    pub pre: Array1<f64>,
    pub hidden: Array1<f64>,
    pub pos_scores: Array1<f64>,
    pub ner_scores: Array1<f64>,
}

fn argmax(v: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

impl CnnModel {
    /// All-zero model whose vocabulary is the reserved entries plus `words`.
    pub fn zeros<I, S>(words: I, dim: usize, window: usize, hidden: usize) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        if window.is_multiple_of(2) || window == 0 {
            return Err(Error::Config(format!("window size must be odd, got {window}")));
        }
        if dim == 0 || hidden == 0 {
            return Err(Error::Config("dim and hidden must be positive".into()));
        }
        let mut vocab: HashMap<String, usize> = HashMap::new();
        for w in RESERVED {
            let n = vocab.len();
            vocab.insert(w.to_string(), n);
        }
        for w in words {
            let n = vocab.len();
            vocab.entry(w.as_ref().to_string()).or_insert(n);
        }
        Ok(CnnModel {
            embed: Array2::zeros((vocab.len(), dim)),
            m1: Array2::zeros((hidden, window * dim)),
            m2_pos: Array2::zeros((UPOS.len(), hidden)),
            m2_ner: Array2::zeros((ENTITY_TAGS.len(), hidden)),
            vocab,
            window,
        })
    }

    pub fn dim(&self) -> usize {
        self.embed.ncols()
    }

    pub fn hidden(&self) -> usize {
        self.m1.nrows()
    }

    pub fn word_index(&self, word: &str) -> usize {
        self.vocab.get(word).copied().unwrap_or(UNK_INDEX)
    }

    /// Lookup-table row for `word`; unknown words share the `<unk>` row.
    pub fn lookup(&self, word: &str) -> ArrayView1<'_, f64> {
        self.embed.row(self.word_index(word))
    }

    /// Vocabulary indices of the window centred on `position`, padded at the
    /// sentence edges.
    pub fn window_indices<S: AsRef<str>>(&self, words: &[S], position: usize) -> Vec<usize> {
        let half = (self.window / 2) as isize;
        (-half..=half)
            .map(|off| {
                let j = position as isize + off;
                if j < 0 || j >= words.len() as isize {
                    PAD_INDEX
                } else {
                    self.word_index(words[j as usize].as_ref())
                }
            })
            .collect()
    }

    /// Concatenated window embedding, `window * dim` long.
    pub fn window<S: AsRef<str>>(&self, words: &[S], position: usize) -> Array1<f64> {
        assert!(position < words.len(), "position {position} out of range");
        let d = self.dim();
        let mut x = Array1::zeros(self.window * d);
        for (k, idx) in self.window_indices(words, position).into_iter().enumerate() {
            x.slice_mut(s![k * d..(k + 1) * d]).assign(&self.embed.row(idx));
        }
        x
    }

    pub fn forward<S: AsRef<str>>(&self, words: &[S], position: usize) -> Activations {
        let indices = self.window_indices(words, position);
        let x = self.window(words, position);
        let pre = self.m1.dot(&x);
        let hidden = pre.mapv(hardtanh);
        let pos_scores = self.m2_pos.dot(&hidden);
        let ner_scores = self.m2_ner.dot(&hidden);
        Activations {
            indices,
            x,
            pre,
            hidden,
            pos_scores,
            ner_scores,
        }
    }

    /// Part-of-speech scores at `position`, one per [`UPOS`] tag.
    pub fn score_tags<S: AsRef<str>>(&self, words: &[S], position: usize) -> Array1<f64> {
        self.forward(words, position).pos_scores
    }

    /// Argmax part-of-speech and entity tag indices per token.
    pub fn tag<S: AsRef<str>>(&self, words: &[S]) -> (Vec<usize>, Vec<usize>) {
        (0..words.len())
            .map(|j| {
                let a = self.forward(words, j);
                (argmax(a.pos_scores.view()), argmax(a.ner_scores.view()))
            })
            .unzip()
    }

    /// LOC and ORG spans from the entity head, orphan `I-` starting a span.
    pub fn entity_spans<S: AsRef<str>>(&self, words: &[S]) -> (Vec<Range<usize>>, Vec<Range<usize>>) {
        let (_, ner) = self.tag(words);
        entity_spans_from_tags(&ner)
    }

    pub fn loc_spans<S: AsRef<str>>(&self, words: &[S]) -> Vec<Range<usize>> {
        self.entity_spans(words).0
    }

    /// Normalised part-of-speech histogram plus LOC/ORG presence flags.
    pub fn syntactic_view<S: AsRef<str>>(&self, words: &[S]) -> Result<Vec<f64>> {
        if words.is_empty() {
            return Err(Error::EmptyText);
        }
        let (pos, ner) = self.tag(words);
        Ok(syntactic_view_from_tags(&pos, &ner))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&CnnFile::from(self))?)
    }

    pub fn from_json(body: &str) -> Result<Self> {
        serde_json::from_str::<CnnFile>(body)?.into_model()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::file(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let body = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::from_json(&body)
    }
}

/// Groups entity-head tag indices into LOC and ORG ranges.
pub fn entity_spans_from_tags(ner: &[usize]) -> (Vec<Range<usize>>, Vec<Range<usize>>) {
    let mut loc: Vec<Range<usize>> = Vec::new();
    let mut org: Vec<Range<usize>> = Vec::new();
    // 0 = none, 1 = LOC, 2 = ORG
    let mut open = 0;
    for (j, &t) in ner.iter().enumerate() {
        let (kind, begin) = match ENTITY_TAGS[t] {
            "B-LOC" => (1, true),
            "I-LOC" => (1, false),
            "B-ORG" => (2, true),
            "I-ORG" => (2, false),
            _ => (0, false),
        };
        let target = match kind {
            1 => &mut loc,
            2 => &mut org,
            _ => {
                open = 0;
                continue;
            }
        };
        if begin || open != kind {
            target.push(j..j + 1);
        } else if let Some(last) = target.last_mut() {
            last.end = j + 1;
        }
        open = kind;
    }
    (loc, org)
}

pub fn syntactic_view_from_tags(pos: &[usize], ner: &[usize]) -> Vec<f64> {
    let mut v = vec![0.0; SYNTACTIC_VIEW_DIM];
    if pos.is_empty() {
        return v;
    }
    let inv = 1.0 / pos.len() as f64;
    for &p in pos {
        v[p] += inv;
    }
    let (loc, org) = entity_spans_from_tags(ner);
    v[UPOS.len()] = if loc.is_empty() { 0.0 } else { 1.0 };
    v[UPOS.len() + 1] = if org.is_empty() { 0.0 } else { 1.0 };
    v
}

#[derive(Serialize, Deserialize)]
struct CnnFile {
    format: String,
    dim: usize,
    window: usize,
    hidden: usize,
    pos_tags: Vec<String>,
    entity_tags: Vec<String>,
    /// Words in index order.
    vocab: Vec<String>,
    embed: Array2<f64>,
    m1: Array2<f64>,
    m2_pos: Array2<f64>,
    m2_ner: Array2<f64>,
}

impl From<&CnnModel> for CnnFile {
    fn from(m: &CnnModel) -> Self {
        let mut vocab = vec![String::new(); m.vocab.len()];
        for (w, &i) in &m.vocab {
            vocab[i] = w.clone();
        }
        CnnFile {
            format: CNN_FORMAT.into(),
            dim: m.dim(),
            window: m.window,
            hidden: m.hidden(),
            pos_tags: UPOS.iter().map(|s| s.to_string()).collect(),
            entity_tags: ENTITY_TAGS.iter().map(|s| s.to_string()).collect(),
            vocab,
            embed: m.embed.clone(),
            m1: m.m1.clone(),
            m2_pos: m.m2_pos.clone(),
            m2_ner: m.m2_ner.clone(),
        }
    }
}

impl CnnFile {
    fn into_model(self) -> Result<CnnModel> {
        if self.format != CNN_FORMAT {
            return Err(Error::Format(format!("expected {CNN_FORMAT}, found {:?}", self.format)));
        }
        if self.pos_tags != UPOS || self.entity_tags != ENTITY_TAGS {
            return Err(Error::Format("unsupported tag inventory".into()));
        }
        if self.vocab.len() < RESERVED.len() || self.vocab[..RESERVED.len()] != RESERVED {
            return Err(Error::Format("vocabulary lacks reserved entries".into()));
        }
        let check = |(r, c): (usize, usize), a: &Array2<f64>| {
            if a.dim() != (r, c) {
                Err(Error::Shape {
                    expected: r * c,
                    actual: a.len(),
                })
            } else if a.iter().any(|x| !x.is_finite()) {
                Err(Error::Format("non-finite weight".into()))
            } else {
                Ok(())
            }
        };
        check((self.vocab.len(), self.dim), &self.embed)?;
        check((self.hidden, self.window * self.dim), &self.m1)?;
        check((UPOS.len(), self.hidden), &self.m2_pos)?;
        check((ENTITY_TAGS.len(), self.hidden), &self.m2_ner)?;
        if self.window.is_multiple_of(2) {
            return Err(Error::Format("window size must be odd".into()));
        }
        Ok(CnnModel {
            vocab: self.vocab.into_iter().enumerate().map(|(i, w)| (w, i)).collect(),
            embed: self.embed,
            m1: self.m1,
            m2_pos: self.m2_pos,
            m2_ner: self.m2_ner,
            window: self.window,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnn::pos_index;
    use crate::text::tokenize_words;
    use ndarray::array;

    fn toy(dim: usize, window: usize, hidden: usize) -> CnnModel {
        let mut m = CnnModel::zeros(["the", "bus", "stops"], dim, window, hidden).unwrap();
        for (i, mut row) in m.embed.rows_mut().into_iter().enumerate() {
            row.fill(i as f64);
        }
        m
    }

    #[test]
    fn hardtanh_cases() {
        assert_eq!(hardtanh(-2.0), -1.0);
        assert_eq!(hardtanh(0.5), 0.5);
        assert_eq!(hardtanh(3.0), 1.0);
        for u in [-3.0, -1.0, -0.2, 0.0, 0.7, 1.0, 4.5] {
            assert_eq!(hardtanh(-u), -hardtanh(u));
        }
    }

    #[test]
    fn even_window_rejected() {
        assert!(matches!(CnnModel::zeros(["a"], 2, 4, 2), Err(Error::Config(_))));
    }

    #[test]
    fn lookup_rows() {
        let m = toy(2, 3, 1);
        assert_eq!(m.lookup("bus").to_vec(), vec![5.0, 5.0]);
        assert_eq!(m.lookup("tram").to_vec(), vec![UNK_INDEX as f64; 2]);
        let words = tokenize_words("42").unwrap();
        assert_eq!(m.lookup(&words[0]).to_vec(), vec![2.0, 2.0]);
    }

    #[test]
    fn windows_pad_at_edges() {
        let m = toy(2, 3, 1);
        assert_eq!(m.window(&["bus"], 0).to_vec(), vec![0.0, 0.0, 5.0, 5.0, 0.0, 0.0]);
        let m5 = toy(1, 5, 1);
        let s = ["the", "bus", "stops", "the", "bus"];
        assert_eq!(m5.window(&s, 0).to_vec(), vec![0.0, 0.0, 4.0, 5.0, 6.0]);
        // interior position assembled by hand
        assert_eq!(m5.window(&s, 2).to_vec(), vec![4.0, 5.0, 6.0, 4.0, 5.0]);
    }

    #[test]
    fn zero_weights_score_zero() {
        let m = toy(3, 3, 4);
        assert!(m.score_tags(&["the", "bus"], 1).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn hand_computed_scores() {
        // D=1, K=1, H=1: s = M2 * hardtanh(M1 * e)
        let mut m = CnnModel::zeros(["bus"], 1, 1, 1).unwrap();
        m.embed[[4, 0]] = 0.5;
        m.m1 = array![[3.0]];
        m.m2_pos[[0, 0]] = 2.0;
        m.m2_pos[[1, 0]] = -1.5;
        let s = m.score_tags(&["bus"], 0);
        // hardtanh(1.5) = 1
        assert_eq!(s[0], 2.0);
        assert_eq!(s[1], -1.5);
        m.m1 = array![[0.4]];
        let s = m.score_tags(&["bus"], 0);
        assert!((s[0] - 0.4).abs() < 1e-15);
        assert!((s[1] + 0.3).abs() < 1e-15);
    }

    #[test]
    fn scores_are_window_local() {
        let mut m = toy(2, 3, 3);
        m.m1.iter_mut().enumerate().for_each(|(i, w)| *w = 0.01 * i as f64);
        m.m2_pos.fill(0.3);
        let a = m.score_tags(&["the", "bus", "stops", "the", "bus"], 1);
        let b = m.score_tags(&["the", "bus", "stops", "zzz", "yyy"], 1);
        assert_eq!(a, b);
    }

    #[test]
    fn view_histogram_and_flags() {
        let n = pos_index("NOUN").unwrap();
        let v = syntactic_view_from_tags(&[n, n, n], &[0, 0, 0]);
        assert_eq!(v[n], 1.0);
        assert_eq!(v[17] + v[18], 0.0);
        let d = pos_index("DET").unwrap();
        let v = syntactic_view_from_tags(&[d, n, n, 15], &[0, 1, 2, 3]);
        assert_eq!(v[d], 0.25);
        assert_eq!(v[n], 0.5);
        assert_eq!(v[15], 0.25);
        assert_eq!(v[17], 1.0);
        assert_eq!(v[18], 1.0);
        assert!((v[..17].iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn entity_runs() {
        // O B-LOC I-LOC I-ORG O I-LOC
        let (loc, org) = entity_spans_from_tags(&[0, 1, 2, 4, 0, 2]);
        assert_eq!(loc, vec![1..3, 5..6]);
        assert_eq!(org, vec![3..4]);
    }

    #[test]
    fn json_round_trip() {
        let mut m = toy(2, 3, 2);
        m.m1[[1, 3]] = 0.1 + 0.2;
        let back = CnnModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        let bad = m.to_json().unwrap().replace(CNN_FORMAT, "X");
        assert!(CnnModel::from_json(&bad).is_err());
    }
}
