use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::cnn::SYNTACTIC_VIEW_DIM;
use crate::crf::SEMANTIC_VIEW_DIM;
use crate::error::{Error, Result};
use crate::text::EventClass;

pub const MV_FORMAT: &str = "URBANPULSE-MV-v1";
pub const DEFAULT_TAU: f64 = 0.3;

/// Stacks the syntactic view over the semantic view.
pub fn concat_views(theta: &[f64], phi: &[f64], d1: usize, d2: usize) -> Result<Array1<f64>> {
    if theta.len() != d1 {
        return Err(Error::Shape {
            expected: d1,
            actual: theta.len(),
        });
    }
    if phi.len() != d2 {
        return Err(Error::Shape {
            expected: d2,
            actual: phi.len(),
        });
    }
    Ok(theta.iter().chain(phi).copied().collect())
}

/// `h_c = sum_j W[j, c] * (u_j + w_j)^2`.
pub fn hidden_activity(weights: ArrayView2<f64>, u: ArrayView1<f64>, w: ArrayView1<f64>) -> Array1<f64> {
    let sq = (&u + &w).mapv(|x| x * x);
    weights.t().dot(&sq)
}

/// The same quantity through the binomial expansion
/// `sum_j W u^2 + 2 sum_j W u w + sum_j W w^2`.
pub fn hidden_activity_expanded(weights: ArrayView2<f64>, u: ArrayView1<f64>, w: ArrayView1<f64>) -> Array1<f64> {
    let wt = weights.t();
    let uu = u.mapv(|x| x * x);
    let ww = w.mapv(|x| x * x);
    let uw = &u * &w;
    wt.dot(&uu) + 2.0 * wt.dot(&uw) + wt.dot(&ww)
}

pub fn log_softmax(scores: ArrayView1<f64>) -> Array1<f64> {
    let m = scores.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let lse = m + scores.mapv(|s| (s - m).exp()).sum().ln();
    scores.mapv(|s| s - lse)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub classes: Vec<EventClass>,
    pub scores: Vec<f64>,
    pub probs: Vec<f64>,
}

impl ClassScores {
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    pub fn max_prob(&self) -> f64 {
        self.probs[self.argmax()]
    }

    pub fn prob(&self, class: EventClass) -> Option<f64> {
        self.classes.iter().position(|c| *c == class).map(|i| self.probs[i])
    }
}

/// Log-linear head over the stacked views.
///
/// Scores are `s_c = sum_i W[i, c] v_i + k_c + sum_i b_i v_i`. The visible
/// bias term is shared by all classes and therefore cancels in the softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionModel {
    pub d1: usize,
    pub d2: usize,
    pub classes: Vec<EventClass>,
    /// `(d1 + d2) x |classes|`.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    pub k: Array1<f64>,
    pub tau: f64,
    pub trained: bool,
}

impl FusionModel {
    pub fn untrained(d1: usize, d2: usize) -> Self {
        let classes = EventClass::EVENTS.to_vec();
        let d = d1 + d2;
        FusionModel {
            d1,
            d2,
            w: Array2::zeros((d, classes.len())),
            b: Array1::zeros(d),
            k: Array1::zeros(classes.len()),
            classes,
            tau: DEFAULT_TAU,
            trained: false,
        }
    }

    /// Untrained model sized for the tagger views.
    pub fn for_views() -> Self {
        Self::untrained(SYNTACTIC_VIEW_DIM, SEMANTIC_VIEW_DIM)
    }

    pub fn dim(&self) -> usize {
        self.d1 + self.d2
    }

    pub fn concat(&self, theta: &[f64], phi: &[f64]) -> Result<Array1<f64>> {
        concat_views(theta, phi, self.d1, self.d2)
    }

    pub fn raw_scores(&self, v: ArrayView1<f64>) -> Result<Array1<f64>> {
        if v.len() != self.dim() {
            return Err(Error::Shape {
                expected: self.dim(),
                actual: v.len(),
            });
        }
        let shared = self.b.dot(&v);
        Ok(self.w.t().dot(&v) + &self.k + shared)
    }

    pub fn class_scores(&self, v: ArrayView1<f64>) -> Result<ClassScores> {
        let scores = self.raw_scores(v)?;
        let probs = log_softmax(scores.view()).mapv(f64::exp);
        Ok(ClassScores {
            classes: self.classes.clone(),
            scores: scores.to_vec(),
            probs: probs.to_vec(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&MvFile::from(self))?)
    }

    pub fn from_json(body: &str) -> Result<Self> {
        serde_json::from_str::<MvFile>(body)?.into_model()
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

#[derive(Serialize, Deserialize)]
struct MvFile {
    format: String,
    d1: usize,
    d2: usize,
    classes: Vec<EventClass>,
    w: Array2<f64>,
    b: Array1<f64>,
    k: Array1<f64>,
    tau: f64,
    trained: bool,
}

impl From<&FusionModel> for MvFile {
    fn from(m: &FusionModel) -> Self {
        MvFile {
            format: MV_FORMAT.into(),
            d1: m.d1,
            d2: m.d2,
            classes: m.classes.clone(),
            w: m.w.clone(),
            b: m.b.clone(),
            k: m.k.clone(),
            tau: m.tau,
            trained: m.trained,
        }
    }
}

impl MvFile {
    fn into_model(self) -> Result<FusionModel> {
        if self.format != MV_FORMAT {
            return Err(Error::Format(format!("expected {MV_FORMAT}, found {:?}", self.format)));
        }
        let d = self.d1 + self.d2;
        let c = self.classes.len();
        if self.w.dim() != (d, c) {
            return Err(Error::Shape {
                expected: d * c,
                actual: self.w.len(),
            });
        }
        if self.b.len() != d || self.k.len() != c {
            return Err(Error::Format("bias lengths do not match dims".into()));
        }
        if self.w.iter().chain(&self.b).chain(&self.k).any(|x| !x.is_finite()) {
            return Err(Error::Format("non-finite weight".into()));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::Format(format!("tau {} outside (0, 1)", self.tau)));
        }
        Ok(FusionModel {
            d1: self.d1,
            d2: self.d2,
            classes: self.classes,
            w: self.w,
            b: self.b,
            k: self.k,
            tau: self.tau,
            trained: self.trained,
        })
    }
}
