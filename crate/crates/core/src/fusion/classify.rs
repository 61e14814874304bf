use std::collections::BTreeSet;
use std::ops::Range;

use serde::Serialize;

use super::model::{ClassScores, FusionModel};
use super::train::FusionItem;
use crate::cnn::{boost_location, CnnModel};
use crate::crf::{semantic_view_from_tags, CrfModel};
use crate::error::{Error, Result};
use crate::text::{spans_from_tags, tokenize, BioTag, EventClass, NerSpan, Token};

/// Everything both taggers say about one text.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaggedText {
    #[serde(skip)]
    pub tokens: Vec<Token>,
    pub words: Vec<String>,
    pub crf_tags: Vec<BioTag>,
    /// CRF tags after merging the neural tagger's LOC ranges.
    pub tags: Vec<BioTag>,
    pub spans: Vec<NerSpan>,
    #[serde(skip)]
    pub loc_ranges: Vec<Range<usize>>,
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
}

impl TaggedText {
    pub fn has_event_span(&self) -> bool {
        self.spans.iter().any(|s| s.class != EventClass::Location)
    }

    pub fn location_spans(&self) -> impl Iterator<Item = &NerSpan> {
        self.spans.iter().filter(|s| s.class == EventClass::Location)
    }

    /// Surface text of a span, tokens joined by single spaces.
    pub fn span_text(&self, span: &NerSpan) -> String {
        self.words[span.start..span.end].join(" ")
    }
}

pub fn tag_text(crf: &CrfModel, cnn: &CnnModel, text: &str) -> Result<TaggedText> {
    let tokens = tokenize(text)?;
    let words: Vec<String> = tokens.iter().map(|t| t.text.clone()).collect();
    let crf_tags = crf.decode(&tokens)?;
    let (pos, ner) = cnn.tag(&words);
    let (loc_ranges, _) = crate::cnn::model::entity_spans_from_tags(&ner);
    let tags = boost_location(&crf_tags, &loc_ranges);
    let spans = spans_from_tags(&tags);
    let theta = crate::cnn::model::syntactic_view_from_tags(&pos, &ner);
    let phi = semantic_view_from_tags(&tags);
    Ok(TaggedText {
        tokens,
        words,
        crf_tags,
        tags,
        spans,
        loc_ranges,
        theta,
        phi,
    })
}

pub fn fusion_item(crf: &CrfModel, cnn: &CnnModel, text: &str, labels: BTreeSet<EventClass>) -> Result<FusionItem> {
    let t = tag_text(crf, cnn, text)?;
    Ok(FusionItem {
        theta: t.theta,
        phi: t.phi,
        labels,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub labels: BTreeSet<EventClass>,
    pub scores: ClassScores,
    pub tagged: TaggedText,
}

/// Applies the Other gate and the multi-label threshold to class scores.
pub fn decide_labels(scores: &ClassScores, has_event_span: bool, tau: f64) -> BTreeSet<EventClass> {
    if !has_event_span && scores.max_prob() < tau {
        return BTreeSet::from([EventClass::Other]);
    }
    let mut labels = BTreeSet::from([scores.classes[scores.argmax()]]);
    for (c, &p) in scores.classes.iter().zip(&scores.probs) {
        if p >= tau {
            labels.insert(*c);
        }
    }
    labels
}

pub fn classify(crf: &CrfModel, cnn: &CnnModel, fusion: &FusionModel, text: &str) -> Result<Classification> {
    if !fusion.trained {
        return Err(Error::Model("fusion model has not been trained".into()));
    }
    let tagged = tag_text(crf, cnn, text)?;
    let v = fusion.concat(&tagged.theta, &tagged.phi)?;
    let scores = fusion.class_scores(v.view())?;
    let labels = decide_labels(&scores, tagged.has_event_span(), fusion.tau);
    Ok(Classification { labels, scores, tagged })
}
