//! Local feature templates for the CRF emission factors.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::text::dictionary::DictionarySet;
use crate::text::{EventClass, Token};

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureExtractor {
    pub dictionaries: DictionarySet,
}

/// Coarse orthographic class of the surface form.
pub fn shape(raw: &str) -> &'static str {
    let letters: Vec<char> = raw.chars().filter(|c| c.is_alphabetic()).collect();
    if !letters.is_empty() && letters.iter().all(|c| c.is_uppercase()) && letters.len() > 1 {
        "allcaps"
    } else if raw.chars().next().is_some_and(|c| c.is_uppercase()) {
        "capitalized"
    } else if raw.chars().any(|c| c.is_numeric()) {
        "hasdigit"
    } else {
        "other"
    }
}

fn prefix(s: &str, n: usize) -> String {
    s.chars().take(n).collect()
}

fn suffix(s: &str, n: usize) -> String {
    let chars: Vec<char> = s.chars().collect();
    chars[chars.len().saturating_sub(n)..].iter().collect()
}

impl FeatureExtractor {
    pub fn new(dictionaries: DictionarySet) -> Self {
        FeatureExtractor { dictionaries }
    }

    /// Dictionary classes covering each position.
    fn dictionary_hits(&self, tokens: &[Token]) -> Vec<BTreeSet<EventClass>> {
        let words: Vec<String> = tokens.iter().map(|t| t.text.clone()).collect();
        let mut hits = vec![BTreeSet::new(); tokens.len()];
        for span in self.dictionaries.matches(&words) {
            for h in &mut hits[span.start..span.end] {
                h.insert(span.class);
            }
        }
        hits
    }

    fn position_features(tokens: &[Token], position: usize, hits: &BTreeSet<EventClass>) -> Vec<String> {
        let tok = &tokens[position];
        let mut f = Vec::with_capacity(8 + hits.len());
        f.push(format!("w={}", tok.text));
        f.push(format!("shape={}", shape(&tok.raw)));
        f.push(format!("p3={}", prefix(&tok.text, 3)));
        f.push(format!("s3={}", suffix(&tok.text, 3)));
        let prev = if position == 0 {
            BOS
        } else {
            tokens[position - 1].text.as_str()
        };
        let next = tokens.get(position + 1).map(|t| t.text.as_str()).unwrap_or(EOS);
        f.push(format!("w-1={prev}"));
        f.push(format!("w+1={next}"));
        for class in hits {
            f.push(format!("dict={class}"));
        }
        f
    }

    pub fn extract(&self, tokens: &[Token], position: usize) -> Vec<String> {
        assert!(position < tokens.len(), "position {position} out of range");
        let hits = self.dictionary_hits(tokens);
        Self::position_features(tokens, position, &hits[position])
    }

    /// Features for every position, computing dictionary matches once.
    pub fn extract_all(&self, tokens: &[Token]) -> Vec<Vec<String>> {
        let hits = self.dictionary_hits(tokens);
        (0..tokens.len())
            .map(|i| Self::position_features(tokens, i, &hits[i]))
            .collect()
    }
}
