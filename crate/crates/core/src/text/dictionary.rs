//! Per-class phrase dictionaries and exact token-subsequence matching.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tags::{EventClass, NerSpan};
use super::token::tokenize_words;
use crate::error::{Error, Result};

/// Dropped from both phrase and sentence before dictionary matching only.
pub const STOP_WORDS: &[&str] = &[
    "a", "an", "the", "of", "at", "on", "in", "to", "for", "and", "or", "is", "are", "was", "were", "be", "by", "with",
    "from", "this", "that", "it", "its", "as",
];

pub fn is_stop_word(w: &str) -> bool {
    STOP_WORDS.contains(&w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDictionary {
    pub class: EventClass,
    /// Pre-tokenized phrases, deduplicated and ordered.
    pub phrases: BTreeSet<Vec<String>>,
    pub source: String,
}

impl ClassDictionary {
    pub fn from_lines<'a>(
        class: EventClass,
        source: impl Into<String>,
        lines: impl IntoIterator<Item = &'a str>,
    ) -> Result<Self> {
        let mut phrases = BTreeSet::new();
        for line in lines {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let toks = tokenize_words(line)?;
            phrases.insert(toks);
        }
        if phrases.is_empty() {
            return Err(Error::Config(format!("dictionary for {class} is empty")));
        }
        Ok(ClassDictionary {
            class,
            phrases,
            source: source.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.phrases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DictionarySet {
    pub dictionaries: Vec<ClassDictionary>,
}

impl DictionarySet {
    pub fn new(dictionaries: Vec<ClassDictionary>) -> Self {
        DictionarySet { dictionaries }
    }

    pub fn get(&self, class: EventClass) -> Option<&ClassDictionary> {
        self.dictionaries.iter().find(|d| d.class == class)
    }

    pub fn len(&self) -> usize {
        self.dictionaries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dictionaries.is_empty()
    }

    /// Every dictionary phrase occurrence in `tokens`, as spans over the
    /// original token positions. Stop words are skipped on both sides, so a
    /// match may cover stop words sitting between its content tokens.
    pub fn matches(&self, tokens: &[String]) -> Vec<NerSpan> {
        let content: Vec<usize> = (0..tokens.len()).filter(|&i| !is_stop_word(&tokens[i])).collect();
        let mut out = Vec::new();
        for dict in &self.dictionaries {
            for phrase in &dict.phrases {
                let key: Vec<&String> = phrase.iter().filter(|w| !is_stop_word(w)).collect();
                if key.is_empty() || key.len() > content.len() {
                    continue;
                }
                for start in 0..=(content.len() - key.len()) {
                    let hit = key.iter().enumerate().all(|(k, w)| tokens[content[start + k]] == **w);
                    if hit {
                        out.push(NerSpan::new(
                            dict.class,
                            content[start],
                            content[start + key.len() - 1] + 1,
                        ));
                    }
                }
            }
        }
        out.sort();
        out.dedup();
        out
    }
}

fn file_name_candidates(class: EventClass) -> [String; 2] {
    [
        format!("{}.txt", class.name().to_lowercase()),
        format!("{}.txt", class.name()),
    ]
}

/// Loads one `<class>.txt` file per span class (all classes except `Other`).
pub fn load_dictionaries(dir: impl AsRef<Path>) -> Result<DictionarySet> {
    let dir = dir.as_ref();
    let mut dictionaries = Vec::with_capacity(EventClass::SPAN.len());
    for class in EventClass::SPAN {
        let path = file_name_candidates(class)
            .into_iter()
            .map(|name| dir.join(name))
            .find(|p| p.is_file())
            .ok_or_else(|| Error::Config(class.name().to_string()))?;
        let body = fs::read_to_string(&path).map_err(|e| Error::file(&path, e))?;
        let dict = ClassDictionary::from_lines(class, path.display().to_string(), body.lines())
            .map_err(|_| Error::Config(format!("{}: empty dictionary for {class}", path.display())))?;
        dictionaries.push(dict);
    }
    Ok(DictionarySet::new(dictionaries))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_all(dir: &Path, skip: Option<EventClass>) {
        for c in EventClass::SPAN {
            if Some(c) == skip {
                continue;
            }
            let name = format!("{}.txt", c.name().to_lowercase());
            fs::write(dir.join(name), format!("# comment\n{} thing\n", c.name())).unwrap();
        }
    }

    #[test]
    fn minimal_fixture_loads_eight_dictionaries() {
        let dir = tempfile::tempdir().unwrap();
        write_all(dir.path(), None);
        let set = load_dictionaries(dir.path()).unwrap();
        assert_eq!(set.len(), 8);
        assert!(set.dictionaries.iter().all(|d| d.len() == 1));
        assert!(set.get(EventClass::Other).is_none());
    }

    #[test]
    fn missing_class_file_names_the_class() {
        let dir = tempfile::tempdir().unwrap();
        write_all(dir.path(), Some(EventClass::Sport));
        match load_dictionaries(dir.path()) {
            Err(Error::Config(msg)) => assert_eq!(msg, "Sport"),
            other => panic!("expected ConfigError, got {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_config_error() {
        let dir = tempfile::tempdir().unwrap();
        write_all(dir.path(), None);
        fs::write(dir.path().join("food.txt"), "# only a comment\n\n").unwrap();
        assert!(matches!(load_dictionaries(dir.path()), Err(Error::Config(_))));
    }

    #[test]
    fn phrases_are_deduplicated_and_tokenized() {
        let d = ClassDictionary::from_lines(
            EventClass::Location,
            "test",
            ["Piccadilly Circus", "piccadilly circus", "A40"],
        )
        .unwrap();
        assert_eq!(d.len(), 2);
        assert!(d
            .phrases
            .contains(&vec!["piccadilly".to_string(), "circus".to_string()]));
    }

    #[test]
    fn matching_skips_stop_words() {
        let d = ClassDictionary::from_lines(EventClass::Social, "t", ["house of commons"]).unwrap();
        let set = DictionarySet::new(vec![d]);
        let toks: Vec<String> = ["protest", "at", "house", "of", "commons"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(set.matches(&toks), vec![NerSpan::new(EventClass::Social, 2, 5)]);
    }
}
