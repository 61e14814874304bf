//! Part-of-speech training corpus: JSON Lines of
//! `{"tokens":[..],"pos":[..],"ner":[..]}` with `ner` optional.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{entity_index, pos_index, ENTITY_TAGS, UPOS};
use crate::error::{Error, Result};
use crate::text::corpus::Lines;
use crate::text::token::{tokenize, NUMBER_TOKEN, URL_TOKEN};

/// Tokens with tag indices into [`UPOS`] and, optionally, [`ENTITY_TAGS`].
#[derive(Debug, Clone, PartialEq)]
pub struct PosSentence {
    pub tokens: Vec<String>,
    pub pos: Vec<usize>,
    pub ner: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PosRecord {
    tokens: Vec<String>,
    pos: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ner: Option<Vec<String>>,
}

/// Maps a pre-split corpus token onto the tagger vocabulary the same way the
/// tweet tokenizer would: lowercased, numbers and URLs as sentinels.
pub fn normalize_word(word: &str) -> String {
    match tokenize(word) {
        Ok(toks) if toks.len() == 1 => toks[0].text.clone(),
        Ok(toks) if toks.first().is_some_and(|t| t.text == URL_TOKEN) => URL_TOKEN.to_string(),
        Ok(toks) if toks.iter().all(|t| t.text == NUMBER_TOKEN) => NUMBER_TOKEN.to_string(),
        _ => word.to_lowercase(),
    }
}

impl PosSentence {
    pub fn new(tokens: Vec<String>, pos: Vec<usize>, ner: Option<Vec<usize>>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::invalid("tokens", "sentence is empty"));
        }
        if pos.len() != tokens.len() {
            return Err(Error::Shape {
                expected: tokens.len(),
                actual: pos.len(),
            });
        }
        if let Some(n) = &ner {
            if n.len() != tokens.len() {
                return Err(Error::Shape {
                    expected: tokens.len(),
                    actual: n.len(),
                });
            }
        }
        Ok(PosSentence { tokens, pos, ner })
    }

    fn from_record(r: PosRecord) -> Result<Self> {
        let pos = r
            .pos
            .iter()
            .map(|t| pos_index(t).ok_or_else(|| Error::invalid("pos", format!("unknown tag {t:?}"))))
            .collect::<Result<Vec<_>>>()?;
        let ner = r
            .ner
            .map(|tags| {
                tags.iter()
                    .map(|t| entity_index(t).ok_or_else(|| Error::invalid("ner", format!("unknown tag {t:?}"))))
                    .collect::<Result<Vec<_>>>()
            })
            .transpose()?;
        let tokens = r.tokens.iter().map(|w| normalize_word(w)).collect();
        PosSentence::new(tokens, pos, ner)
    }

    fn to_record(&self) -> PosRecord {
        PosRecord {
            tokens: self.tokens.clone(),
            pos: self.pos.iter().map(|&i| UPOS[i].to_string()).collect(),
            ner: self
                .ner
                .as_ref()
                .map(|n| n.iter().map(|&i| ENTITY_TAGS[i].to_string()).collect()),
        }
    }
}

pub fn read_pos_corpus(reader: impl BufRead) -> Result<Lines<PosSentence>> {
    let mut items = Vec::new();
    let mut skipped = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<PosRecord>(&line)
            .map_err(Error::from)
            .and_then(PosSentence::from_record);
        match parsed {
            Ok(s) => items.push(s),
            Err(e) => skipped.push((i + 1, e.to_string())),
        }
    }
    Ok(Lines { items, skipped })
}

pub fn write_pos_corpus<W: Write>(mut w: W, sentences: &[PosSentence]) -> Result<()> {
    for s in sentences {
        serde_json::to_writer(&mut w, &s.to_record())?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
