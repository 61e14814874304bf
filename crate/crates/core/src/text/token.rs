//! Tweet tokenizer shared by the CRF, the windowed tagger and the dictionaries.
//!
//! Rules, applied left to right over the lowercased text:
//!
//! * URLs (`http://`, `https://`, `www.`) collapse to [`URL_TOKEN`].
//! * `@name` / `#tag` become one token with the sigil moved into [`TokenKind`].
//! * A run of digits (with inner `.`, `,` or `:` between digits) collapses to
//!   [`NUMBER_TOKEN`]. A word that *starts* with a letter keeps its digits, so
//!   `a40` stays whole while `10pm` becomes `<number> pm`.
//! * Word characters are alphanumerics and `_`; an apostrophe between two word
//!   characters stays inside the word (`what's`).
//! * Every other non-space character is its own punctuation token.
//!
//! The literal sentinels are recognised on input, which makes the tokenizer
//! idempotent on its own space-joined output.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUMBER_TOKEN: &str = "<number>";
pub const URL_TOKEN: &str = "<url>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenKind {
    Word,
    Mention,
    Hashtag,
    Url,
    Number,
    Punct,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    /// Normalised, lowercased form. Sentinels for numbers and URLs.
    pub text: String,
    pub kind: TokenKind,
    /// Surface form as it appeared in the input (sigil included).
    pub raw: String,
}

impl Token {
    pub fn is_sentinel(&self) -> bool {
        matches!(self.kind, TokenKind::Url | TokenKind::Number)
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

pub fn tokenize(text: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let lower: Vec<char> = chars
        .iter()
        .map(|c| {
            // Only single-char lowercase mappings keep the two arrays aligned.
            let mut l = c.to_lowercase();
            match (l.next(), l.next()) {
                (Some(x), None) => x,
                _ => *c,
            }
        })
        .collect();

    let mut out = Vec::new();
    let mut i = 0;
    let n = chars.len();
    let raw = |a: usize, b: usize| chars[a..b].iter().collect::<String>();

    while i < n {
        let c = lower[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }

        if let Some(len) = match_literal(&lower[i..], URL_TOKEN) {
            out.push(Token {
                text: URL_TOKEN.into(),
                kind: TokenKind::Url,
                raw: raw(i, i + len),
            });
            i += len;
            continue;
        }
        if let Some(len) = match_literal(&lower[i..], NUMBER_TOKEN) {
            out.push(Token {
                text: NUMBER_TOKEN.into(),
                kind: TokenKind::Number,
                raw: raw(i, i + len),
            });
            i += len;
            continue;
        }

        if starts_url(&lower[i..]) {
            let start = i;
            while i < n && !lower[i].is_whitespace() {
                i += 1;
            }
            out.push(Token {
                text: URL_TOKEN.into(),
                kind: TokenKind::Url,
                raw: raw(start, i),
            });
            continue;
        }

        if (c == '@' || c == '#') && i + 1 < n && is_word_char(lower[i + 1]) {
            let start = i;
            i += 1;
            let body_start = i;
            while i < n && is_word_char(lower[i]) {
                i += 1;
            }
            out.push(Token {
                text: lower[body_start..i].iter().collect(),
                kind: if c == '@' {
                    TokenKind::Mention
                } else {
                    TokenKind::Hashtag
                },
                raw: raw(start, i),
            });
            continue;
        }

        if c.is_ascii_digit() || (c.is_numeric() && !c.is_alphabetic()) {
            let start = i;
            i += 1;
            while i < n {
                if lower[i].is_ascii_digit() {
                    i += 1;
                } else if matches!(lower[i], '.' | ',' | ':') && i + 1 < n && lower[i + 1].is_ascii_digit() {
                    i += 2;
                } else {
                    break;
                }
            }
            out.push(Token {
                text: NUMBER_TOKEN.into(),
                kind: TokenKind::Number,
                raw: raw(start, i),
            });
            continue;
        }

        if is_word_char(c) {
            let start = i;
            while i < n {
                let inner_apostrophe = is_apostrophe(lower[i]) && i > start && i + 1 < n && is_word_char(lower[i + 1]);
                if is_word_char(lower[i]) || inner_apostrophe {
                    i += 1;
                } else {
                    break;
                }
            }
            out.push(Token {
                text: lower[start..i].iter().collect(),
                kind: TokenKind::Word,
                raw: raw(start, i),
            });
            continue;
        }

        out.push(Token {
            text: c.to_string(),
            kind: TokenKind::Punct,
            raw: chars[i].to_string(),
        });
        i += 1;
    }

    if out.is_empty() {
        return Err(Error::EmptyText);
    }
    Ok(out)
}

/// Canonical space-joined rendering: sigils restored, sentinels literal.
pub fn detokenize(tokens: &[Token]) -> String {
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        match t.kind {
            TokenKind::Mention => out.push('@'),
            TokenKind::Hashtag => out.push('#'),
            _ => {}
        }
        out.push_str(&t.text);
    }
    out
}

/// Token texts only; the common case for the sequence models.
pub fn tokenize_words(text: &str) -> Result<Vec<String>> {
    Ok(tokenize(text)?.into_iter().map(|t| t.text).collect())
}

fn match_literal(s: &[char], lit: &str) -> Option<usize> {
    let lit: Vec<char> = lit.chars().collect();
    (s.len() >= lit.len() && s[..lit.len()] == lit[..]).then_some(lit.len())
}

fn starts_url(s: &[char]) -> bool {
    ["http://", "https://", "www."]
        .iter()
        .any(|p| match_literal(s, p).is_some() && s.len() > p.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(s: &str) -> Vec<String> {
        tokenize_words(s).unwrap()
    }

    #[test]
    fn whitespace_only_is_empty() {
        assert!(matches!(tokenize(""), Err(Error::EmptyText)));
        assert!(matches!(tokenize("  \t\n "), Err(Error::EmptyText)));
    }

    #[test]
    fn number_prefix_splits_but_road_names_stay() {
        // Worked by hand: "10" is a digit run, "pm" a trailing word,
        // "A40" starts with a letter and keeps its digits.
        assert_eq!(
            texts("Traffic at 10pm on A40"),
            vec!["traffic", "at", "<number>", "pm", "on", "a40"]
        );
    }

    #[test]
    fn plain_sentence_has_no_sentinels() {
        let toks = tokenize("seeing someone being given a parking ticket").unwrap();
        assert_eq!(toks.len(), 7);
        assert!(toks.iter().all(|t| t.kind == TokenKind::Word));
        assert_eq!(toks[5].text, "parking");
    }

    #[test]
    fn mentions_hashtags_urls() {
        let toks = tokenize("Thanks @Alice see https://t.co/xyz #3points!").unwrap();
        let kinds: Vec<_> = toks.iter().map(|t| (t.text.as_str(), t.kind)).collect();
        assert_eq!(
            kinds,
            vec![
                ("thanks", TokenKind::Word),
                ("alice", TokenKind::Mention),
                ("see", TokenKind::Word),
                ("<url>", TokenKind::Url),
                ("3points", TokenKind::Hashtag),
                ("!", TokenKind::Punct),
            ]
        );
        assert_eq!(toks[1].raw, "@Alice");
    }

    #[test]
    fn decimals_and_times_are_one_number() {
        assert_eq!(
            texts("left at 12.40am, 4.9 °C"),
            vec!["left", "at", "<number>", "am", ",", "<number>", "°", "c"]
        );
        assert_eq!(texts("5-0"), vec!["<number>", "-", "<number>"]);
    }

    #[test]
    fn apostrophes_inside_words() {
        assert_eq!(texts("what's left isn't"), vec!["what's", "left", "isn't"]);
        assert_eq!(texts("'quoted'"), vec!["'", "quoted", "'"]);
    }

    #[test]
    fn lone_sigil_is_punctuation() {
        assert_eq!(
            texts("Rainbow food @ The Good Life Eatery"),
            vec!["rainbow", "food", "@", "the", "good", "life", "eatery"]
        );
    }

    #[test]
    fn sentinels_round_trip() {
        let once = tokenize("see www.tfl.gov.uk at 42 #2amHome").unwrap();
        let twice = tokenize(&detokenize(&once)).unwrap();
        let key = |v: &[Token]| v.iter().map(|t| (t.text.clone(), t.kind)).collect::<Vec<_>>();
        assert_eq!(key(&once), key(&twice));
    }
}
