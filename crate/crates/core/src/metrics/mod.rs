//! Psycholinguistic and self-disclosure metrics over turn text.
//!
//! Lexical diversity is the type-token ratio scaled to 0..100, readability is
//! the Flesch-Kincaid grade, concreteness is the mean z-score of lexicon hits,
//! and idea density is an approximate proposition ratio driven by a wordlist
//! plus suffix rules rather than a part-of-speech tagger.

mod lexicon;
mod tokenize;
mod valence;

use std::collections::HashSet;

use serde::Serialize;
use thiserror::Error;

use crate::session::{Role, Turn};

pub use lexicon::{ConcretenessLexicon, LexiconSet, PropositionRules, ValenceLexicon, WordClass};
pub use tokenize::{normalize_word, tokenize, TokenizedText};
pub use valence::{valence, VALENCE_ALPHA};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("no lexicon coverage: {hits} of {tokens} tokens rated")]
    Coverage { hits: usize, tokens: usize },
    #[error("lexicon {source_name} line {line}: {reason}")]
    Lexicon {
        source_name: String,
        line: usize,
        reason: String,
    },
}

impl MetricError {
    pub fn code(&self) -> &'static str {
        match self {
            MetricError::Validation(_) => "validation",
            MetricError::Coverage { .. } => "coverage",
            MetricError::Lexicon { .. } => "lexicon",
        }
    }

    pub(crate) fn lexicon(source: &str, line: usize, reason: impl Into<String>) -> Self {
        MetricError::Lexicon {
            source_name: source.to_string(),
            line,
            reason: reason.into(),
        }
    }
}

const FIRST_PERSON: [&str; 5] = ["i", "me", "my", "mine", "myself"];

fn require_tokens(t: &TokenizedText) -> Result<(), MetricError> {
    if t.tokens.is_empty() {
        Err(MetricError::Validation("text has no word tokens".into()))
    } else {
        Ok(())
    }
}

/// Unique tokens over total tokens, times 100.
pub fn type_token_ratio(t: &TokenizedText) -> Result<f64, MetricError> {
    require_tokens(t)?;
    let types: HashSet<&str> = t.tokens.iter().map(String::as_str).collect();
    Ok(100.0 * types.len() as f64 / t.tokens.len() as f64)
}

/// Vowel-group syllable heuristic. A final `e` standing alone as the last
/// vowel group is treated as silent unless it is the only group.
pub fn count_syllables(word: &str) -> Result<u32, MetricError> {
    let letters: String = word.chars().filter(|c| *c != '\'').collect();
    if letters.is_empty() || !letters.chars().all(|c| c.is_ascii_alphabetic()) {
        return Err(MetricError::Validation(format!(
            "{word:?} is not an alphabetic word"
        )));
    }
    Ok(vowel_groups(&letters.to_ascii_lowercase()))
}

fn vowel_groups(lower: &str) -> u32 {
    let is_vowel = |c: u8| matches!(c, b'a' | b'e' | b'i' | b'o' | b'u' | b'y');
    let bytes = lower.as_bytes();
    let mut groups = 0u32;
    let mut prev_vowel = false;
    for &b in bytes {
        let v = is_vowel(b);
        if v && !prev_vowel {
            groups += 1;
        }
        prev_vowel = v;
    }
    let n = bytes.len();
    let lone_final_e = n >= 2 && bytes[n - 1] == b'e' && !is_vowel(bytes[n - 2]);
    if groups > 1 && lone_final_e {
        groups -= 1;
    }
    groups.max(1)
}

/// Syllables for arbitrary tokens: non-letters are ignored and tokens with no
/// ASCII letters (numbers, other scripts) count as one syllable.
fn token_syllables(token: &str) -> u32 {
    let letters: String = token
        .chars()
        .filter(|c| c.is_ascii_alphabetic())
        .map(|c| c.to_ascii_lowercase())
        .collect();
    if letters.is_empty() {
        1
    } else {
        vowel_groups(&letters)
    }
}

/// Flesch-Kincaid grade: `0.39 * words/sentence + 11.8 * syllables/word - 15.59`.
pub fn readability_grade(t: &TokenizedText) -> Result<f64, MetricError> {
    require_tokens(t)?;
    let words = t.tokens.len() as f64;
    let sentences = t.sentences.len() as f64;
    let syllables: u32 = t.tokens.iter().map(|w| token_syllables(w)).sum();
    Ok(0.39 * (words / sentences) + 11.8 * (syllables as f64 / words) - 15.59)
}

/// Mean z-score of the rated tokens.
pub fn concreteness(t: &TokenizedText, lex: &ConcretenessLexicon) -> Result<f64, MetricError> {
    let zs: Vec<f64> = t
        .tokens
        .iter()
        .filter_map(|w| lex.rating(w))
        .map(|r| (r - lex.population_mean) / lex.population_sd)
        .collect();
    if zs.is_empty() {
        return Err(MetricError::Coverage {
            hits: 0,
            tokens: t.tokens.len(),
        });
    }
    Ok(zs.iter().sum::<f64>() / zs.len() as f64)
}

/// Proposition-bearing tokens over all tokens (approximate).
pub fn idea_density(t: &TokenizedText, rules: &PropositionRules) -> Result<f64, MetricError> {
    require_tokens(t)?;
    let props = t.tokens.iter().filter(|w| rules.is_proposition(w)).count();
    Ok(props as f64 / t.tokens.len() as f64)
}

pub fn first_person_count(t: &TokenizedText) -> usize {
    t.tokens
        .iter()
        .filter(|w| FIRST_PERSON.contains(&w.as_str()))
        .count()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelfDisclosureStats {
    pub turns: usize,
    pub mean_length_words: f64,
    pub mean_first_person: f64,
    pub mean_valence: f64,
}

/// Per-turn word count, first-person count and valence, averaged over the
/// user turns in `turns`; other roles are ignored.
pub fn self_disclosure(turns: &[Turn], lex: &ValenceLexicon) -> Result<SelfDisclosureStats, MetricError> {
    let mut n = 0usize;
    let (mut len, mut fp, mut val) = (0.0, 0.0, 0.0);
    for turn in turns.iter().filter(|t| t.role == Role::User) {
        let t = tokenize(&turn.text)?;
        n += 1;
        len += t.token_count() as f64;
        fp += first_person_count(&t) as f64;
        val += valence(&t, lex);
    }
    if n == 0 {
        return Err(MetricError::Validation("no user turns".into()));
    }
    let n_f = n as f64;
    Ok(SelfDisclosureStats {
        turns: n,
        mean_length_words: len / n_f,
        mean_first_person: fp / n_f,
        mean_valence: val / n_f,
    })
}

/// Lexical diversity, readability and concreteness for one text.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinguisticMetrics {
    pub tokens: usize,
    pub sentences: usize,
    pub type_token_ratio: f64,
    pub readability_grade: f64,
    /// `None` when no token is in the concreteness lexicon.
    pub concreteness: Option<f64>,
    pub idea_density: f64,
}

pub fn linguistic_metrics(text: &str, lex: &LexiconSet) -> Result<LinguisticMetrics, MetricError> {
    let t = tokenize(text)?;
    let concreteness = match concreteness(&t, &lex.concreteness) {
        Ok(v) => Some(v),
        Err(MetricError::Coverage { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(LinguisticMetrics {
        tokens: t.token_count(),
        sentences: t.sentence_count(),
        type_token_ratio: type_token_ratio(&t)?,
        readability_grade: readability_grade(&t)?,
        concreteness,
        idea_density: idea_density(&t, &lex.propositions)?,
    })
}
