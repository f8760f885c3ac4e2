use std::ops::Range;

use serde::Serialize;

use super::MetricError;

/// Lowercased word tokens grouped into sentences.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TokenizedText {
    pub raw: String,
    pub tokens: Vec<String>,
    /// Half-open token ranges; together they cover `tokens` exactly.
    pub sentences: Vec<Range<usize>>,
}

impl TokenizedText {
    pub fn token_count(&self) -> usize {
        self.tokens.len()
    }

    pub fn sentence_count(&self) -> usize {
        self.sentences.len()
    }

    pub fn sentence_tokens(&self) -> impl Iterator<Item = &[String]> {
        self.sentences.iter().map(|r| &self.tokens[r.clone()])
    }
}

/// Normalizes a word for lexicon lookup: lowercase, typographic apostrophes
/// folded to ASCII.
pub fn normalize_word(word: &str) -> String {
    word.chars()
        .map(|c| if c == '\u{2019}' || c == '\u{2018}' { '\'' } else { c })
        .flat_map(char::to_lowercase)
        .collect()
}

/// Splits on whitespace, strips surrounding punctuation (internal apostrophes
/// and hyphens survive) and ends a sentence after any chunk that ends in
/// `.`, `!` or `?`.
pub fn tokenize(text: &str) -> Result<TokenizedText, MetricError> {
    if text.trim().is_empty() {
        return Err(MetricError::Validation("text is empty".into()));
    }
    let mut tokens = Vec::new();
    let mut sentences = Vec::new();
    let mut start = 0;
    for chunk in text.split_whitespace() {
        let word = normalize_word(chunk.trim_matches(|c: char| !c.is_alphanumeric()));
        if !word.is_empty() {
            tokens.push(word);
        }
        if chunk.ends_with(['.', '!', '?']) && tokens.len() > start {
            sentences.push(start..tokens.len());
            start = tokens.len();
        }
    }
    if tokens.len() > start {
        sentences.push(start..tokens.len());
    }
    Ok(TokenizedText {
        raw: text.to_string(),
        tokens,
        sentences,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_sentences() {
        let t = tokenize("I eat well. Do you?").unwrap();
        assert_eq!(t.tokens, ["i", "eat", "well", "do", "you"]);
        assert_eq!(t.sentences, vec![0..3, 3..5]);
    }

    #[test]
    fn single_word() {
        let t = tokenize("hello").unwrap();
        assert_eq!(t.token_count(), 1);
        assert_eq!(t.sentence_count(), 1);
    }

    #[test]
    fn empty_is_rejected() {
        assert!(matches!(tokenize(""), Err(MetricError::Validation(_))));
        assert!(tokenize("  \n ").is_err());
    }

    #[test]
    fn apostrophes_and_punctuation() {
        let t = tokenize("\"Don’t worry,\" she said... (really!) It's fine.").unwrap();
        assert_eq!(t.tokens, ["don't", "worry", "she", "said", "really", "it's", "fine"]);
        // "said..." ends a sentence; "(really!)" does not end in terminal punctuation.
        assert_eq!(t.sentences, vec![0..4, 4..7]);
    }

    #[test]
    fn punctuation_only_chunks_do_not_create_sentences() {
        let t = tokenize("Okay . . . fine").unwrap();
        assert_eq!(t.tokens, ["okay", "fine"]);
        assert_eq!(t.sentences, vec![0..1, 1..2]);
        let t = tokenize("?!").unwrap();
        assert!(t.tokens.is_empty() && t.sentences.is_empty());
    }
}
