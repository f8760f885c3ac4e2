//! Word lists and rating tables used by the text metrics.
//!
//! All files are UTF-8, one entry per line, `#` starts a comment line:
//!
//! - `concreteness.tsv`: `word<TAB>rating`; optional `#@ population_mean<TAB>x`
//!   and `#@ population_sd<TAB>x` directives, otherwise both are computed
//!   over the entries
//! - `valence.tsv`: `word<TAB>valence`
//! - `negators.txt`: one word per line
//! - `boosters.tsv`: `word<TAB>increment`
//! - `propositions.txt`: `word<TAB>class`

use std::collections::{HashMap, HashSet};
use std::path::Path;

use super::tokenize::normalize_word;
use super::MetricError;

macro_rules! bundled {
    ($file:literal) => {
        include_str!(concat!("../../data/lexicons/", $file))
    };
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcretenessLexicon {
    entries: HashMap<String, f64>,
    pub population_mean: f64,
    pub population_sd: f64,
}

impl ConcretenessLexicon {
    pub fn new(entries: HashMap<String, f64>) -> Result<Self, MetricError> {
        if entries.is_empty() {
            return Err(MetricError::lexicon("concreteness", 0, "no entries"));
        }
        // sorted so the sums do not depend on hash order
        let mut values: Vec<f64> = entries.values().copied().collect();
        values.sort_by(f64::total_cmp);
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = (values.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n).sqrt();
        Self::with_population(entries, mean, sd)
    }

    pub fn with_population(
        entries: HashMap<String, f64>,
        population_mean: f64,
        population_sd: f64,
    ) -> Result<Self, MetricError> {
        if entries.is_empty() {
            return Err(MetricError::lexicon("concreteness", 0, "no entries"));
        }
        if !(population_sd > 0.0) || !population_mean.is_finite() {
            return Err(MetricError::lexicon(
                "concreteness",
                0,
                format!("population sd must be positive, got {population_sd}"),
            ));
        }
        Ok(ConcretenessLexicon {
            entries,
            population_mean,
            population_sd,
        })
    }

    pub fn parse(text: &str) -> Result<Self, MetricError> {
        let mut entries = HashMap::new();
        let mut mean = None;
        let mut sd = None;
        for (line_no, line) in text.lines().enumerate() {
            if let Some(directive) = line.strip_prefix("#@") {
                let (key, value) = split_pair(directive.trim(), "concreteness", line_no + 1)?;
                let value = parse_real(value, "concreteness", line_no + 1)?;
                match key {
                    "population_mean" => mean = Some(value),
                    "population_sd" => sd = Some(value),
                    other => {
                        return Err(MetricError::lexicon(
                            "concreteness",
                            line_no + 1,
                            format!("unknown directive {other}"),
                        ))
                    }
                }
                continue;
            }
            if skip(line) {
                continue;
            }
            let (word, rating) = split_pair(line, "concreteness", line_no + 1)?;
            entries.insert(normalize_word(word), parse_real(rating, "concreteness", line_no + 1)?);
        }
        match (mean, sd) {
            (Some(m), Some(s)) => Self::with_population(entries, m, s),
            (None, None) => Self::new(entries),
            _ => Err(MetricError::lexicon(
                "concreteness",
                0,
                "declare both population_mean and population_sd or neither",
            )),
        }
    }

    pub fn rating(&self, word: &str) -> Option<f64> {
        self.entries.get(word).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValenceLexicon {
    pub entries: HashMap<String, f64>,
    pub negators: HashSet<String>,
    pub boosters: HashMap<String, f64>,
}

impl ValenceLexicon {
    pub fn new(
        entries: HashMap<String, f64>,
        negators: HashSet<String>,
        boosters: HashMap<String, f64>,
    ) -> Result<Self, MetricError> {
        if entries.is_empty() {
            return Err(MetricError::lexicon("valence", 0, "no entries"));
        }
        Ok(ValenceLexicon {
            entries,
            negators,
            boosters,
        })
    }

    pub fn parse(valence: &str, negators: &str, boosters: &str) -> Result<Self, MetricError> {
        let entries = parse_table(valence, "valence")?;
        let negators = negators
            .lines()
            .filter(|l| !skip(l))
            .map(|l| normalize_word(l.trim()))
            .collect();
        let boosters = parse_table(boosters, "boosters")?;
        Self::new(entries, negators, boosters)
    }

    /// Same lexicon with every valence negated.
    pub fn sign_flipped(&self) -> Self {
        ValenceLexicon {
            entries: self.entries.iter().map(|(w, v)| (w.clone(), -v)).collect(),
            negators: self.negators.clone(),
            boosters: self.boosters.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WordClass {
    Verb,
    Adjective,
    Adverb,
    Preposition,
    Conjunction,
    Other,
}

impl WordClass {
    fn parse(tag: &str) -> WordClass {
        match tag {
            "verb" => WordClass::Verb,
            "adj" => WordClass::Adjective,
            "adv" => WordClass::Adverb,
            "prep" => WordClass::Preposition,
            "conj" => WordClass::Conjunction,
            _ => WordClass::Other,
        }
    }

    pub fn is_proposition(&self) -> bool {
        !matches!(self, WordClass::Other)
    }
}

/// Closed-class wordlist plus suffix fallback for idea density.
#[derive(Debug, Clone, PartialEq)]
pub struct PropositionRules {
    classes: HashMap<String, WordClass>,
    suffixes: Vec<&'static str>,
}

const PROPOSITION_SUFFIXES: [&str; 10] = [
    "ly", "ed", "ing", "ize", "ful", "ous", "ive", "able", "ible", "less",
];

impl PropositionRules {
    pub fn parse(text: &str) -> Result<Self, MetricError> {
        let mut classes = HashMap::new();
        for (line_no, line) in text.lines().enumerate() {
            if skip(line) {
                continue;
            }
            let (word, tag) = split_pair(line, "propositions", line_no + 1)?;
            classes.insert(normalize_word(word), WordClass::parse(tag.trim()));
        }
        Ok(PropositionRules {
            classes,
            suffixes: PROPOSITION_SUFFIXES.to_vec(),
        })
    }

    /// Listed words use their class; unlisted words of five or more letters
    /// count when they carry a verbal/adjectival/adverbial suffix.
    pub fn is_proposition(&self, token: &str) -> bool {
        if let Some(class) = self.classes.get(token) {
            return class.is_proposition();
        }
        token.chars().count() >= 5
            && token.chars().all(|c| c.is_ascii_alphabetic())
            && self.suffixes.iter().any(|s| token.ends_with(s))
    }
}

/// Every lexicon the metrics need.
#[derive(Debug, Clone, PartialEq)]
pub struct LexiconSet {
    pub concreteness: ConcretenessLexicon,
    pub valence: ValenceLexicon,
    pub propositions: PropositionRules,
}

impl LexiconSet {
    pub fn bundled() -> Self {
        LexiconSet {
            concreteness: ConcretenessLexicon::parse(bundled!("concreteness.tsv"))
                .expect("bundled concreteness lexicon"),
            valence: ValenceLexicon::parse(
                bundled!("valence.tsv"),
                bundled!("negators.txt"),
                bundled!("boosters.tsv"),
            )
            .expect("bundled valence lexicon"),
            propositions: PropositionRules::parse(bundled!("propositions.txt"))
                .expect("bundled proposition list"),
        }
    }

    pub fn load_dir(dir: &Path) -> Result<Self, MetricError> {
        let read = |name: &str| {
            let path = dir.join(name);
            std::fs::read_to_string(&path).map_err(|e| MetricError::Lexicon {
                source_name: path.display().to_string(),
                line: 0,
                reason: e.to_string(),
            })
        };
        Ok(LexiconSet {
            concreteness: ConcretenessLexicon::parse(&read("concreteness.tsv")?)?,
            valence: ValenceLexicon::parse(
                &read("valence.tsv")?,
                &read("negators.txt")?,
                &read("boosters.tsv")?,
            )?,
            propositions: PropositionRules::parse(&read("propositions.txt")?)?,
        })
    }
}

fn skip(line: &str) -> bool {
    let t = line.trim();
    t.is_empty() || t.starts_with('#')
}

fn split_pair<'a>(line: &'a str, source: &str, line_no: usize) -> Result<(&'a str, &'a str), MetricError> {
    let mut parts = line.splitn(3, '\t');
    match (parts.next(), parts.next()) {
        (Some(a), Some(b)) if !a.trim().is_empty() => Ok((a.trim(), b.trim())),
        _ => Err(MetricError::lexicon(source, line_no, "expected word<TAB>value")),
    }
}

fn parse_real(value: &str, source: &str, line_no: usize) -> Result<f64, MetricError> {
    value
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| MetricError::lexicon(source, line_no, format!("bad number {value:?}")))
}

fn parse_table(text: &str, source: &str) -> Result<HashMap<String, f64>, MetricError> {
    let mut out = HashMap::new();
    for (line_no, line) in text.lines().enumerate() {
        if skip(line) {
            continue;
        }
        let (word, value) = split_pair(line, source, line_no + 1)?;
        out.insert(normalize_word(word), parse_real(value, source, line_no + 1)?);
    }
    Ok(out)
}
