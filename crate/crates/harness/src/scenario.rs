//! Scenario grid: three dietary concerns by three barriers, three vignettes
//! per cell.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use counsel_core::prompt::Barrier;
use counsel_core::Topic;
use serde::{Deserialize, Serialize};

use crate::error::{read_text, HarnessError};

/// The shipped scenario file.
pub const DEFAULT_SCENARIOS: &str = include_str!("../data/scenarios.toml");

pub const SCENARIO_COUNT: usize = 27;
pub const PER_CELL: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioPrompt {
    pub id: String,
    pub concern: Topic,
    pub barrier: Barrier,
    pub k: u8,
    pub text: String,
}

impl ScenarioPrompt {
    pub fn expected_id(&self) -> String {
        format!("{}-{}-{}", self.concern, self.barrier, self.k)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(default)]
    scenario: Vec<ScenarioPrompt>,
}

pub fn default_scenarios() -> Vec<ScenarioPrompt> {
    parse_scenarios(DEFAULT_SCENARIOS).expect("bundled scenarios are valid")
}

pub fn load_scenarios(path: &Path) -> Result<Vec<ScenarioPrompt>, HarnessError> {
    parse_scenarios(&read_text(path)?)
}

/// Parses and validates a scenario file; the result is sorted by id.
pub fn parse_scenarios(text: &str) -> Result<Vec<ScenarioPrompt>, HarnessError> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| HarnessError::Parse(e.to_string()))?;
    let mut scenarios = file.scenario;
    if scenarios.len() != SCENARIO_COUNT {
        return Err(HarnessError::Parse(format!(
            "expected {SCENARIO_COUNT} scenarios, found {}",
            scenarios.len()
        )));
    }
    let mut ids = HashSet::new();
    let mut cells: BTreeMap<(Topic, Barrier), usize> = BTreeMap::new();
    for s in &scenarios {
        if !ids.insert(s.id.as_str()) {
            return Err(HarnessError::Parse(format!("duplicate scenario id {:?}", s.id)));
        }
        if s.text.trim().is_empty() {
            return Err(HarnessError::Parse(format!("scenario {:?} has empty text", s.id)));
        }
        if !(1..=PER_CELL as u8).contains(&s.k) {
            return Err(HarnessError::Parse(format!("scenario {:?}: k must be 1..=3", s.id)));
        }
        if s.id != s.expected_id() {
            return Err(HarnessError::Parse(format!(
                "scenario id {:?} does not match its fields ({})",
                s.id,
                s.expected_id()
            )));
        }
        *cells.entry((s.concern, s.barrier)).or_default() += 1;
    }
    if let Some(((c, b), n)) = cells.iter().find(|(_, n)| **n != PER_CELL) {
        return Err(HarnessError::Parse(format!("cell {c}/{b} has {n} scenarios, expected {PER_CELL}")));
    }
    scenarios.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(scenarios)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn drop_last(text: &str) -> String {
        let cut = text.rfind("[[scenario]]").unwrap();
        text[..cut].to_string()
    }

    #[test]
    fn default_file_is_a_full_grid() {
        let s = default_scenarios();
        assert_eq!(s.len(), 27);
        for concern in Topic::ALL {
            for barrier in Barrier::ALL {
                let n = s.iter().filter(|p| p.concern == *concern && p.barrier == barrier).count();
                assert_eq!(n, 3, "{concern}/{barrier}");
            }
        }
    }

    #[test]
    fn wrong_count_is_rejected() {
        let err = parse_scenarios(&drop_last(DEFAULT_SCENARIOS)).unwrap_err();
        assert_eq!(err.code(), "parse");
        assert!(err.to_string().contains("found 26"));
    }

    #[test]
    fn duplicate_id_is_rejected() {
        let text = DEFAULT_SCENARIOS.replacen("k = 2\ntext = \"I snack", "k = 1\ntext = \"I snack", 1).replacen(
            "id = \"sugar_salt-routine-2\"",
            "id = \"sugar_salt-routine-1\"",
            1,
        );
        let err = parse_scenarios(&text).unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
    }

    #[test]
    fn empty_text_and_mismatched_id_are_rejected() {
        let text = DEFAULT_SCENARIOS.replacen("text = \"I realize", "text = \"  \" #", 1);
        assert!(parse_scenarios(&text).unwrap_err().to_string().contains("empty"));
        let text = DEFAULT_SCENARIOS.replacen("barrier = \"routine\"\nk = 1", "barrier = \"time\"\nk = 1", 1);
        assert!(parse_scenarios(&text).unwrap_err().to_string().contains("does not match"));
    }
}
