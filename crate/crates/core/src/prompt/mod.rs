//! Prompt construction for the five model variants.
//!
//! | variant | components                                   |
//! |---------|----------------------------------------------|
//! | 0       | none (plain instruction-following baseline)  |
//! | 1       | persona                                      |
//! | 2       | persona, MI + healthy-diet knowledge         |
//! | 3       | variant 2 + TTM knowledge                    |
//! | 4       | variant 3 + few-shot exemplars               |

mod assemble;
mod scaffold;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use assemble::{assemble_prompt, ChatMessage, ExemplarPair, MessageRole, PromptBundle, PromptInputs};
pub use scaffold::{select_exemplars, Scaffold, DEFAULT_SCAFFOLD};

/// Default per-knowledge-base character budget.
pub const DEFAULT_KNOWLEDGE_BUDGET: usize = 4000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PromptError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("assembly error: {0}")]
    Assembly(String),
    #[error("invalid {field}: {reason}")]
    Validation { field: &'static str, reason: String },
}

impl PromptError {
    pub fn code(&self) -> &'static str {
        match self {
            PromptError::Config(_) => "configuration",
            PromptError::Assembly(_) => "assembly",
            PromptError::Validation { .. } => "validation",
        }
    }
}

/// Self-reevaluation subprocess: cognitive/affective reassessment in the
/// presence or absence of the unhealthy behavior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Subprocess {
    #[serde(rename = "CR_P")]
    CrP,
    #[serde(rename = "CR_A")]
    CrA,
    #[serde(rename = "AR_P")]
    ArP,
    #[serde(rename = "AR_A")]
    ArA,
}

impl Subprocess {
    /// Canonical block order used when grouping exemplars.
    pub const ALL: [Subprocess; 4] = [Subprocess::CrP, Subprocess::CrA, Subprocess::ArP, Subprocess::ArA];

    pub fn as_str(&self) -> &'static str {
        match self {
            Subprocess::CrP => "CR_P",
            Subprocess::CrA => "CR_A",
            Subprocess::ArP => "AR_P",
            Subprocess::ArA => "AR_A",
        }
    }
}

impl fmt::Display for Subprocess {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Subprocess {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Subprocess::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| PromptError::Validation {
                field: "subprocess",
                reason: format!("unknown subprocess {s:?}"),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Barrier {
    Routine,
    Time,
    AccessCost,
}

impl Barrier {
    pub const ALL: [Barrier; 3] = [Barrier::Routine, Barrier::Time, Barrier::AccessCost];

    pub fn as_str(&self) -> &'static str {
        match self {
            Barrier::Routine => "routine",
            Barrier::Time => "time",
            Barrier::AccessCost => "access_cost",
        }
    }
}

impl fmt::Display for Barrier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PersonaSection {
    Tasking,
    Expertise,
    Disambiguation,
    Analysis,
    Communication,
}

impl PersonaSection {
    pub const ALL: [PersonaSection; 5] = [
        PersonaSection::Tasking,
        PersonaSection::Expertise,
        PersonaSection::Disambiguation,
        PersonaSection::Analysis,
        PersonaSection::Communication,
    ];

    pub fn title(&self) -> &'static str {
        match self {
            PersonaSection::Tasking => "Tasking",
            PersonaSection::Expertise => "Contextual expertise",
            PersonaSection::Disambiguation => "Disambiguation",
            PersonaSection::Analysis => "Analysis",
            PersonaSection::Communication => "Communication",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersonaBlock {
    pub section: PersonaSection,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PersonaSpec {
    pub blocks: Vec<PersonaBlock>,
}

impl PersonaSpec {
    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// A full persona has every section exactly once with non-empty text.
    pub fn validate(&self) -> Result<(), PromptError> {
        for section in PersonaSection::ALL {
            let n = self.blocks.iter().filter(|b| b.section == section).count();
            if n != 1 {
                return Err(PromptError::Validation {
                    field: "persona",
                    reason: format!("section {section:?} appears {n} times, expected once"),
                });
            }
        }
        if let Some(b) = self.blocks.iter().find(|b| b.text.trim().is_empty()) {
            return Err(PromptError::Validation {
                field: "persona",
                reason: format!("section {:?} has empty text", b.section),
            });
        }
        Ok(())
    }

    /// Blocks in canonical section order.
    pub fn ordered(&self) -> impl Iterator<Item = &PersonaBlock> {
        PersonaSection::ALL
            .into_iter()
            .filter_map(|s| self.blocks.iter().find(|b| b.section == s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnowledgeId {
    Mi,
    HealthyDiet,
    Ttm,
}

impl KnowledgeId {
    pub const ALL: [KnowledgeId; 3] = [KnowledgeId::Mi, KnowledgeId::HealthyDiet, KnowledgeId::Ttm];

    pub fn title(&self) -> &'static str {
        match self {
            KnowledgeId::Mi => "Motivational interviewing",
            KnowledgeId::HealthyDiet => "Healthy diet guidelines",
            KnowledgeId::Ttm => "Transtheoretical model",
        }
    }

    fn component(&self) -> Component {
        match self {
            KnowledgeId::Mi => Component::KbMi,
            KnowledgeId::HealthyDiet => Component::KbHealthyDiet,
            KnowledgeId::Ttm => Component::KbTtm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeBase {
    pub id: KnowledgeId,
    pub passages: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exemplar {
    pub subprocess: Subprocess,
    pub barrier: Barrier,
    pub client_text: String,
    pub counselor_text: String,
}

impl Exemplar {
    pub fn validate(&self) -> Result<(), PromptError> {
        if self.client_text.trim().is_empty() || self.counselor_text.trim().is_empty() {
            return Err(PromptError::Validation {
                field: "exemplar",
                reason: format!("{} exemplar has empty text", self.subprocess),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub temperature: f64,
    pub top_p: f64,
    pub repetition_penalty: f64,
    pub max_tokens: u32,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        default_config()
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<(), PromptError> {
        let bad = |field, reason: String| Err(PromptError::Validation { field, reason });
        if !(0.0..=2.0).contains(&self.temperature) {
            return bad("temperature", format!("{} outside [0, 2]", self.temperature));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return bad("top_p", format!("{} outside (0, 1]", self.top_p));
        }
        if !(self.repetition_penalty > 0.0) {
            return bad("repetition_penalty", format!("{} must be > 0", self.repetition_penalty));
        }
        if self.max_tokens == 0 {
            return bad("max_tokens", "must be positive".into());
        }
        Ok(())
    }
}

/// Sampling parameters used for every variant.
pub fn default_config() -> GenerationConfig {
    GenerationConfig {
        temperature: 0.5,
        top_p: 0.9,
        repetition_penalty: 0.5,
        max_tokens: 512,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct VariantId(u8);

impl VariantId {
    pub const BASELINE: VariantId = VariantId(0);
    pub const FULL: VariantId = VariantId(4);

    pub fn new(value: u8) -> Result<Self, PromptError> {
        if value <= 4 {
            Ok(VariantId(value))
        } else {
            Err(PromptError::Validation {
                field: "variant",
                reason: format!("{value} is not in 0..=4"),
            })
        }
    }

    pub fn all() -> impl Iterator<Item = VariantId> {
        (0..=4).map(VariantId)
    }

    pub fn get(&self) -> u8 {
        self.0
    }
}

impl TryFrom<u8> for VariantId {
    type Error = PromptError;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        VariantId::new(value)
    }
}

impl From<VariantId> for u8 {
    fn from(v: VariantId) -> u8 {
        v.0
    }
}

impl fmt::Display for VariantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for VariantId {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let v: u8 = s.trim().parse().map_err(|_| PromptError::Validation {
            field: "variant",
            reason: format!("{s:?} is not an integer"),
        })?;
        VariantId::new(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    Persona,
    KbMi,
    KbHealthyDiet,
    KbTtm,
    FewShot,
}

pub fn variant_components(variant: VariantId) -> BTreeSet<Component> {
    use Component::*;
    let ladder = [Persona, KbMi, KbHealthyDiet, KbTtm, FewShot];
    let take = match variant.get() {
        0 => 0,
        1 => 1,
        2 => 3,
        3 => 4,
        _ => 5,
    };
    ladder[..take].iter().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use Component::*;

    fn v(n: u8) -> VariantId {
        VariantId::new(n).unwrap()
    }

    #[test]
    fn component_matrix() {
        assert!(variant_components(v(0)).is_empty());
        assert_eq!(variant_components(v(1)), BTreeSet::from([Persona]));
        assert_eq!(
            variant_components(v(2)),
            BTreeSet::from([Persona, KbMi, KbHealthyDiet])
        );
        assert!(!variant_components(v(2)).contains(&KbTtm));
        assert_eq!(
            variant_components(v(3)),
            BTreeSet::from([Persona, KbMi, KbHealthyDiet, KbTtm])
        );
        assert_eq!(
            variant_components(v(4)),
            BTreeSet::from([Persona, KbMi, KbHealthyDiet, KbTtm, FewShot])
        );
    }

    #[test]
    fn components_grow_strictly() {
        for w in 1..=4u8 {
            for lower in 0..w {
                let (a, b) = (variant_components(v(lower)), variant_components(v(w)));
                assert!(a.is_subset(&b) && a != b, "{lower} vs {w}");
            }
        }
    }

    #[test]
    fn variant_range() {
        assert!(VariantId::new(5).is_err());
        assert_eq!("3".parse::<VariantId>().unwrap(), v(3));
        assert!(serde_json::from_str::<VariantId>("7").is_err());
    }

    #[test]
    fn default_sampling() {
        let c = default_config();
        assert_eq!(c.temperature, 0.5);
        assert_eq!(c.top_p, 0.9);
        assert_eq!(c.repetition_penalty, 0.5);
        assert_eq!(c.max_tokens, 512);
        c.validate().unwrap();
    }

    #[test]
    fn config_bounds() {
        let mut c = default_config();
        c.top_p = 0.0;
        assert!(c.validate().is_err());
        let mut c = default_config();
        c.temperature = 2.5;
        assert!(c.validate().is_err());
        let mut c = default_config();
        c.repetition_penalty = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn persona_requires_each_section_once() {
        let mut p = PersonaSpec {
            blocks: PersonaSection::ALL
                .into_iter()
                .map(|section| PersonaBlock {
                    section,
                    text: "x".into(),
                })
                .collect(),
        };
        p.validate().unwrap();
        p.blocks.push(PersonaBlock {
            section: PersonaSection::Analysis,
            text: "again".into(),
        });
        assert!(p.validate().is_err());
    }
}
