//! Scaffold data file: persona blocks, knowledge passages and the exemplar bank.
//!
//! ```toml
//! [[persona]]
//! section = "tasking"
//! text = "..."
//!
//! [knowledge]
//! mi = ["..."]
//! healthy_diet = ["..."]
//! ttm = ["..."]
//!
//! [[exemplars]]
//! subprocess = "CR_P"
//! barrier = "routine"
//! client_text = "..."
//! counselor_text = "..."
//! ```

use std::path::Path;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    variant_components, Component, Exemplar, KnowledgeBase, KnowledgeId, PersonaBlock, PersonaSpec,
    PromptError, PromptInputs, Subprocess, VariantId, DEFAULT_KNOWLEDGE_BUDGET,
};

/// The scaffold shipped with the crate.
pub const DEFAULT_SCAFFOLD: &str = include_str!("../../data/scaffold.toml");

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KnowledgeSection {
    #[serde(default)]
    mi: Vec<String>,
    #[serde(default)]
    healthy_diet: Vec<String>,
    #[serde(default)]
    ttm: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScaffoldFile {
    #[serde(default)]
    persona: Vec<PersonaBlock>,
    #[serde(default)]
    knowledge: KnowledgeSection,
    #[serde(default)]
    exemplars: Vec<Exemplar>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scaffold {
    pub persona: PersonaSpec,
    pub knowledge: Vec<KnowledgeBase>,
    pub exemplars: Vec<Exemplar>,
    pub knowledge_char_budget: usize,
}

impl Scaffold {
    pub fn bundled() -> Self {
        Scaffold::parse(DEFAULT_SCAFFOLD).expect("bundled scaffold is valid")
    }

    pub fn load(path: &Path) -> Result<Self, PromptError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PromptError::Config(format!("reading {}: {e}", path.display())))?;
        Scaffold::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, PromptError> {
        let file: ScaffoldFile =
            toml::from_str(text).map_err(|e| PromptError::Config(format!("scaffold: {e}")))?;
        let persona = PersonaSpec {
            blocks: file.persona,
        };
        if !persona.is_empty() {
            persona.validate()?;
        }
        let knowledge = [
            (KnowledgeId::Mi, file.knowledge.mi),
            (KnowledgeId::HealthyDiet, file.knowledge.healthy_diet),
            (KnowledgeId::Ttm, file.knowledge.ttm),
        ]
        .into_iter()
        .filter(|(_, passages)| !passages.is_empty())
        .map(|(id, passages)| KnowledgeBase { id, passages })
        .collect();
        for ex in &file.exemplars {
            ex.validate()?;
        }
        Ok(Scaffold {
            persona,
            knowledge,
            exemplars: file.exemplars,
            knowledge_char_budget: DEFAULT_KNOWLEDGE_BUDGET,
        })
    }

    /// Smallest number of exemplars available for any subprocess.
    pub fn exemplars_per_subprocess(&self) -> usize {
        Subprocess::ALL
            .into_iter()
            .map(|s| self.exemplars.iter().filter(|e| e.subprocess == s).count())
            .min()
            .unwrap_or(0)
    }

    /// Checks that every component `variant` needs is present.
    pub fn check_variant(&self, variant: VariantId) -> Result<(), PromptError> {
        for component in variant_components(variant) {
            let ok = match component {
                Component::Persona => !self.persona.is_empty(),
                Component::KbMi => self.has_kb(KnowledgeId::Mi),
                Component::KbHealthyDiet => self.has_kb(KnowledgeId::HealthyDiet),
                Component::KbTtm => self.has_kb(KnowledgeId::Ttm),
                Component::FewShot => self.exemplars_per_subprocess() > 0,
            };
            if !ok {
                return Err(PromptError::Config(format!(
                    "scaffold lacks {component:?} required by variant {variant}"
                )));
            }
        }
        Ok(())
    }

    fn has_kb(&self, id: KnowledgeId) -> bool {
        self.knowledge.iter().any(|k| k.id == id)
    }

    /// Picks exactly the components `variant` uses. Exemplars are drawn with
    /// `k_per_subprocess` per subprocess (all available when `None`).
    pub fn inputs_for(
        &self,
        variant: VariantId,
        k_per_subprocess: Option<usize>,
        seed: u64,
    ) -> Result<PromptInputs, PromptError> {
        self.check_variant(variant)?;
        let components = variant_components(variant);
        let persona = components
            .contains(&Component::Persona)
            .then(|| self.persona.clone());
        let knowledge = self
            .knowledge
            .iter()
            .filter(|kb| components.contains(&kb.id.component()))
            .cloned()
            .collect();
        let exemplars = if components.contains(&Component::FewShot) {
            let k = k_per_subprocess.unwrap_or_else(|| self.exemplars_per_subprocess());
            select_exemplars(&self.exemplars, k, seed)?
        } else {
            Vec::new()
        };
        Ok(PromptInputs {
            persona,
            knowledge,
            exemplars,
            knowledge_char_budget: self.knowledge_char_budget,
        })
    }
}

/// Draws `k` exemplars per subprocess, grouped CR_P, CR_A, AR_P, AR_A; within a
/// group the bank order is kept. Deterministic for a given seed.
pub fn select_exemplars(bank: &[Exemplar], k: usize, seed: u64) -> Result<Vec<Exemplar>, PromptError> {
    if k == 0 {
        return Err(PromptError::Config("k_per_subprocess must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(4 * k);
    for sub in Subprocess::ALL {
        let pool: Vec<&Exemplar> = bank.iter().filter(|e| e.subprocess == sub).collect();
        if pool.len() < k {
            return Err(PromptError::Config(format!(
                "exemplar bank has {} {sub} entries, {k} requested",
                pool.len()
            )));
        }
        let mut picked = index::sample(&mut rng, pool.len(), k).into_vec();
        picked.sort_unstable();
        out.extend(picked.into_iter().map(|i| pool[i].clone()));
    }
    Ok(out)
}
