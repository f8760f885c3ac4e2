use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{
    variant_components, Component, Exemplar, GenerationConfig, KnowledgeBase, KnowledgeId,
    PersonaSpec, PromptError, VariantId, DEFAULT_KNOWLEDGE_BUDGET,
};
use crate::session::{Role, Turn};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MessageRole {
    System,
    User,
    Assistant,
}

impl From<Role> for MessageRole {
    fn from(role: Role) -> Self {
        match role {
            Role::Agent => MessageRole::Assistant,
            Role::User => MessageRole::User,
            Role::System => MessageRole::System,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: MessageRole,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: MessageRole, content: impl Into<String>) -> Self {
        ChatMessage {
            role,
            content: content.into(),
        }
    }
}

/// One few-shot demonstration rendered as a user/assistant exchange.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExemplarPair {
    pub user: String,
    pub assistant: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub variant: VariantId,
    pub system_text: String,
    pub exemplar_messages: Vec<ExemplarPair>,
    pub window_messages: Vec<ChatMessage>,
    pub config: GenerationConfig,
}

impl PromptBundle {
    /// Flattened chat messages: system text (when present), exemplar pairs,
    /// then the context window.
    pub fn to_messages(&self) -> Vec<ChatMessage> {
        let mut out = Vec::with_capacity(
            1 + 2 * self.exemplar_messages.len() + self.window_messages.len(),
        );
        if !self.system_text.is_empty() {
            out.push(ChatMessage::new(MessageRole::System, self.system_text.clone()));
        }
        for pair in &self.exemplar_messages {
            out.push(ChatMessage::new(MessageRole::User, pair.user.clone()));
            out.push(ChatMessage::new(MessageRole::Assistant, pair.assistant.clone()));
        }
        out.extend(self.window_messages.iter().cloned());
        out
    }

    /// Stable pretty JSON used for golden comparisons and hashing.
    pub fn to_canonical_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("bundle serializes");
        s.push('\n');
        s
    }
}

/// Components offered to [`assemble_prompt`]; must match the variant exactly.
#[derive(Debug, Clone)]
pub struct PromptInputs {
    pub persona: Option<PersonaSpec>,
    pub knowledge: Vec<KnowledgeBase>,
    pub exemplars: Vec<Exemplar>,
    pub knowledge_char_budget: usize,
}

impl Default for PromptInputs {
    fn default() -> Self {
        PromptInputs {
            persona: None,
            knowledge: Vec::new(),
            exemplars: Vec::new(),
            knowledge_char_budget: DEFAULT_KNOWLEDGE_BUDGET,
        }
    }
}

impl PromptInputs {
    fn supplied(&self) -> Result<BTreeSet<Component>, PromptError> {
        let mut set = BTreeSet::new();
        if self.persona.as_ref().is_some_and(|p| !p.is_empty()) {
            set.insert(Component::Persona);
        }
        for kb in &self.knowledge {
            if !set.insert(kb.id.component()) {
                return Err(PromptError::Assembly(format!(
                    "knowledge base {:?} supplied twice",
                    kb.id
                )));
            }
        }
        if !self.exemplars.is_empty() {
            set.insert(Component::FewShot);
        }
        Ok(set)
    }
}

pub fn assemble_prompt(
    variant: VariantId,
    inputs: &PromptInputs,
    window: &[Turn],
    config: &GenerationConfig,
) -> Result<PromptBundle, PromptError> {
    config.validate()?;
    let required = variant_components(variant);
    let supplied = inputs.supplied()?;
    if let Some(extra) = supplied.difference(&required).next() {
        return Err(PromptError::Assembly(format!(
            "variant {variant} excludes component {extra:?}"
        )));
    }
    if let Some(missing) = required.difference(&supplied).next() {
        return Err(PromptError::Assembly(format!(
            "variant {variant} requires component {missing:?}"
        )));
    }

    let mut sections: Vec<String> = Vec::new();
    if let Some(persona) = &inputs.persona {
        if !persona.is_empty() {
            persona.validate()?;
            for block in persona.ordered() {
                sections.push(format!("## {}\n{}", block.section.title(), block.text.trim()));
            }
        }
    }
    for id in KnowledgeId::ALL {
        if let Some(kb) = inputs.knowledge.iter().find(|k| k.id == id) {
            let passages = trim_to_budget(&kb.passages, inputs.knowledge_char_budget);
            if passages.is_empty() {
                return Err(PromptError::Assembly(format!(
                    "knowledge base {id:?} has no passages"
                )));
            }
            let body: Vec<String> = passages.iter().map(|p| format!("- {p}")).collect();
            sections.push(format!("## Knowledge: {}\n{}", id.title(), body.join("\n")));
        }
    }

    let mut exemplar_messages = Vec::with_capacity(inputs.exemplars.len());
    for ex in &inputs.exemplars {
        ex.validate()?;
        exemplar_messages.push(ExemplarPair {
            user: ex.client_text.clone(),
            assistant: ex.counselor_text.clone(),
        });
    }

    let window_messages = window
        .iter()
        .map(|t| ChatMessage::new(t.role.into(), t.text.clone()))
        .collect();

    Ok(PromptBundle {
        variant,
        system_text: sections.join("\n\n"),
        exemplar_messages,
        window_messages,
        config: config.clone(),
    })
}

/// Keeps passages in order until `budget` characters are used; the passage
/// crossing the budget is cut and later passages are dropped.
fn trim_to_budget(passages: &[String], budget: usize) -> Vec<String> {
    let mut left = budget;
    let mut out = Vec::new();
    for p in passages.iter().map(|p| p.trim()).filter(|p| !p.is_empty()) {
        if left == 0 {
            break;
        }
        let n = p.chars().count();
        if n <= left {
            out.push(p.to_string());
            left -= n;
        } else {
            out.push(p.chars().take(left).collect());
            left = 0;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt::{default_config, Barrier, PersonaBlock, PersonaSection, Subprocess};

    fn persona() -> PersonaSpec {
        PersonaSpec {
            blocks: PersonaSection::ALL
                .into_iter()
                .rev()
                .map(|section| PersonaBlock {
                    section,
                    text: format!("{section:?} text"),
                })
                .collect(),
        }
    }

    fn kb(id: KnowledgeId) -> KnowledgeBase {
        KnowledgeBase {
            id,
            passages: vec![format!("{id:?} one"), format!("{id:?} two")],
        }
    }

    fn user_turn(text: &str) -> Turn {
        Turn {
            index: 2,
            role: Role::User,
            text: text.into(),
            timestamp_ms: 0,
        }
    }

    #[test]
    fn baseline_passthrough() {
        let window = [user_turn("I drink a lot of soda.")];
        let b = assemble_prompt(
            VariantId::BASELINE,
            &PromptInputs::default(),
            &window,
            &default_config(),
        )
        .unwrap();
        assert!(b.system_text.is_empty());
        assert!(b.exemplar_messages.is_empty());
        assert_eq!(
            b.to_messages(),
            vec![ChatMessage::new(MessageRole::User, "I drink a lot of soda.")]
        );
    }

    #[test]
    fn persona_sections_follow_canonical_order() {
        let inputs = PromptInputs {
            persona: Some(persona()),
            ..Default::default()
        };
        let b = assemble_prompt(VariantId::new(1).unwrap(), &inputs, &[], &default_config()).unwrap();
        let expected = "## Tasking\nTasking text\n\n## Contextual expertise\nExpertise text\n\n\
                        ## Disambiguation\nDisambiguation text\n\n## Analysis\nAnalysis text\n\n\
                        ## Communication\nCommunication text";
        assert_eq!(b.system_text, expected);
    }

    #[test]
    fn knowledge_order_is_fixed() {
        let inputs = PromptInputs {
            persona: Some(persona()),
            knowledge: vec![kb(KnowledgeId::Ttm), kb(KnowledgeId::HealthyDiet), kb(KnowledgeId::Mi)],
            ..Default::default()
        };
        let b = assemble_prompt(VariantId::new(3).unwrap(), &inputs, &[], &default_config()).unwrap();
        let mi = b.system_text.find("Mi one").unwrap();
        let diet = b.system_text.find("HealthyDiet one").unwrap();
        let ttm = b.system_text.find("Ttm one").unwrap();
        assert!(mi < diet && diet < ttm);
    }

    #[test]
    fn excluded_component_is_an_error() {
        let inputs = PromptInputs {
            persona: Some(persona()),
            knowledge: vec![kb(KnowledgeId::Ttm)],
            ..Default::default()
        };
        let err = assemble_prompt(VariantId::new(1).unwrap(), &inputs, &[], &default_config())
            .unwrap_err();
        assert_eq!(err.code(), "assembly");
    }

    #[test]
    fn missing_component_is_an_error() {
        let inputs = PromptInputs {
            persona: Some(persona()),
            knowledge: vec![kb(KnowledgeId::Mi)],
            ..Default::default()
        };
        let err = assemble_prompt(VariantId::new(2).unwrap(), &inputs, &[], &default_config())
            .unwrap_err();
        assert!(err.to_string().contains("KbHealthyDiet"), "{err}");
    }

    #[test]
    fn exemplars_precede_window() {
        let inputs = PromptInputs {
            persona: Some(persona()),
            knowledge: KnowledgeId::ALL.into_iter().map(kb).collect(),
            exemplars: vec![Exemplar {
                subprocess: Subprocess::CrA,
                barrier: Barrier::Time,
                client_text: "client".into(),
                counselor_text: "counselor".into(),
            }],
            ..Default::default()
        };
        let window = [user_turn("latest")];
        let b = assemble_prompt(VariantId::FULL, &inputs, &window, &default_config()).unwrap();
        let msgs = b.to_messages();
        assert_eq!(msgs.len(), 4);
        assert_eq!(msgs[0].role, MessageRole::System);
        assert_eq!(msgs[1].content, "client");
        assert_eq!(msgs[2].content, "counselor");
        assert_eq!(msgs[3].content, "latest");
    }

    #[test]
    fn knowledge_budget_trims_from_the_end() {
        let passages = vec!["abcd".to_string(), "efgh".to_string(), "ijkl".to_string()];
        assert_eq!(trim_to_budget(&passages, 6), vec!["abcd", "ef"]);
        assert_eq!(trim_to_budget(&passages, 100), passages);
        assert!(trim_to_budget(&passages, 0).is_empty());
    }
}
