//! Deterministic stand-in for a model server.
//!
//! The reply is chosen from templates by the SHA-256 of the bundle's canonical
//! JSON: a reflection that mirrors the latest user message, a bridging
//! sentence, an affirmation, then an open question. Windows without a user
//! message get [`MOCK_GREETING`].

use async_trait::async_trait;
use counsel_core::prompt::{MessageRole, PromptBundle};
use sha2::{Digest, Sha256};

use super::{CompletionBackend, CompletionResult, LlmError};

pub const MOCK_GREETING: &str = "Hello, and thanks for being here. It sounds like you have something on your mind about food. What would you like to talk about?";

const REFLECTIONS: [&str; 8] = [
    "It sounds like {}.",
    "So {}.",
    "What I'm hearing is that {}.",
    "You're saying that {}.",
    "It seems like {}.",
    "If I understand you, {}.",
    "You've noticed that {}.",
    "From what you describe, {}.",
];

const BRIDGES: [&str; 16] = [
    "That makes sense given everything on your plate.",
    "You're being honest about it, and that matters.",
    "Many people find that part hard.",
    "It took some thought to put that into words.",
    "You clearly care about how you eat.",
    "That habit has a real pull.",
    "You've already been thinking about this.",
    "There's a lot going on there.",
    "Part of you seems ready to look at it.",
    "That says something about what matters to you.",
    "It's understandable that it feels stuck.",
    "You know your routine better than anyone.",
    "That's a useful thing to notice.",
    "Both sides of that feel real.",
    "You've tried things before, which counts.",
    "That shows how much effort you're putting in.",
];

const AFFIRMATIONS: [&str; 16] = [
    "Thanks for sharing that with me.",
    "I appreciate how openly you're talking about this.",
    "Noticing this is already a step.",
    "You're taking this seriously.",
    "It's good that you're looking at this now.",
    "Your honesty here is a strength.",
    "You've put real thought into this.",
    "That kind of awareness helps.",
    "You're clearly paying attention to your habits.",
    "It's worth giving yourself credit for raising it.",
    "You know what you want, even if it's hard.",
    "That reflects care for your health.",
    "You've been open about the hard parts.",
    "It says a lot that you're here talking about it.",
    "You're willing to look at this closely.",
    "That insight will be useful.",
];

const LEADS: [&str; 16] = [
    "",
    "I'm curious: ",
    "Let me ask: ",
    "Thinking about that, ",
    "If it's okay to ask, ",
    "Looking ahead, ",
    "Just between us, ",
    "When you picture it, ",
    "Taking a step back, ",
    "In your own words, ",
    "For you personally, ",
    "Right now, ",
    "With that in mind, ",
    "Out of curiosity, ",
    "Thinking about your week, ",
    "Honestly, ",
];

const QUESTIONS: [&str; 32] = [
    "What would a small first step look like for you?",
    "How does that fit with the way you want to eat?",
    "What makes that hardest on a busy day?",
    "How would you feel if that changed?",
    "What has worked for you before, even a little?",
    "What would make healthier choices easier at home?",
    "How important is this change to you right now?",
    "What do you imagine would be different in a month?",
    "Where does that habit usually start?",
    "What would you want to keep the same?",
    "How do you feel about that when you look back on your week?",
    "What might get in the way, and how could you plan for it?",
    "Who could support you with this?",
    "What part of this feels most within reach?",
    "How confident do you feel about trying something new?",
    "What does eating well mean to you?",
    "When do you notice it most?",
    "What would your ideal day of meals look like?",
    "How does that affect your energy?",
    "What options feel realistic with your budget?",
    "What would you tell a friend in the same spot?",
    "How do you feel after those meals?",
    "What is one thing you could try this week?",
    "What would help you remember your goal in the moment?",
    "How have your eating habits changed over time?",
    "What would make it worth the effort?",
    "How could you make the healthier option the easy one?",
    "What worries you most about changing this?",
    "What would success look like to you?",
    "Which meal feels easiest to start with?",
    "How does your family fit into this?",
    "What do you think is behind that pattern?",
];

const MIRROR: [(&str, &str); 14] = [
    ("i'm", "you're"),
    ("im", "you're"),
    ("i've", "you've"),
    ("i'd", "you'd"),
    ("i'll", "you'll"),
    ("i", "you"),
    ("me", "you"),
    ("my", "your"),
    ("mine", "yours"),
    ("myself", "yourself"),
    ("am", "are"),
    ("was", "were"),
    ("we", "you"),
    ("our", "your"),
];

fn mirror(text: &str) -> String {
    let first = text
        .split_inclusive(['.', '!', '?'])
        .map(str::trim)
        .find(|s| s.chars().any(char::is_alphanumeric))
        .unwrap_or("");
    let words: Vec<String> = first
        .split_whitespace()
        .take(14)
        .map(|w| {
            let core = w.trim_matches(|c: char| !c.is_alphanumeric() && c != '\'');
            let lower = core.to_lowercase().replace('\u{2019}', "'");
            match MIRROR.iter().find(|(from, _)| *from == lower) {
                Some((_, to)) => w.replacen(core, to, 1),
                None if core == "I" => w.replacen(core, "you", 1),
                None => w.to_string(),
            }
        })
        .collect();
    let joined = words.join(" ");
    let trimmed = joined.trim_end_matches(|c: char| !c.is_alphanumeric() && c != '\'');
    let mut chars = trimmed.chars();
    match chars.next() {
        Some(c) if !trimmed.starts_with("I ") => c.to_lowercase().chain(chars).collect(),
        Some(_) => trimmed.to_string(),
        None => "this matters to you".to_string(),
    }
}

/// Deterministic reply for `bundle`.
pub fn mock_complete(bundle: &PromptBundle) -> CompletionResult {
    let digest = Sha256::digest(bundle.to_canonical_json().as_bytes());
    let last_user = bundle
        .window_messages
        .iter()
        .rev()
        .find(|m| m.role == MessageRole::User);
    let text = match last_user {
        None => MOCK_GREETING.to_string(),
        Some(m) => {
            let reflection = REFLECTIONS[digest[0] as usize % REFLECTIONS.len()].replace("{}", &mirror(&m.content));
            let bridge = BRIDGES[digest[1] as usize % BRIDGES.len()];
            let affirmation = AFFIRMATIONS[digest[2] as usize % AFFIRMATIONS.len()];
            let question = QUESTIONS[digest[3] as usize % QUESTIONS.len()];
            let lead = LEADS[digest[4] as usize % LEADS.len()];
            let question = if lead.is_empty() {
                question.to_string()
            } else {
                let mut chars = question.chars();
                let first = chars.next().expect("question text");
                format!("{lead}{}{}", first.to_lowercase(), chars.as_str())
            };
            format!("{reflection} {bridge} {affirmation} {question}")
        }
    };
    CompletionResult {
        text,
        latency_ms: 0,
        attempt_count: 1,
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MockBackend;

#[async_trait]
impl CompletionBackend for MockBackend {
    async fn complete(&self, bundle: &PromptBundle) -> Result<CompletionResult, LlmError> {
        Ok(mock_complete(bundle))
    }

    fn describe(&self) -> String {
        "mock".to_string()
    }
}
