use std::collections::HashMap;

use counsel_core::prompt::{assemble_prompt, default_config, PromptBundle, Scaffold, VariantId};
use counsel_core::{Condition, Role, Session, Topic};
use counsel_llm::{mock_complete, CompletionBackend, MockBackend, MOCK_GREETING};

const USER_LINES: [&str; 6] = [
    "I skip breakfast most days.",
    "My kids only eat chicken nuggets.",
    "Vegetables go bad before I use them.",
    "I'm always snacking at my desk.",
    "We eat takeout four nights a week.",
    "I don't have time to cook after work.",
];

const AGENT_LINES: [&str; 3] = [
    "What would you like to change?",
    "It sounds like evenings are busy. How do you handle dinner?",
    "That makes sense. What have you tried?",
];

fn session(lines: &[(Role, &str)]) -> Session {
    let mut s = Session::create_with("m", Condition::Counsel, Topic::FruitVeg, 0);
    for (i, (role, text)) in lines.iter().enumerate() {
        s.append_turn_at(*role, text, i as i64 + 1).unwrap();
    }
    s
}

fn bundle_for(v: VariantId, s: &Session) -> PromptBundle {
    let inputs = Scaffold::bundled().inputs_for(v, Some(1), 3).unwrap();
    assemble_prompt(v, &inputs, s.turns(), &default_config()).unwrap()
}

/// Every bundle in the fixture set: each base conversation, and copies with
/// exactly one window message replaced, across all variants.
fn fixture_set() -> Vec<(String, PromptBundle)> {
    let mut out = Vec::new();
    for v in VariantId::all() {
        for base_user in 0..USER_LINES.len() {
            let base = [
                (Role::User, USER_LINES[base_user]),
                (Role::Agent, AGENT_LINES[base_user % 3]),
                (Role::User, USER_LINES[(base_user + 1) % USER_LINES.len()]),
            ];
            out.push((format!("v{} base{base_user}", v.get()), bundle_for(v, &session(&base))));
            for slot in 0..base.len() {
                for alt in 0..USER_LINES.len() {
                    let mut changed = base;
                    let replacement = match base[slot].0 {
                        Role::User => USER_LINES[alt],
                        _ => AGENT_LINES[alt % 3],
                    };
                    if replacement == base[slot].1 {
                        continue;
                    }
                    changed[slot].1 = replacement;
                    out.push((
                        format!("v{} base{base_user} slot{slot} alt{alt}", v.get()),
                        bundle_for(v, &session(&changed)),
                    ));
                }
            }
        }
    }
    out
}

#[test]
fn distinct_bundles_get_distinct_replies() {
    let mut seen: HashMap<String, (String, String)> = HashMap::new();
    let mut distinct = 0;
    for (label, b) in fixture_set() {
        let json = b.to_canonical_json();
        let text = mock_complete(&b).text;
        match seen.get(&text) {
            Some((other_label, other_json)) if other_json != &json => {
                panic!("reply collision between {label} and {other_label}: {text}")
            }
            Some(_) => {}
            None => {
                distinct += 1;
                seen.insert(text, (label, json));
            }
        }
    }
    assert!(distinct > 300, "fixture set too small: {distinct}");
}

#[test]
fn replies_are_deterministic_counselor_shaped() {
    for (_, b) in fixture_set().into_iter().step_by(7) {
        let a = mock_complete(&b);
        assert_eq!(a, mock_complete(&b));
        assert_eq!((a.attempt_count, a.latency_ms), (1, 0));
        assert!(a.text.ends_with('?'), "{}", a.text);
        let first = a.text.split(". ").next().unwrap();
        assert!(
            ["It sounds like", "So ", "What I'm hearing", "You're saying", "It seems like", "If I understand", "You've noticed", "From what you describe"]
                .iter()
                .any(|p| first.starts_with(p)),
            "{}",
            a.text
        );
    }
}

#[test]
fn reflection_mirrors_latest_user_message() {
    let s = session(&[(Role::User, "I drink soda with every meal.")]);
    let text = mock_complete(&bundle_for(VariantId::BASELINE, &s)).text;
    assert!(text.contains("you drink soda with every meal"), "{text}");
}

#[tokio::test]
async fn empty_window_gets_greeting() {
    let b = assemble_prompt(VariantId::BASELINE, &Default::default(), &[], &default_config()).unwrap();
    let r = MockBackend.complete(&b).await.unwrap();
    assert_eq!(r.text, MOCK_GREETING);
    let opener_only = Session::create_with("g", Condition::Baseline, Topic::Fats, 0);
    assert_eq!(mock_complete(&bundle_for(VariantId::BASELINE, &opener_only)).text, MOCK_GREETING);
}
