//! Rule-based MI pre-tagger.
//!
//! Output is provisional seed material for human coders. It is always
//! attributed to [`HEURISTIC_CODER`] and rejected by reliability statistics.

use super::{AnnotatedTurn, CodePosition, MiCode, MiMark, TtmCounts, TurnRef};
use crate::session::{Role, Turn};

/// Coder id carried by every pre-tagged annotation.
pub const HEURISTIC_CODER: &str = "heuristic";

const REFLECTION_OPENERS: [&str; 13] = [
    "it sounds like",
    "sounds like",
    "you feel",
    "you're feeling",
    "it seems like",
    "it seems that",
    "what i'm hearing",
    "you're saying",
    "if i understand",
    "you've noticed",
    "from what you describe",
    "so you",
    "so, you",
];

const PRAISE: [&str; 17] = [
    "thanks for sharing",
    "thank you for sharing",
    "give yourself credit",
    "your honesty",
    "awareness helps",
    "great",
    "well done",
    "good job",
    "impressive",
    "proud",
    "appreciate",
    "commend",
    "admire",
    "that's a strength",
    "nice work",
    "excellent",
    "brave",
];

const SUMMARY_OPENERS: [&str; 4] = ["to summarize", "so far you've", "in summary", "let me summarize"];

fn sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        cur.push(ch);
        if matches!(ch, '.' | '!' | '?') {
            let s = cur.trim();
            if s.chars().any(char::is_alphanumeric) {
                out.push(s.to_string());
            }
            cur.clear();
        }
    }
    let s = cur.trim();
    if s.chars().any(char::is_alphanumeric) {
        out.push(s.to_string());
    }
    out
}

fn classify(sentence: &str) -> Option<MiCode> {
    let lower = sentence.to_lowercase().replace('\u{2019}', "'");
    if SUMMARY_OPENERS.iter().any(|p| lower.starts_with(p)) {
        Some(MiCode::S)
    } else if REFLECTION_OPENERS.iter().any(|p| lower.starts_with(p)) {
        Some(MiCode::R)
    } else if lower.ends_with('?') {
        Some(MiCode::O)
    } else if PRAISE.iter().any(|p| lower.contains(p)) {
        Some(MiCode::A)
    } else {
        None
    }
}

/// Candidate MI codes for a counselor turn, one per tagged sentence. The
/// first sentence's code opens the turn and the last sentence's closes it.
pub fn pretag_mi_codes(text: &str) -> Vec<MiMark> {
    let sents = sentences(text);
    let last = sents.len().saturating_sub(1);
    sents
        .iter()
        .enumerate()
        .filter_map(|(i, s)| {
            let code = classify(s)?;
            let position = match (i == 0, i == last) {
                (true, true) => CodePosition::OpensAndCloses,
                (true, false) => CodePosition::OpensTurn,
                (false, true) => CodePosition::ClosesTurn,
                _ => CodePosition::Interior,
            };
            Some(MiMark::new(code, position))
        })
        .collect()
}

/// Heuristic annotation of an agent turn; `None` for other roles.
pub fn pretag_turn(session_id: &str, turn: &Turn) -> Option<AnnotatedTurn> {
    (turn.role == Role::Agent).then(|| AnnotatedTurn {
        turn: TurnRef {
            session_id: session_id.to_string(),
            index: turn.index,
        },
        role: Role::Agent,
        coder_id: HEURISTIC_CODER.to_string(),
        mi_codes: pretag_mi_codes(&turn.text),
        ttm_counts: TtmCounts::default(),
        category: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn codes(text: &str) -> Vec<MiCode> {
        pretag_mi_codes(text).into_iter().map(|m| m.code).collect()
    }

    #[test]
    fn rules() {
        assert_eq!(
            codes("It sounds like evenings are hard. That took courage, well done! What would help?"),
            [MiCode::R, MiCode::A, MiCode::O]
        );
        assert_eq!(codes("You feel tired after work?"), [MiCode::R]);
        assert_eq!(codes("Okay."), Vec::<MiCode>::new());
    }

    #[test]
    fn positions_follow_sentences() {
        let marks = pretag_mi_codes("Sounds like a busy week. Fine. How do mornings go?");
        assert_eq!(marks[0].position, CodePosition::OpensTurn);
        assert_eq!(marks[1].position, CodePosition::ClosesTurn);
        // untagged first sentence means nothing opens the turn
        let marks = pretag_mi_codes("Okay. What else?");
        assert_eq!(marks, vec![MiMark::new(MiCode::O, CodePosition::ClosesTurn)]);
    }

    #[test]
    fn only_agent_turns() {
        let t = Turn {
            index: 2,
            role: Role::User,
            text: "Why?".into(),
            timestamp_ms: 0,
        };
        assert!(pretag_turn("s", &t).is_none());
        let t = Turn { role: Role::Agent, ..t };
        let a = pretag_turn("s", &t).unwrap();
        assert!(a.is_heuristic());
        assert_eq!(a.opener(), Some(MiCode::O));
    }
}
