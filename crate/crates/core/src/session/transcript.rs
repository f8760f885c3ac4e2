//! Line-delimited transcript format.
//!
//! Each session is written as one header object followed by one object per
//! turn, LF-terminated UTF-8 JSON:
//!
//! ```text
//! {"session_id":"..","state":"closed","started_ms":1,"ended_ms":9,"survey":null}
//! {"session_id":"..","index":1,"role":"agent","text":"..","timestamp_ms":1,"condition":"counsel","topic":"fats"}
//! ```
//!
//! Several sessions may be concatenated in one stream.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{Condition, Role, Session, SessionError, SessionState, SurveyRecord, Topic, Turn, OPENER};

const HEADER_KEYS: [&str; 5] = ["session_id", "state", "started_ms", "ended_ms", "survey"];
const TURN_KEYS: [&str; 7] = [
    "session_id",
    "index",
    "role",
    "text",
    "timestamp_ms",
    "condition",
    "topic",
];

#[derive(Serialize, Deserialize)]
struct HeaderRecord {
    session_id: String,
    state: SessionState,
    started_ms: i64,
    ended_ms: Option<i64>,
    survey: Option<SurveyRecord>,
}

#[derive(Serialize, Deserialize)]
struct TurnRecord {
    session_id: String,
    index: u32,
    role: Role,
    text: String,
    timestamp_ms: i64,
    condition: Condition,
    topic: Topic,
}

pub fn export_transcript(session: &Session) -> Vec<u8> {
    let mut out = Vec::new();
    write_session(session, &mut out);
    out
}

fn write_session(session: &Session, out: &mut Vec<u8>) {
    let header = HeaderRecord {
        session_id: session.session_id.clone(),
        state: session.state,
        started_ms: session.started_ms,
        ended_ms: session.ended_ms,
        survey: session.survey.clone(),
    };
    serde_json::to_writer(&mut *out, &header).expect("header serializes");
    out.push(b'\n');
    for turn in &session.turns {
        out.extend(export_turn_line(session, turn));
    }
}

/// One serialized turn record, including its trailing newline.
pub fn export_turn_line(session: &Session, turn: &Turn) -> Vec<u8> {
    let record = TurnRecord {
        session_id: session.session_id.clone(),
        index: turn.index,
        role: turn.role,
        text: turn.text.clone(),
        timestamp_ms: turn.timestamp_ms,
        condition: session.condition,
        topic: session.topic,
    };
    let mut line = serde_json::to_vec(&record).expect("turn serializes");
    line.push(b'\n');
    line
}

/// Parses a stream holding exactly one session.
pub fn load_transcript(bytes: &[u8]) -> Result<Session, SessionError> {
    let mut sessions = load_transcripts(bytes)?;
    match sessions.len() {
        1 => Ok(sessions.pop().expect("one session")),
        0 => Err(parse_err(0, "stream contains no session")),
        n => Err(parse_err(0, format!("expected one session, found {n}"))),
    }
}

/// Parses a stream of one or more concatenated sessions.
pub fn load_transcripts(bytes: &[u8]) -> Result<Vec<Session>, SessionError> {
    let text = std::str::from_utf8(bytes).map_err(|e| parse_err(0, format!("not UTF-8: {e}")))?;
    let mut sessions: Vec<Session> = Vec::new();
    let mut seen = HashSet::new();
    let mut current: Option<Session> = None;

    for (i, raw) in text.split('\n').enumerate() {
        let line_no = i + 1;
        if raw.is_empty() {
            continue;
        }
        if raw.ends_with('\r') {
            return Err(parse_err(line_no, "CRLF line ending"));
        }
        let map: Map<String, Value> = serde_json::from_str(raw)
            .map_err(|e| parse_err(line_no, format!("malformed record: {e}")))?;
        let keys: HashSet<&str> = map.keys().map(String::as_str).collect();

        if keys == HEADER_KEYS.into_iter().collect() {
            if let Some(done) = current.take() {
                sessions.push(finish(done, line_no)?);
            }
            let header: HeaderRecord = serde_json::from_value(Value::Object(map))
                .map_err(|e| parse_err(line_no, format!("bad header: {e}")))?;
            if !seen.insert(header.session_id.clone()) {
                return Err(parse_err(
                    line_no,
                    format!("duplicate session_id {}", header.session_id),
                ));
            }
            if let Some(survey) = &header.survey {
                survey
                    .validate()
                    .map_err(|e| parse_err(line_no, e.to_string()))?;
            }
            current = Some(Session {
                session_id: header.session_id,
                // Placeholders until the opener record is read.
                condition: Condition::Baseline,
                topic: Topic::SugarSalt,
                turns: Vec::new(),
                state: header.state,
                started_ms: header.started_ms,
                ended_ms: header.ended_ms,
                survey: header.survey,
            });
        } else if keys == TURN_KEYS.into_iter().collect() {
            let record: TurnRecord = serde_json::from_value(Value::Object(map))
                .map_err(|e| parse_err(line_no, format!("bad turn: {e}")))?;
            let session = current
                .as_mut()
                .ok_or_else(|| parse_err(line_no, "turn record before any header"))?;
            push_turn(session, record, line_no)?;
        } else {
            return Err(parse_err(line_no, "record has unexpected field set"));
        }
    }
    if let Some(done) = current.take() {
        sessions.push(finish(done, text.lines().count())?);
    }
    Ok(sessions)
}

fn push_turn(session: &mut Session, record: TurnRecord, line: usize) -> Result<(), SessionError> {
    if record.session_id != session.session_id {
        return Err(parse_err(
            line,
            format!(
                "turn belongs to {} inside session {}",
                record.session_id, session.session_id
            ),
        ));
    }
    let expected = session.turns.len() as u32 + 1;
    if record.index != expected {
        return Err(parse_err(
            line,
            format!("turn index {} out of order, expected {expected}", record.index),
        ));
    }
    if record.text.trim().is_empty() {
        return Err(parse_err(line, "empty turn text"));
    }
    if expected == 1 {
        if record.role != Role::Agent {
            return Err(parse_err(line, "first turn must be the agent opener"));
        }
        if record.text != OPENER {
            return Err(parse_err(line, "first turn text is not the fixed opener"));
        }
        session.condition = record.condition;
        session.topic = record.topic;
        if record.timestamp_ms < session.started_ms {
            return Err(parse_err(line, "opener precedes session start"));
        }
    } else {
        if record.condition != session.condition || record.topic != session.topic {
            return Err(parse_err(line, "condition/topic changed mid-session"));
        }
        let prev = session.turns.last().expect("opener present").timestamp_ms;
        if record.timestamp_ms < prev {
            return Err(parse_err(line, "timestamp decreases"));
        }
    }
    session.turns.push(Turn {
        index: record.index,
        role: record.role,
        text: record.text,
        timestamp_ms: record.timestamp_ms,
    });
    Ok(())
}

fn finish(session: Session, line: usize) -> Result<Session, SessionError> {
    if session.turns.is_empty() {
        return Err(parse_err(
            line,
            format!("session {} has no turns", session.session_id),
        ));
    }
    match (session.state, session.ended_ms) {
        (SessionState::Open, Some(_)) => Err(parse_err(line, "open session carries ended_ms")),
        (SessionState::Closed, None) => Err(parse_err(line, "closed session lacks ended_ms")),
        (SessionState::Closed, Some(end)) if end < session.started_ms => {
            Err(parse_err(line, "ended_ms precedes started_ms"))
        }
        _ => Ok(session),
    }
}

fn parse_err(line: usize, reason: impl Into<String>) -> SessionError {
    SessionError::Parse {
        line,
        reason: reason.into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Session {
        let mut s = Session::create_with("abc", Condition::Counsel, Topic::FruitVeg, 100);
        s.append_turn_at(Role::User, "I never eat vegetables.", 110)
            .unwrap();
        s.append_turn_at(Role::Agent, "It sounds like that matters to you?", 120)
            .unwrap();
        s
    }

    fn lines(s: &Session) -> Vec<String> {
        String::from_utf8(export_transcript(s))
            .unwrap()
            .lines()
            .map(str::to_string)
            .collect()
    }

    #[test]
    fn export_layout() {
        let l = lines(&sample());
        assert_eq!(l.len(), 4);
        assert_eq!(
            l[0],
            r#"{"session_id":"abc","state":"open","started_ms":100,"ended_ms":null,"survey":null}"#
        );
        assert_eq!(
            l[1],
            r#"{"session_id":"abc","index":1,"role":"agent","text":"What can I help you with today?","timestamp_ms":100,"condition":"counsel","topic":"fruit_veg"}"#
        );
    }

    #[test]
    fn round_trip_closed_with_survey() {
        let mut s = sample();
        s.end_at(None, 200).unwrap();
        s.set_survey(SurveyRecord {
            intention_pre: 2,
            intention_post: 8,
            acceptance: vec![],
        })
        .unwrap();
        let back = load_transcript(&export_transcript(&s)).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn skipped_index_is_rejected() {
        let s = sample();
        let mut l = lines(&s);
        l.remove(2); // drop index 2, leaving 1,3
        let err = load_transcript(l.join("\n").as_bytes()).unwrap_err();
        assert_eq!(err.code(), "parse");
        assert!(err.to_string().contains("out of order"), "{err}");
    }

    #[test]
    fn user_opener_is_rejected() {
        let stream = concat!(
            r#"{"session_id":"x","state":"open","started_ms":0,"ended_ms":null,"survey":null}"#,
            "\n",
            r#"{"session_id":"x","index":1,"role":"user","text":"What can I help you with today?","timestamp_ms":0,"condition":"baseline","topic":"fats"}"#,
            "\n"
        );
        let err = load_transcript(stream.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("agent opener"), "{err}");
    }

    #[test]
    fn duplicate_session_id_is_rejected() {
        let mut bytes = export_transcript(&sample());
        bytes.extend(export_transcript(&sample()));
        let err = load_transcripts(&bytes).unwrap_err();
        assert!(err.to_string().contains("duplicate session_id"), "{err}");
    }

    #[test]
    fn malformed_and_unknown_records() {
        assert_eq!(load_transcript(b"{not json\n").unwrap_err().code(), "parse");
        let extra = r#"{"session_id":"x","state":"open","started_ms":0,"ended_ms":null,"survey":null,"extra":1}"#;
        assert!(load_transcript(extra.as_bytes()).is_err());
        assert!(load_transcript(b"").is_err());
    }

    #[test]
    fn crlf_is_rejected() {
        let text = String::from_utf8(export_transcript(&sample()))
            .unwrap()
            .replace('\n', "\r\n");
        assert!(load_transcript(text.as_bytes()).is_err());
    }

    #[test]
    fn multiple_sessions_load_in_order() {
        let a = sample();
        let b = Session::create_with("def", Condition::Baseline, Topic::Fats, 7);
        let mut bytes = export_transcript(&a);
        bytes.extend(export_transcript(&b));
        let all = load_transcripts(&bytes).unwrap();
        assert_eq!(all, vec![a, b]);
        assert!(load_transcript(&bytes).is_err());
    }
}
