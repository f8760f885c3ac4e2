//! Session lifecycle and sliding context window.
//!
//! A session always starts with the fixed agent opener and only ever grows by
//! appending turns until it is closed with a closure phrase. Turn indices are
//! 1-based and contiguous; timestamps never decrease.

mod transcript;

use std::fmt;
use std::num::NonZeroUsize;
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use transcript::{export_transcript, export_turn_line, load_transcript, load_transcripts};

/// Fixed opening prompt shown at the start of every session.
pub const OPENER: &str = "What can I help you with today?";

/// Default MI-aligned closure phrase appended by [`Session::end`].
pub const DEFAULT_CLOSURE: &str = "I\u{2019}m glad I could help today";

/// Default number of messages kept in the context window (three exchanges).
pub const DEFAULT_WINDOW: usize = 6;

/// Advisory session length surfaced to clients; never enforced.
pub const TIME_BUDGET_SECS: u64 = 600;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SessionError {
    #[error("invalid {field}: {reason}")]
    Validation { field: &'static str, reason: String },
    #[error("session {session_id} is {state}: {reason}")]
    Lifecycle {
        session_id: String,
        state: SessionState,
        reason: &'static str,
    },
    #[error("transcript line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

impl SessionError {
    /// Machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            SessionError::Validation { .. } => "validation",
            SessionError::Lifecycle { .. } => "lifecycle",
            SessionError::Parse { .. } => "parse",
        }
    }

    fn validation(field: &'static str, reason: impl Into<String>) -> Self {
        SessionError::Validation {
            field,
            reason: reason.into(),
        }
    }
}

macro_rules! string_enum {
    ($(#[$meta:meta])* $name:ident, $field:literal { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(&self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = SessionError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(SessionError::validation($field, format!("unknown value {other:?}"))),
                }
            }
        }
    };
}

string_enum!(
    /// Author of a turn.
    Role, "role" { Agent => "agent", User => "user", System => "system" }
);
string_enum!(
    /// Which agent the participant is talking to.
    Condition, "condition" { Baseline => "baseline", Counsel => "counsel" }
);
string_enum!(
    /// Dietary concern discussed in the session.
    Topic, "topic" { SugarSalt => "sugar_salt", Fats => "fats", FruitVeg => "fruit_veg" }
);
string_enum!(
    SessionState, "state" { Open => "open", Closed => "closed" }
);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub index: u32,
    pub role: Role,
    pub text: String,
    pub timestamp_ms: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcceptanceItem {
    pub item_id: String,
    pub score: u8,
}

/// Pre/post intention ratings (0..=10) plus optional acceptance items (1..=5).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyRecord {
    pub intention_pre: u8,
    pub intention_post: u8,
    #[serde(default)]
    pub acceptance: Vec<AcceptanceItem>,
}

impl SurveyRecord {
    pub fn validate(&self) -> Result<(), SessionError> {
        for (field, value) in [
            ("intention_pre", self.intention_pre),
            ("intention_post", self.intention_post),
        ] {
            if value > 10 {
                return Err(SessionError::validation(
                    field,
                    format!("{value} is outside 0..=10"),
                ));
            }
        }
        for item in &self.acceptance {
            if item.item_id.trim().is_empty() {
                return Err(SessionError::validation("acceptance", "empty item id"));
            }
            if !(1..=5).contains(&item.score) {
                return Err(SessionError::validation(
                    "acceptance",
                    format!("item {} score {} is outside 1..=5", item.item_id, item.score),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Session {
    session_id: String,
    condition: Condition,
    topic: Topic,
    turns: Vec<Turn>,
    state: SessionState,
    started_ms: i64,
    ended_ms: Option<i64>,
    survey: Option<SurveyRecord>,
}

pub fn now_ms() -> i64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as i64)
        .unwrap_or_default()
}

impl Session {
    /// Opens a new session containing only the fixed opener.
    pub fn create(condition: Condition, topic: Topic) -> Self {
        Self::create_with(uuid::Uuid::new_v4().to_string(), condition, topic, now_ms())
    }

    /// Like [`Session::create`] with an explicit id and clock reading.
    pub fn create_with(
        session_id: impl Into<String>,
        condition: Condition,
        topic: Topic,
        started_ms: i64,
    ) -> Self {
        Session {
            session_id: session_id.into(),
            condition,
            topic,
            turns: vec![Turn {
                index: 1,
                role: Role::Agent,
                text: OPENER.to_string(),
                timestamp_ms: started_ms,
            }],
            state: SessionState::Open,
            started_ms,
            ended_ms: None,
            survey: None,
        }
    }

    pub fn id(&self) -> &str {
        &self.session_id
    }

    pub fn condition(&self) -> Condition {
        self.condition
    }

    pub fn topic(&self) -> Topic {
        self.topic
    }

    pub fn turns(&self) -> &[Turn] {
        &self.turns
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    pub fn is_open(&self) -> bool {
        self.state == SessionState::Open
    }

    pub fn started_ms(&self) -> i64 {
        self.started_ms
    }

    pub fn ended_ms(&self) -> Option<i64> {
        self.ended_ms
    }

    pub fn survey(&self) -> Option<&SurveyRecord> {
        self.survey.as_ref()
    }

    fn last_timestamp(&self) -> i64 {
        self.turns
            .last()
            .map(|t| t.timestamp_ms)
            .unwrap_or(self.started_ms)
    }

    fn ensure_open(&self, reason: &'static str) -> Result<(), SessionError> {
        if self.is_open() {
            Ok(())
        } else {
            Err(SessionError::Lifecycle {
                session_id: self.session_id.clone(),
                state: self.state,
                reason,
            })
        }
    }

    pub fn append_turn(&mut self, role: Role, text: &str) -> Result<&Turn, SessionError> {
        self.append_turn_at(role, text, now_ms())
    }

    /// Appends a turn; the stored timestamp is clamped so it never goes backwards.
    pub fn append_turn_at(
        &mut self,
        role: Role,
        text: &str,
        timestamp_ms: i64,
    ) -> Result<&Turn, SessionError> {
        self.ensure_open("cannot append to a closed session")?;
        if text.trim().is_empty() {
            return Err(SessionError::validation("text", "turn text is empty"));
        }
        let turn = Turn {
            index: self.turns.len() as u32 + 1,
            role,
            text: text.to_string(),
            timestamp_ms: timestamp_ms.max(self.last_timestamp()),
        };
        self.turns.push(turn);
        Ok(self.turns.last().expect("just pushed"))
    }

    /// The last `min(window, turn count)` turns, in order.
    pub fn context_window(&self, window: NonZeroUsize) -> &[Turn] {
        let start = self.turns.len().saturating_sub(window.get());
        &self.turns[start..]
    }

    pub fn end(&mut self, closure_text: Option<&str>) -> Result<&Turn, SessionError> {
        self.end_at(closure_text, now_ms())
    }

    /// Appends the agent closure turn and closes the session.
    pub fn end_at(
        &mut self,
        closure_text: Option<&str>,
        timestamp_ms: i64,
    ) -> Result<&Turn, SessionError> {
        self.ensure_open("session is already closed")?;
        let text = closure_text.unwrap_or(DEFAULT_CLOSURE);
        self.append_turn_at(Role::Agent, text, timestamp_ms)?;
        self.state = SessionState::Closed;
        self.ended_ms = Some(self.last_timestamp());
        Ok(self.turns.last().expect("closure turn"))
    }

    pub fn set_survey(&mut self, survey: SurveyRecord) -> Result<(), SessionError> {
        survey.validate()?;
        self.survey = Some(survey);
        Ok(())
    }

    /// Turns authored by the participant.
    pub fn user_turns(&self) -> impl Iterator<Item = &Turn> {
        self.turns.iter().filter(|t| t.role == Role::User)
    }
}
