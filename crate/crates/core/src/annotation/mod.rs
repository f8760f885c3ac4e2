//! MI technique, TTM subprocess and response-category annotations.
//!
//! Annotation files are CSV with the header
//! `session_id,turn_index,coder_id,mi_codes,ttm_counts,category`:
//!
//! - `mi_codes`: codes in within-turn order separated by `;`, each optionally
//!   tagged `@open`, `@close` or `@open@close`, e.g. `R@open;A;O@close`
//! - `ttm_counts`: `CR_P:CR_A:AR_P:AR_A` non-negative integers, empty for zeros
//! - `category`: `sustain`, `change`, `neutral` or `commitment`; required on
//!   user turns, empty on agent turns
//!
//! Rows are resolved against a [`TurnCatalog`] so every reference names an
//! existing turn and the turn's role is known.

mod analysis;
mod pretag;
mod reliability;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompt::Subprocess;
use crate::session::{Role, Session};

pub use analysis::{
    consensus_view, frequency_table, mi_frequency_table, phase_of, phase_technique_counts, position_stats,
    segment_phases, subprocess_frequency_table, FrequencyRow, FrequencyTable, Phase, PhaseCounts, PositionStats,
    CONSENSUS_CODER,
};
pub use pretag::{pretag_mi_codes, pretag_turn, HEURISTIC_CODER};
pub use reliability::{cohen_kappa, percent_agreement, reliability, ReliabilityReport};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnnotationError {
    #[error("annotation line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("kappa is undefined: chance agreement is 1")]
    UndefinedKappa,
}

impl AnnotationError {
    pub fn code(&self) -> &'static str {
        match self {
            AnnotationError::Parse { .. } => "parse",
            AnnotationError::Validation(_) => "validation",
            AnnotationError::UndefinedKappa => "undefined_kappa",
        }
    }

    fn parse(line: usize, reason: impl Into<String>) -> Self {
        AnnotationError::Parse {
            line,
            reason: reason.into(),
        }
    }
}

/// Counselor MI technique.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MiCode {
    /// Open-ended question.
    O,
    /// Affirmation.
    A,
    /// Reflection.
    R,
    /// Summary.
    S,
}

impl MiCode {
    pub const ALL: [MiCode; 4] = [MiCode::O, MiCode::A, MiCode::R, MiCode::S];

    pub fn as_str(&self) -> &'static str {
        match self {
            MiCode::O => "O",
            MiCode::A => "A",
            MiCode::R => "R",
            MiCode::S => "S",
        }
    }

    pub fn slot(&self) -> usize {
        *self as usize
    }
}

impl fmt::Display for MiCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MiCode {
    type Err = AnnotationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MiCode::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| AnnotationError::Validation(format!("unknown MI code {s:?}")))
    }
}

/// Where a code sits within its turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodePosition {
    OpensTurn,
    ClosesTurn,
    /// A single code that both opens and closes its turn.
    OpensAndCloses,
    Interior,
}

impl CodePosition {
    pub fn opens(&self) -> bool {
        matches!(self, CodePosition::OpensTurn | CodePosition::OpensAndCloses)
    }

    pub fn closes(&self) -> bool {
        matches!(self, CodePosition::ClosesTurn | CodePosition::OpensAndCloses)
    }

    fn suffix(&self) -> &'static str {
        match self {
            CodePosition::OpensTurn => "@open",
            CodePosition::ClosesTurn => "@close",
            CodePosition::OpensAndCloses => "@open@close",
            CodePosition::Interior => "",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MiMark {
    pub code: MiCode,
    pub position: CodePosition,
}

impl MiMark {
    pub fn new(code: MiCode, position: CodePosition) -> Self {
        MiMark { code, position }
    }
}

/// Parses `R@open;A;O@close`. Tags must agree with list order: an opener is
/// first, a closer is last, and each tag appears at most once.
pub fn parse_mi_codes(field: &str) -> Result<Vec<MiMark>, AnnotationError> {
    let field = field.trim();
    if field.is_empty() {
        return Ok(Vec::new());
    }
    let items: Vec<&str> = field.split(';').map(str::trim).collect();
    let last = items.len() - 1;
    let mut marks = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        let mut parts = item.split('@');
        let code: MiCode = parts.next().unwrap_or_default().parse()?;
        let (mut open, mut close) = (false, false);
        for tag in parts {
            let seen = match tag {
                "open" => std::mem::replace(&mut open, true),
                "close" => std::mem::replace(&mut close, true),
                other => return Err(AnnotationError::Validation(format!("unknown position tag {other:?}"))),
            };
            if seen {
                return Err(AnnotationError::Validation(format!("repeated tag in {item:?}")));
            }
        }
        if open && i != 0 {
            return Err(AnnotationError::Validation(format!("{item:?} opens the turn but is not first")));
        }
        if close && i != last {
            return Err(AnnotationError::Validation(format!("{item:?} closes the turn but is not last")));
        }
        let position = match (open, close) {
            (true, true) => CodePosition::OpensAndCloses,
            (true, false) => CodePosition::OpensTurn,
            (false, true) => CodePosition::ClosesTurn,
            (false, false) => CodePosition::Interior,
        };
        marks.push(MiMark::new(code, position));
    }
    Ok(marks)
}

pub fn format_mi_codes(marks: &[MiMark]) -> String {
    marks
        .iter()
        .map(|m| format!("{}{}", m.code, m.position.suffix()))
        .collect::<Vec<_>>()
        .join(";")
}

/// Per-turn TTM self-reevaluation counts in `CR_P, CR_A, AR_P, AR_A` order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TtmCounts(pub [u32; 4]);

impl TtmCounts {
    pub fn get(&self, p: Subprocess) -> u32 {
        self.0[Subprocess::ALL.iter().position(|q| *q == p).expect("subprocess in ALL")]
    }

    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }
}

impl fmt::Display for TtmCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = self.0;
        write!(f, "{a}:{b}:{c}:{d}")
    }
}

impl FromStr for TtmCounts {
    type Err = AnnotationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(TtmCounts::default());
        }
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 4 {
            return Err(AnnotationError::Validation(format!(
                "ttm_counts {s:?} must have four fields CR_P:CR_A:AR_P:AR_A"
            )));
        }
        let mut out = [0u32; 4];
        for (slot, part) in out.iter_mut().zip(parts) {
            *slot = part
                .trim()
                .parse()
                .map_err(|_| AnnotationError::Validation(format!("bad count {part:?} in {s:?}")))?;
        }
        Ok(TtmCounts(out))
    }
}

/// Participant response category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseCategory {
    Sustain,
    Change,
    Neutral,
    Commitment,
}

impl ResponseCategory {
    pub const ALL: [ResponseCategory; 4] = [
        ResponseCategory::Sustain,
        ResponseCategory::Change,
        ResponseCategory::Neutral,
        ResponseCategory::Commitment,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ResponseCategory::Sustain => "sustain",
            ResponseCategory::Change => "change",
            ResponseCategory::Neutral => "neutral",
            ResponseCategory::Commitment => "commitment",
        }
    }

    pub fn slot(&self) -> usize {
        *self as usize
    }
}

impl fmt::Display for ResponseCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ResponseCategory {
    type Err = AnnotationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ResponseCategory::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| AnnotationError::Validation(format!("unknown category {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TurnRef {
    pub session_id: String,
    pub index: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedTurn {
    pub turn: TurnRef,
    pub role: Role,
    pub coder_id: String,
    pub mi_codes: Vec<MiMark>,
    pub ttm_counts: TtmCounts,
    pub category: Option<ResponseCategory>,
}

impl AnnotatedTurn {
    /// Checks the role constraints: agent turns carry no category, user turns
    /// carry exactly one category and no MI codes.
    pub fn validate(&self) -> Result<(), AnnotationError> {
        if self.coder_id.trim().is_empty() {
            return Err(AnnotationError::Validation("coder_id is empty".into()));
        }
        match self.role {
            Role::Agent if self.category.is_some() => {
                Err(AnnotationError::Validation("agent turns carry no category".into()))
            }
            Role::User if !self.mi_codes.is_empty() => {
                Err(AnnotationError::Validation("user turns carry no MI codes".into()))
            }
            Role::User if self.category.is_none() => {
                Err(AnnotationError::Validation("user turns need a category".into()))
            }
            Role::System => Err(AnnotationError::Validation("system turns are not annotated".into())),
            _ => Ok(()),
        }
    }

    pub fn is_heuristic(&self) -> bool {
        self.coder_id == HEURISTIC_CODER
    }

    pub fn opener(&self) -> Option<MiCode> {
        self.mi_codes.iter().find(|m| m.position.opens()).map(|m| m.code)
    }

    pub fn closer(&self) -> Option<MiCode> {
        self.mi_codes.iter().find(|m| m.position.closes()).map(|m| m.code)
    }

    /// Occurrences of each MI code, in [`MiCode::ALL`] order.
    pub fn mi_counts(&self) -> [u32; 4] {
        let mut out = [0; 4];
        for m in &self.mi_codes {
            out[m.code.slot()] += 1;
        }
        out
    }
}

/// Roles of every known turn, keyed by session.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TurnCatalog {
    sessions: BTreeMap<String, Vec<Role>>,
}

impl TurnCatalog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_sessions<'a>(sessions: impl IntoIterator<Item = &'a Session>) -> Self {
        let mut catalog = Self::new();
        for s in sessions {
            catalog.insert(s.id(), s.turns().iter().map(|t| t.role).collect());
        }
        catalog
    }

    /// Registers a session whose turn `i` (1-based) has role `roles[i - 1]`.
    pub fn insert(&mut self, session_id: &str, roles: Vec<Role>) {
        self.sessions.insert(session_id.to_string(), roles);
    }

    pub fn role(&self, turn: &TurnRef) -> Option<Role> {
        let roles = self.sessions.get(&turn.session_id)?;
        let i = usize::try_from(turn.index).ok()?.checked_sub(1)?;
        roles.get(i).copied()
    }

    pub fn turn_count(&self, session_id: &str) -> Option<usize> {
        self.sessions.get(session_id).map(Vec::len)
    }

    pub fn session_ids(&self) -> impl Iterator<Item = &str> {
        self.sessions.keys().map(String::as_str)
    }
}

pub const ANNOTATION_HEADER: [&str; 6] = ["session_id", "turn_index", "coder_id", "mi_codes", "ttm_counts", "category"];

#[derive(Debug, Deserialize)]
struct Row {
    session_id: String,
    turn_index: String,
    coder_id: String,
    mi_codes: String,
    ttm_counts: String,
    category: String,
}

/// Parses an annotation file and resolves every row against `catalog`.
pub fn load_annotations(text: &str, catalog: &TurnCatalog) -> Result<Vec<AnnotatedTurn>, AnnotationError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| AnnotationError::parse(1, e.to_string()))?
        .clone();
    if header.iter().ne(ANNOTATION_HEADER.iter().copied()) {
        return Err(AnnotationError::parse(
            1,
            format!("header must be {}", ANNOTATION_HEADER.join(",")),
        ));
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for record in reader.deserialize::<Row>() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            AnnotationError::parse(line, e.to_string())
        })?;
        let line = out.len() + 2;
        let at = |e: AnnotationError| match e {
            AnnotationError::Validation(reason) => AnnotationError::parse(line, reason),
            other => other,
        };
        let index: u32 = record
            .turn_index
            .parse()
            .map_err(|_| AnnotationError::parse(line, format!("bad turn_index {:?}", record.turn_index)))?;
        let turn = TurnRef {
            session_id: record.session_id,
            index,
        };
        let role = catalog.role(&turn).ok_or_else(|| {
            AnnotationError::parse(
                line,
                format!("no turn {} in session {:?}", turn.index, turn.session_id),
            )
        })?;
        if !seen.insert((turn.clone(), record.coder_id.clone())) {
            return Err(AnnotationError::parse(
                line,
                format!(
                    "duplicate annotation of turn {} in {:?} by {:?}",
                    turn.index, turn.session_id, record.coder_id
                ),
            ));
        }
        let category = match record.category.as_str() {
            "" => None,
            c => Some(c.parse().map_err(at)?),
        };
        let annotated = AnnotatedTurn {
            turn,
            role,
            coder_id: record.coder_id,
            mi_codes: parse_mi_codes(&record.mi_codes).map_err(at)?,
            ttm_counts: record.ttm_counts.parse().map_err(at)?,
            category,
        };
        annotated.validate().map_err(at)?;
        out.push(annotated);
    }
    Ok(out)
}

/// Serializes annotations in the file format read by [`load_annotations`].
pub fn write_annotations(rows: &[AnnotatedTurn]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(ANNOTATION_HEADER).expect("write to memory");
    for r in rows {
        writer
            .write_record([
                r.turn.session_id.clone(),
                r.turn.index.to_string(),
                r.coder_id.clone(),
                format_mi_codes(&r.mi_codes),
                r.ttm_counts.to_string(),
                r.category.map(|c| c.to_string()).unwrap_or_default(),
            ])
            .expect("write to memory");
    }
    String::from_utf8(writer.into_inner().expect("flush to memory")).expect("csv output is UTF-8")
}
