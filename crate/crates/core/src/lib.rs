//! Core building blocks for motivational-interviewing counseling agents.
//!
//! - [`session`]: session lifecycle, turn storage, sliding context window and
//!   line-delimited transcript persistence.
//! - [`prompt`]: persona/knowledge/few-shot scaffold and prompt bundle assembly
//!   for the five model variants.
//! - [`metrics`]: lexical diversity, readability, concreteness, idea density,
//!   first-person usage and lexicon valence.
//! - [`annotation`]: MI technique and TTM subprocess coding, reliability,
//!   frequency tables, phase segmentation and position statistics.
//! - [`stats`]: descriptive statistics, one-way ANOVA, 2x2 within-subject
//!   interaction, Holm adjustment and F tail probabilities.

pub mod annotation;
pub mod metrics;
pub mod prompt;
pub mod session;
pub mod stats;

pub use session::{Condition, Role, Session, SessionState, SurveyRecord, Topic, Turn};
