//! Runnable surfaces for the counseling agent.
//!
//! - [`scenario`]: the 27-prompt concern-by-barrier scenario grid.
//! - [`competition`]: fan-out of scenarios across prompt variants.
//! - [`evaluate`]: linguistic and annotation reports over a run.
//! - [`service`]: HTTP JSON API for chat sessions.
//! - [`config`] and [`cli`]: the `counsel` binary.

pub mod cli;
pub mod competition;
pub mod config;
mod error;
pub mod evaluate;
pub mod scenario;
pub mod service;

pub use error::HarnessError;
