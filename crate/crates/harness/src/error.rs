use std::path::{Path, PathBuf};

use counsel_core::annotation::AnnotationError;
use counsel_core::metrics::MetricError;
use counsel_core::prompt::PromptError;
use counsel_core::session::SessionError;
use counsel_core::stats::StatsError;
use counsel_llm::LlmError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("configuration error: {0}")]
    Config(String),
    /// The run produced nothing usable.
    #[error("run failed: {0}")]
    Run(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Annotation(#[from] AnnotationError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Backend(#[from] LlmError),
}

impl HarnessError {
    pub fn code(&self) -> &'static str {
        match self {
            HarnessError::Parse(_) => "parse",
            HarnessError::Config(_) => "configuration",
            HarnessError::Run(_) => "run",
            HarnessError::Io { .. } => "io",
            HarnessError::Session(e) => e.code(),
            HarnessError::Prompt(e) => e.code(),
            HarnessError::Metric(e) => e.code(),
            HarnessError::Annotation(e) => e.code(),
            HarnessError::Stats(e) => e.code(),
            HarnessError::Backend(e) => e.code(),
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String, HarnessError> {
    std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(|e| HarnessError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| HarnessError::io(path, e))
}
