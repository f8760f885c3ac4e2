//! File-backed session store: one transcript file per session plus an index
//! mapping session ids to paths.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use counsel_core::session::{export_transcript, export_turn_line, load_transcript};
use counsel_core::{Session, Turn};

use crate::error::{read_text, write_atomic, HarnessError};

pub const INDEX_FILE: &str = "index.json";
const SESSIONS_DIR: &str = "sessions";

pub type SessionHandle = Arc<tokio::sync::Mutex<Session>>;

#[derive(Debug)]
pub struct SessionStore {
    dir: PathBuf,
    sessions: RwLock<BTreeMap<String, SessionHandle>>,
    /// Relative transcript paths keyed by session id; guards index rewrites.
    index: Mutex<BTreeMap<String, String>>,
}

impl SessionStore {
    /// Opens `dir`, loading every session listed in its index.
    pub fn open(dir: &Path) -> Result<Self, HarnessError> {
        std::fs::create_dir_all(dir.join(SESSIONS_DIR)).map_err(|e| HarnessError::io(dir, e))?;
        let index_path = dir.join(INDEX_FILE);
        let index: BTreeMap<String, String> = if index_path.exists() {
            serde_json::from_str(&read_text(&index_path)?)
                .map_err(|e| HarnessError::Parse(format!("{}: {e}", index_path.display())))?
        } else {
            BTreeMap::new()
        };
        let mut sessions = BTreeMap::new();
        for (id, rel) in &index {
            let path = dir.join(rel);
            let bytes = std::fs::read(&path).map_err(|e| HarnessError::io(&path, e))?;
            let session = load_transcript(&bytes)?;
            if session.id() != id {
                return Err(HarnessError::Parse(format!(
                    "{} holds session {:?}, index says {id:?}",
                    path.display(),
                    session.id()
                )));
            }
            sessions.insert(id.clone(), Arc::new(tokio::sync::Mutex::new(session)));
        }
        tracing::info!(dir = %dir.display(), sessions = sessions.len(), "session store opened");
        Ok(SessionStore {
            dir: dir.to_path_buf(),
            sessions: RwLock::new(sessions),
            index: Mutex::new(index),
        })
    }

    fn relative_path(id: &str) -> String {
        format!("{SESSIONS_DIR}/{id}.jsonl")
    }

    fn path_of(&self, id: &str) -> PathBuf {
        let rel = self.index.lock().expect("index lock").get(id).cloned();
        self.dir.join(rel.unwrap_or_else(|| Self::relative_path(id)))
    }

    pub fn insert(&self, session: Session) -> Result<SessionHandle, HarnessError> {
        let id = session.id().to_string();
        let rel = Self::relative_path(&id);
        write_atomic(&self.dir.join(&rel), &export_transcript(&session))?;
        {
            let mut index = self.index.lock().expect("index lock");
            index.insert(id.clone(), rel);
            let mut json = serde_json::to_string_pretty(&*index).expect("index serializes");
            json.push('\n');
            write_atomic(&self.dir.join(INDEX_FILE), json.as_bytes())?;
        }
        let handle = Arc::new(tokio::sync::Mutex::new(session));
        self.sessions.write().expect("sessions lock").insert(id, handle.clone());
        Ok(handle)
    }

    pub fn get(&self, id: &str) -> Option<SessionHandle> {
        self.sessions.read().expect("sessions lock").get(id).cloned()
    }

    pub fn handles(&self) -> Vec<SessionHandle> {
        self.sessions.read().expect("sessions lock").values().cloned().collect()
    }

    /// Appends turn lines to the session's transcript file.
    pub fn append_turns(&self, session: &Session, turns: &[Turn]) -> Result<(), HarnessError> {
        let path = self.path_of(session.id());
        let bytes: Vec<u8> = turns.iter().flat_map(|t| export_turn_line(session, t)).collect();
        let mut file = std::fs::OpenOptions::new()
            .append(true)
            .open(&path)
            .map_err(|e| HarnessError::io(&path, e))?;
        file.write_all(&bytes).map_err(|e| HarnessError::io(&path, e))?;
        file.sync_data().map_err(|e| HarnessError::io(&path, e))
    }

    /// Rewrites the whole transcript; used when the header changes.
    pub fn rewrite(&self, session: &Session) -> Result<(), HarnessError> {
        write_atomic(&self.path_of(session.id()), &export_transcript(session))
    }
}
